//! Dense batch solvers used to verify the recursive filters.
//!
//! Everything here materializes the full matrices (`A`, `K̃`, feature maps)
//! and solves with nalgebra factorizations, sharing no arithmetic with the
//! online code paths. Costs are up to O(n·K³); these are for desk-scale
//! verification only.

use nalgebra::{DMatrix, DVector};

use crate::error::{KafError, Result};
use crate::kernels::{gram, KernelSpec};

/// A labelled stream and the hyperparameters of the regularized KRLS cost.
#[derive(Debug, Clone)]
pub struct BatchProblem {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub spec: KernelSpec,
    pub lambda: f64,
    pub delta: f64,
}

impl BatchProblem {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.inputs.is_empty() {
            return Err(KafError::invalid("inputs", "empty stream"));
        }
        if self.inputs.len() != self.targets.len() {
            return Err(KafError::DimensionMismatch {
                expected: self.inputs.len(),
                got: self.targets.len(),
            });
        }
        let dim = self.inputs[0].len();
        for u in &self.inputs {
            if u.len() != dim {
                return Err(KafError::DimensionMismatch {
                    expected: dim,
                    got: u.len(),
                });
            }
        }
        if self.inputs.iter().flatten().chain(&self.targets).any(|x| !x.is_finite()) {
            return Err(KafError::NonFinite("batch problem"));
        }
        if !(self.lambda >= 0.0) || !(self.delta >= 0.0) {
            return Err(KafError::invalid("lambda/delta", "must be >= 0"));
        }
        Ok(())
    }
}

/// Result of a dense solve, with the 2-norm condition number of the system.
#[derive(Debug, Clone)]
pub struct Solved {
    pub alpha: DVector<f64>,
    pub condition: f64,
}

/// The replayed dictionary and the fully materialized `A(n)`.
#[derive(Debug, Clone)]
pub struct Replay {
    pub centers: Vec<Vec<f64>>,
    /// `n × K`; row `i` is the ALD coefficient row of sample `i`.
    pub a: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    /// Whether each sample was admitted as a center.
    pub admitted: Vec<bool>,
}

/// Replays one prefix step at a time. Each call to [`ReplayState::push`]
/// recomputes `K̃` from the centers and solves `K̃ a = h` by LU.
#[derive(Debug, Clone)]
pub struct ReplayState {
    spec: KernelSpec,
    delta: f64,
    centers: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    admitted: Vec<bool>,
}

impl ReplayState {
    pub fn new(spec: KernelSpec, delta: f64) -> Self {
        ReplayState {
            spec,
            delta,
            centers: Vec::new(),
            rows: Vec::new(),
            admitted: Vec::new(),
        }
    }

    pub fn push(&mut self, u: &[f64]) -> Result<()> {
        if self.centers.is_empty() {
            self.centers.push(u.to_vec());
            self.rows.push(vec![1.0]);
            self.admitted.push(true);
            return Ok(());
        }
        let k = gram(&self.spec, &self.centers)?;
        let h = DVector::from_iterator(
            self.centers.len(),
            self.centers.iter().map(|c| self.spec.eval_unchecked(c, u)),
        );
        let a = k
            .clone()
            .lu()
            .solve(&h)
            .ok_or_else(|| KafError::Singular("dictionary Gram matrix".into()))?;
        let d2 = (self.spec.eval_unchecked(u, u) - h.dot(&a)).max(0.0);
        if d2 > self.delta {
            self.centers.push(u.to_vec());
            let mut row = vec![0.0; self.centers.len()];
            *row.last_mut().unwrap() = 1.0;
            self.rows.push(row);
            self.admitted.push(true);
        } else {
            self.rows.push(a.iter().copied().collect());
            self.admitted.push(false);
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Result<Replay> {
        let kk = self.centers.len();
        let n = self.rows.len();
        let a = DMatrix::from_fn(n, kk, |i, j| self.rows[i].get(j).copied().unwrap_or(0.0));
        Ok(Replay {
            centers: self.centers.clone(),
            a,
            gram: gram(&self.spec, &self.centers)?,
            admitted: self.admitted.clone(),
        })
    }
}

impl Replay {
    /// `α̃ = [AᵀA K̃ + λI]⁻¹ Aᵀd`.
    pub fn solve(&self, targets: &[f64], lambda: f64) -> Result<Solved> {
        let d = DVector::from_column_slice(targets);
        let k = self.gram.nrows();
        let ata = self.a.transpose() * &self.a;
        let system = &ata * &self.gram + DMatrix::identity(k, k) * lambda;
        let rhs = self.a.transpose() * d;
        dense_solve(system, &rhs)
    }

    /// Diagnostic variant from the raw stationarity condition:
    /// `[K̃AᵀA K̃ + λK̃] α̃ = K̃Aᵀd`. Coincides with [`Replay::solve`] whenever
    /// `K̃` is nonsingular.
    pub fn solve_gram_weighted(&self, targets: &[f64], lambda: f64) -> Result<Solved> {
        let d = DVector::from_column_slice(targets);
        let ak = &self.a * &self.gram;
        let system = ak.transpose() * &ak + &self.gram * lambda;
        let rhs = ak.transpose() * d;
        dense_solve(system, &rhs)
    }

    /// `P = [AᵀA K̃ + λI]⁻¹` by dense inversion.
    pub fn p_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let k = self.gram.nrows();
        let system = self.a.transpose() * &self.a * &self.gram + DMatrix::identity(k, k) * lambda;
        system
            .try_inverse()
            .ok_or_else(|| KafError::Singular("AᵀA K̃ + λI".into()))
    }

    /// `L(α) = ‖A K̃ α − d‖² + λ αᵀK̃α`.
    pub fn objective(&self, targets: &[f64], lambda: f64, alpha: &DVector<f64>) -> f64 {
        let d = DVector::from_column_slice(targets);
        let r = &self.a * (&self.gram * alpha) - d;
        r.norm_squared() + lambda * alpha.dot(&(&self.gram * alpha))
    }

    /// `2(AK̃)ᵀ(AK̃α − d) + 2λK̃α`.
    pub fn gradient(&self, targets: &[f64], lambda: f64, alpha: &DVector<f64>) -> DVector<f64> {
        let d = DVector::from_column_slice(targets);
        let ak = &self.a * &self.gram;
        (ak.transpose() * (&ak * alpha - d) + &self.gram * alpha * lambda) * 2.0
    }
}

/// Replays the whole stream, then solves the regularized system once.
pub fn batch_solve_regularized(problem: &BatchProblem) -> Result<(Solved, Replay)> {
    problem.validate()?;
    let mut state = ReplayState::new(problem.spec, problem.delta);
    for u in &problem.inputs {
        state.push(u)?;
    }
    let replay = state.snapshot()?;
    let solved = replay.solve(&problem.targets, problem.lambda)?;
    Ok((solved, replay))
}

/// Solves every prefix of the stream: entry `i` is the batch solution after
/// samples `0..=i`.
pub fn batch_solve_prefixes(problem: &BatchProblem) -> Result<Vec<(Solved, bool)>> {
    problem.validate()?;
    let mut state = ReplayState::new(problem.spec, problem.delta);
    let mut out = Vec::with_capacity(problem.inputs.len());
    for (i, u) in problem.inputs.iter().enumerate() {
        state.push(u)?;
        let replay = state.snapshot()?;
        let solved = replay.solve(&problem.targets[..=i], problem.lambda)?;
        out.push((solved, replay.admitted[i]));
    }
    Ok(out)
}

/// Kernel ridge regression over all inputs: `(K + λI)⁻¹ d`.
pub fn batch_krr(
    inputs: &[Vec<f64>],
    targets: &[f64],
    spec: &KernelSpec,
    lambda: f64,
) -> Result<Solved> {
    if !(lambda > 0.0) {
        return Err(KafError::invalid("lambda", "must be > 0"));
    }
    if inputs.len() != targets.len() {
        return Err(KafError::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let k = gram(spec, inputs)?;
    let n = k.nrows();
    dense_solve(k + DMatrix::identity(n, n) * lambda, &DVector::from_column_slice(targets))
}

/// Ridge least squares `(XᵀX + λI)⁻¹Xᵀd` over explicit feature rows.
pub fn batch_ridge(rows: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<Solved> {
    let p = rows.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let d = DVector::from_column_slice(targets);
    dense_solve(
        x.transpose() * &x + DMatrix::identity(p, p) * lambda,
        &(x.transpose() * d),
    )
}

fn dense_solve(system: DMatrix<f64>, rhs: &DVector<f64>) -> Result<Solved> {
    let sv = system.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let alpha = system
        .lu()
        .solve(rhs)
        .filter(|a| a.iter().all(|x| x.is_finite()))
        .ok_or_else(|| KafError::Singular(format!("condition {condition:.3e}")))?;
    Ok(Solved { alpha, condition })
}

/// Explicit feature map of `(uᵀv + 1)^p` for `p ∈ {1, 2}`:
/// `[1, u]` or `[1, √2uᵢ, uᵢ², √2uᵢuⱼ (i<j)]`.
pub fn polynomial_features(u: &[f64], degree: u32) -> Option<Vec<f64>> {
    let mut f = vec![1.0];
    match degree {
        1 => f.extend_from_slice(u),
        2 => {
            let r2 = std::f64::consts::SQRT_2;
            f.extend(u.iter().map(|x| r2 * x));
            f.extend(u.iter().map(|x| x * x));
            for i in 0..u.len() {
                for j in i + 1..u.len() {
                    f.push(r2 * u[i] * u[j]);
                }
            }
        }
        _ => return None,
    }
    Some(f)
}

/// Plain LMS on explicit polynomial features; returns the a-priori
/// prediction at every step.
pub fn feature_lms_predictions(
    inputs: &[Vec<f64>],
    targets: &[f64],
    degree: u32,
    eta: f64,
) -> Result<Vec<f64>> {
    let mut w: Option<DVector<f64>> = None;
    let mut out = Vec::with_capacity(inputs.len());
    for (u, &d) in inputs.iter().zip(targets) {
        let phi = polynomial_features(u, degree)
            .map(DVector::from_vec)
            .ok_or_else(|| KafError::invalid("degree", "explicit features exist for p <= 2 only"))?;
        let w = w.get_or_insert_with(|| DVector::zeros(phi.len()));
        let y = w.dot(&phi);
        *w += &phi * (eta * (d - y));
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(inputs: Vec<Vec<f64>>, targets: Vec<f64>, lambda: f64, delta: f64) -> BatchProblem {
        BatchProblem {
            inputs,
            targets,
            spec: KernelSpec::gaussian(1.0),
            lambda,
            delta,
        }
    }

    #[test]
    fn single_sample() {
        let (s, r) = batch_solve_regularized(&problem(vec![vec![0.3]], vec![2.0], 1.0, 0.1)).unwrap();
        assert!((s.alpha[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.centers.len(), 1);
    }

    #[test]
    fn duplicate_samples() {
        let p = problem(vec![vec![0.3], vec![0.3]], vec![3.0, 3.0], 1.0, 0.1);
        let (s, r) = batch_solve_regularized(&p).unwrap();
        assert!((s.alpha[0] - 2.0).abs() < 1e-14);
        assert_eq!(r.admitted, vec![true, false]);
    }

    #[test]
    fn zero_threshold_reduces_to_krr() {
        let inputs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.31, (i as f64).sin()]).collect();
        let targets: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).cos()).collect();
        let p = problem(inputs.clone(), targets.clone(), 0.1, 0.0);
        let (s, r) = batch_solve_regularized(&p).unwrap();
        assert_eq!(r.a, DMatrix::identity(20, 20));
        let krr = batch_krr(&inputs, &targets, &p.spec, 0.1).unwrap();
        assert!((s.alpha - krr.alpha).amax() < 1e-10);
    }

    #[test]
    fn krr_bounds() {
        let k = KernelSpec::gaussian(1.0);
        let s = batch_krr(&[vec![0.0]], &[3.0], &k, 0.5).unwrap();
        assert!((s.alpha[0] - 2.0).abs() < 1e-15);
        let inputs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.2]).collect();
        let d: Vec<f64> = (0..10).map(|i| i as f64 - 4.0).collect();
        let dn = DVector::from_column_slice(&d).norm();
        let s = batch_krr(&inputs, &d, &k, 1e4).unwrap();
        assert!(s.alpha.norm() <= dn / 1e4);
        assert!(batch_krr(&inputs, &d, &k, 0.0).is_err());
    }

    #[test]
    fn unregularized_singular_system() {
        // A polynomial p=1 kernel in 1-D has rank-2 Gram matrices, so three
        // forced centers with λ = 0 give a singular system.
        let spec = KernelSpec::polynomial(1);
        let centers = vec![vec![1.0], vec![2.0], vec![3.0]];
        let forced = Replay {
            gram: gram(&spec, &centers).unwrap(),
            centers,
            a: DMatrix::identity(3, 3),
            admitted: vec![true; 3],
        };
        assert!(matches!(
            forced.solve(&[1.0, 2.0, 3.0], 0.0),
            Err(KafError::Singular(_))
        ));
        assert!(forced.solve(&[1.0, 2.0, 3.0], 0.1).is_ok());
    }

    #[test]
    fn normal_equations_and_minimality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let inputs: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|u| (u[0] * u[1]).sin() + u[0]).collect();
        let p = problem(inputs, targets.clone(), 0.1, 0.01);
        let (s, r) = batch_solve_regularized(&p).unwrap();
        assert!(r.admitted.iter().filter(|&&x| !x).count() > 10);

        let atd = (r.a.transpose() * DVector::from_column_slice(&targets)).norm();
        let g = r.gradient(&targets, 0.1, &s.alpha);
        assert!(g.norm() <= 1e-8 * atd, "gradient {}", g.norm());

        let base = r.objective(&targets, 0.1, &s.alpha);
        for _ in 0..20 {
            let dir = DVector::from_fn(s.alpha.len(), |_, _| rng.random_range(-1.0..1.0));
            let pert = &s.alpha + dir.normalize() * 1e-3;
            assert!(base <= r.objective(&targets, 0.1, &pert));
        }

        let gw = r.solve_gram_weighted(&targets, 0.1).unwrap();
        let rel = (&gw.alpha - &s.alpha).norm() / s.alpha.norm();
        assert!(rel < 1e-6, "λI vs λK̃ forms differ by {rel}");
        assert!(s.condition.is_finite() && s.condition >= 1.0);
    }

    #[test]
    fn feature_maps() {
        let u = [0.5, -1.0];
        let v = [2.0, 0.25];
        for p in [1, 2] {
            let fu = polynomial_features(&u, p).unwrap();
            let fv = polynomial_features(&v, p).unwrap();
            let dot: f64 = fu.iter().zip(&fv).map(|(a, b)| a * b).sum();
            let k = KernelSpec::polynomial(p).eval(&u, &v).unwrap();
            assert!((dot - k).abs() < 1e-14);
        }
        assert_eq!(polynomial_features(&u, 2).unwrap().len(), 6);
        assert!(polynomial_features(&u, 3).is_none());
    }

    #[test]
    fn validation() {
        let mut p = problem(vec![vec![0.0], vec![1.0]], vec![1.0], 0.1, 0.1);
        assert!(p.validate().is_err());
        p.targets.push(f64::NAN);
        assert!(p.validate().is_err());
    }
}

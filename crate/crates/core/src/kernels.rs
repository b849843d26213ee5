//! Mercer kernels and the RKHS quantities built from them.
//!
//! Two families are provided:
//!
//! * Gaussian: `κ(u, v) = exp(-‖u − v‖² / σ²)`. Note the denominator is `σ²`,
//!   not the `2σ²` found in many libraries; a width of `σ` here corresponds
//!   to `σ/√2` under that other convention.
//! * Polynomial: `κ(u, v) = (uᵀv + 1)^p`.
//!
//! Inputs are validated (length, finiteness) at the public boundary; the
//! `*_unchecked` variants are for hot loops that have already validated.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KafError, Result};
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Polynomial,
}

/// Kernel family plus hyperparameters.
///
/// Serialized as `{"family": "gaussian"|"polynomial", "sigma": f64, "degree": u32}`.
/// Only the field relevant to `family` is used, but both are always written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_degree")]
    pub degree: u32,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_degree() -> u32 {
    1
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            sigma,
            degree: default_degree(),
        }
    }

    pub fn polynomial(degree: u32) -> Self {
        KernelSpec {
            family: KernelFamily::Polynomial,
            sigma: default_sigma(),
            degree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Gaussian => {
                if !(self.sigma.is_finite() && self.sigma > 0.0) {
                    return Err(KafError::invalid(
                        "kernel.sigma",
                        format!("must be finite and > 0, got {}", self.sigma),
                    ));
                }
            }
            KernelFamily::Polynomial => {
                if self.degree < 1 {
                    return Err(KafError::invalid("kernel.degree", "must be >= 1"));
                }
            }
        }
        Ok(())
    }

    /// κ(u, v) with dimension and finiteness checks.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_same_len(u, v)?;
        check_finite(u, "kernel input")?;
        check_finite(v, "kernel input")?;
        Ok(self.eval_unchecked(u, v))
    }

    /// κ(u, v) for inputs already known to be finite and of equal length.
    #[inline]
    pub fn eval_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self.family {
            KernelFamily::Gaussian => {
                let dist2: f64 = u
                    .iter()
                    .zip(v)
                    .map(|(a, b)| {
                        let t = a - b;
                        t * t
                    })
                    .sum();
                (-dist2 / (self.sigma * self.sigma)).exp()
            }
            KernelFamily::Polynomial => {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                (dot + 1.0).powi(self.degree as i32)
            }
        }
    }

    /// κ(u, u). Constant 1 for the Gaussian family.
    #[inline]
    pub fn self_similarity(&self, u: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => 1.0,
            KernelFamily::Polynomial => self.eval_unchecked(u, u),
        }
    }

    /// Writes `[κ(c₁, u), …, κ(c_K, u)]` into `out`, where `centers` is a flat
    /// row-major block of `K` points of dimension `u.len()`.
    pub fn kernel_vector_into(&self, centers: &[f64], u: &[f64], out: &mut Vec<f64>) {
        let dim = u.len();
        out.clear();
        if dim == 0 {
            return;
        }
        out.extend(centers.chunks_exact(dim).map(|c| self.eval_unchecked(c, u)));
    }
}

/// Gram matrix `[κ(xᵢ, xⱼ)]` of a nonempty point set with uniform dimension.
pub fn gram<P: AsRef<[f64]> + Sync>(spec: &KernelSpec, points: &[P]) -> Result<DMatrix<f64>> {
    gram_with(ExecMode::Parallel, spec, points)
}

/// [`gram`] with an explicit execution mode; rows are computed independently.
pub fn gram_with<P: AsRef<[f64]> + Sync>(
    mode: ExecMode,
    spec: &KernelSpec,
    points: &[P],
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let first = points
        .first()
        .ok_or_else(|| KafError::invalid("points", "gram of an empty point set"))?;
    let dim = first.as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(KafError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        check_finite(p, "gram point")?;
    }
    let n = points.len();
    let rows: Vec<Vec<f64>> = par::map_range_with(mode, n, |i| {
        let pi = points[i].as_ref();
        (0..n)
            .map(|j| spec.eval_unchecked(pi, points[j].as_ref()))
            .collect()
    });
    Ok(DMatrix::from_fn(n, n, |i, j| {
        // Mirror the upper triangle so the result is exactly symmetric.
        if i <= j {
            rows[i][j]
        } else {
            rows[j][i]
        }
    }))
}

/// A function `f(·) = Σᵢ aᵢ κ(cᵢ, ·)` in the RKHS, held by reference.
#[derive(Debug, Clone, Copy)]
pub struct Expansion<'a, P> {
    pub coeffs: &'a [f64],
    pub centers: &'a [P],
}

impl<'a, P: AsRef<[f64]>> Expansion<'a, P> {
    pub fn new(coeffs: &'a [f64], centers: &'a [P]) -> Result<Self> {
        if coeffs.len() != centers.len() {
            return Err(KafError::DimensionMismatch {
                expected: centers.len(),
                got: coeffs.len(),
            });
        }
        Ok(Expansion { coeffs, centers })
    }

    /// Evaluates `f(u)`.
    pub fn eval(&self, spec: &KernelSpec, u: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (a, c) in self.coeffs.iter().zip(self.centers) {
            acc += a * spec.eval(c.as_ref(), u)?;
        }
        Ok(acc)
    }
}

/// `⟨h, g⟩_H = Σᵢⱼ aᵢ bⱼ κ(cᵢ, c̃ⱼ)`.
pub fn expansion_inner_product<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    spec: &KernelSpec,
    h: &Expansion<'_, P>,
    g: &Expansion<'_, Q>,
) -> Result<f64> {
    if h.coeffs.len() != h.centers.len() {
        return Err(KafError::DimensionMismatch {
            expected: h.centers.len(),
            got: h.coeffs.len(),
        });
    }
    if g.coeffs.len() != g.centers.len() {
        return Err(KafError::DimensionMismatch {
            expected: g.centers.len(),
            got: g.coeffs.len(),
        });
    }
    let mut acc = 0.0;
    for (a, c) in h.coeffs.iter().zip(h.centers) {
        for (b, ct) in g.coeffs.iter().zip(g.centers) {
            acc += a * b * spec.eval(c.as_ref(), ct.as_ref())?;
        }
    }
    Ok(acc)
}

pub(crate) fn check_same_len(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(KafError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(u: &[f64], what: &'static str) -> Result<()> {
    if u.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(KafError::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn gaussian_self_is_one() {
        let k = KernelSpec::gaussian(1.0);
        assert_eq!(k.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_distance() {
        let k = KernelSpec::gaussian(1.0);
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((v - 1.0 / E).abs() < 1e-15);
    }

    #[test]
    fn polynomial_square() {
        let k = KernelSpec::polynomial(2);
        assert_eq!(k.eval(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 4.0);
    }

    #[test]
    fn eval_rejects_bad_input() {
        let k = KernelSpec::gaussian(1.0);
        assert!(matches!(
            k.eval(&[0.0, 1.0], &[1.0]),
            Err(KafError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            k.eval(&[f64::NAN], &[1.0]),
            Err(KafError::NonFinite(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::gaussian(0.0).validate().is_err());
        assert!(KernelSpec::gaussian(-1.0).validate().is_err());
        assert!(KernelSpec::polynomial(0).validate().is_err());
        assert!(KernelSpec::polynomial(3).validate().is_ok());
    }

    #[test]
    fn spec_json_shape() {
        let s = serde_json::to_string(&KernelSpec::gaussian(0.5)).unwrap();
        assert_eq!(s, r#"{"family":"gaussian","sigma":0.5,"degree":1}"#);
        let back: KernelSpec = serde_json::from_str(r#"{"family":"polynomial","degree":2}"#).unwrap();
        assert_eq!(back, KernelSpec::polynomial(2));
    }

    #[test]
    fn gram_examples() {
        let g = gram(&KernelSpec::gaussian(1.0), &[vec![0.4, 0.1]]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);

        let g = gram(&KernelSpec::gaussian(1.0), &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(0, 1)] - 1.0 / E).abs() < 1e-15);
        assert_eq!(g[(0, 1)], g[(1, 0)]);

        // (1·1+1)=2, (1·3+1)=4, (3·3+1)=10
        let g = gram(&KernelSpec::polynomial(1), &[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 4.0, 10.0]));
    }

    #[test]
    fn gram_rejects_empty_and_ragged() {
        let k = KernelSpec::gaussian(1.0);
        let empty: Vec<Vec<f64>> = vec![];
        assert!(gram(&k, &empty).is_err());
        assert!(matches!(
            gram(&k, &[vec![0.0], vec![1.0, 2.0]]),
            Err(KafError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inner_product_examples() {
        let k = KernelSpec::gaussian(1.0);
        let c0 = [vec![0.0]];
        let c1 = [vec![1.0]];
        let one = [1.0];
        let two = [2.0];
        let h = Expansion::new(&one, &c0).unwrap();
        assert_eq!(expansion_inner_product(&k, &h, &h).unwrap(), 1.0);

        let h = Expansion::new(&two, &c0).unwrap();
        let g = Expansion::new(&one, &c1).unwrap();
        let v = expansion_inner_product(&k, &h, &g).unwrap();
        assert!((v - 2.0 / E).abs() < 1e-15);
    }

    #[test]
    fn inner_product_count_mismatch() {
        let c = [vec![0.0], vec![1.0]];
        assert!(Expansion::new(&[1.0], &c).is_err());
    }

    // Explicit feature map of (uᵀv + 1)^p for p ∈ {1, 2}.
    fn poly_features(u: &[f64], p: u32) -> Vec<f64> {
        let mut f = vec![1.0];
        match p {
            1 => f.extend_from_slice(u),
            2 => {
                let r2 = 2f64.sqrt();
                f.extend(u.iter().map(|x| r2 * x));
                f.extend(u.iter().map(|x| x * x));
                for i in 0..u.len() {
                    for j in i + 1..u.len() {
                        f.push(r2 * u[i] * u[j]);
                    }
                }
            }
            _ => unreachable!(),
        }
        f
    }

    fn vec_strategy(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=max_dim).prop_flat_map(|d| {
            (
                prop::collection::vec(-3.0..3.0f64, d),
                prop::collection::vec(-3.0..3.0f64, d),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric((u, v) in vec_strategy(5), sigma in 0.1..5.0f64, p in 1u32..4) {
            let g = KernelSpec::gaussian(sigma);
            prop_assert_eq!(g.eval(&u, &v).unwrap(), g.eval(&v, &u).unwrap());
            let k = KernelSpec::polynomial(p);
            prop_assert_eq!(k.eval(&u, &v).unwrap(), k.eval(&v, &u).unwrap());
        }

        #[test]
        fn kernel_trick_matches_features((u, v) in vec_strategy(3), p in 1u32..=2) {
            let k = KernelSpec::polynomial(p);
            let fu = poly_features(&u, p);
            let fv = poly_features(&v, p);
            let dot: f64 = fu.iter().zip(&fv).map(|(a, b)| a * b).sum();
            let kv = k.eval(&u, &v).unwrap();
            prop_assert!((kv - dot).abs() <= 1e-12 * kv.abs().max(1.0));
        }

        #[test]
        fn gaussian_range((u, v) in vec_strategy(4), sigma in 0.1..5.0f64) {
            let k = KernelSpec::gaussian(sigma).eval(&u, &v).unwrap();
            prop_assert!(k <= 1.0);
            prop_assert!(k >= 0.0);
            if u == v {
                prop_assert_eq!(k, 1.0);
            }
        }

        #[test]
        fn gram_psd(
            pts in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 1..30),
            sigma in 0.2..3.0f64,
        ) {
            let g = gram(&KernelSpec::gaussian(sigma), &pts).unwrap();
            let n = pts.len() as f64;
            let min = g.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-10 * n, "min eigenvalue {}", min);
        }

        #[test]
        fn inner_product_properties(
            a in prop::collection::vec(-2.0..2.0f64, 3),
            b in prop::collection::vec(-2.0..2.0f64, 4),
            w in prop::collection::vec(-2.0..2.0f64, 2),
            ca in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 3),
            cb in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 4),
            cw in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 2),
            c in -3.0..3.0f64,
            d in -3.0..3.0f64,
        ) {
            let k = KernelSpec::gaussian(1.0);
            let f = Expansion::new(&a, &ca).unwrap();
            let g = Expansion::new(&b, &cb).unwrap();
            let h = Expansion::new(&w, &cw).unwrap();

            let fg = expansion_inner_product(&k, &f, &g).unwrap();
            let gf = expansion_inner_product(&k, &g, &f).unwrap();
            prop_assert!((fg - gf).abs() <= 1e-12);

            // c·f + d·g as one expansion over the concatenated centers.
            let mut coeffs: Vec<f64> = a.iter().map(|x| c * x).collect();
            coeffs.extend(b.iter().map(|x| d * x));
            let mut centers = ca.clone();
            centers.extend(cb.iter().cloned());
            let comb = Expansion::new(&coeffs, &centers).unwrap();
            let lhs = expansion_inner_product(&k, &comb, &h).unwrap();
            let rhs = c * expansion_inner_product(&k, &f, &h).unwrap()
                + d * expansion_inner_product(&k, &g, &h).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);

            prop_assert!(expansion_inner_product(&k, &f, &f).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn inner_product_matches_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = KernelSpec::gaussian(0.8);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ca: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let cb: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                let d2: f64 = (0..2).map(|t| (ca[i][t] - cb[j][t]).powi(2)).sum();
                brute += a[i] * b[j] * (-d2 / 0.64).exp();
            }
        }
        let h = Expansion::new(&a, &ca).unwrap();
        let g = Expansion::new(&b, &cb).unwrap();
        let v = expansion_inner_product(&k, &h, &g).unwrap();
        assert!((v - brute).abs() < 1e-14);
    }
}

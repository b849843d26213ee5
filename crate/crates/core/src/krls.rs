//! Regularized kernel RLS with ALD sparsification.
//!
//! The filter keeps the coefficient vector `α̃` over the dictionary centers
//! and `P = [M K̃ + λI]⁻¹`, where `M = AᵀA` accumulates the ALD coefficient
//! rows of every processed sample. `A` itself is never stored.
//!
//! Each step predicts with the current `α̃`, runs the ALD test and then takes
//! one of two branches:
//!
//! * **unchanged** (`d₂ ≤ δ`): with `s = K̃a`,
//!   ```text
//!   q  = P a / (1 + sᵀ P a)
//!   α̃ ← α̃ + q (d − sᵀα̃)
//!   P  ← P − q (sᵀ P)
//!   M  ← M + a aᵀ
//!   ```
//! * **grow** (`d₂ > δ`): with `z_A = P M h`, `z = Pᵀ h`,
//!   `γ = λ + κ(u,u) − hᵀ z_A` and `e = d − hᵀα̃`,
//!   ```text
//!   α̃ ← [α̃ − z_A e/γ ; e/γ]
//!   P  ← (1/γ) [[γP + z_A zᵀ, −z_A], [−zᵀ, 1]]
//!   M  ← blockdiag(M, 1)
//!   ```
//!
//! All fallible checks run before any mutation, so a failed step leaves the
//! filter exactly as it was.

use serde::{Deserialize, Serialize};

use crate::dictionary::{check_delta, AldResult, Dictionary};
use crate::error::{KafError, Result};
use crate::filter::{default_delta, default_kernel, default_lambda, OnlineFilter, StepOutput};
use crate::kernels::{check_finite, KernelSpec};
use crate::matrix::{axpy, dot, identity_residual, GrowMatrix};
use crate::snapshot::{KrlsSnapshot, ModelSnapshot};

/// Floor on `|1 + sᵀPa|` and `|γ|` for the regularized filter.
pub const DEGENERACY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrlsConfig {
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// ALD threshold compared directly against `d₂`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Permits `λ = 0` and relaxes the degeneracy floors to exact zero.
    #[serde(default)]
    pub unregularized: bool,
}

impl Default for KrlsConfig {
    fn default() -> Self {
        KrlsConfig {
            kernel: default_kernel(),
            lambda: default_lambda(),
            delta: default_delta(),
            unregularized: false,
        }
    }
}

impl KrlsConfig {
    pub fn new(kernel: KernelSpec, lambda: f64, delta: f64) -> Self {
        KrlsConfig {
            kernel,
            lambda,
            delta,
            unregularized: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let ok = if self.unregularized {
            self.lambda.is_finite() && self.lambda >= 0.0
        } else {
            self.lambda.is_finite() && self.lambda > 0.0
        };
        if !ok {
            let need = if self.unregularized { ">= 0" } else { "> 0" };
            return Err(KafError::invalid(
                "lambda",
                format!("must be finite and {need}, got {}", self.lambda),
            ));
        }
        check_delta(self.delta)
    }

    fn floor(&self) -> f64 {
        if self.unregularized {
            0.0
        } else {
            DEGENERACY_FLOOR
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegKrls {
    cfg: KrlsConfig,
    dict: Dictionary,
    alpha: Vec<f64>,
    p: GrowMatrix,
    m: GrowMatrix,
    n: usize,
    grown: usize,
    unchanged: usize,
}

impl RegKrls {
    /// Initializes from the first sample: `C = {u₁}`, `M = [1]`,
    /// `P = [1/(κ₁₁+λ)]`, `α̃ = [d₁/(κ₁₁+λ)]`.
    pub fn new(cfg: KrlsConfig, u: &[f64], d: f64) -> Result<Self> {
        cfg.validate()?;
        check_target(d)?;
        let dict = Dictionary::new(cfg.kernel, u)?;
        let k11 = dict.gram().get(0, 0);
        let denom = k11 + cfg.lambda;
        if !(denom.abs() > cfg.floor()) {
            return Err(KafError::Degenerate {
                what: "κ₁₁ + λ",
                value: denom,
            });
        }
        Ok(RegKrls {
            cfg,
            dict,
            alpha: vec![d / denom],
            p: GrowMatrix::from_scalar(1.0 / denom),
            m: GrowMatrix::from_scalar(1.0),
            n: 1,
            grown: 0,
            unchanged: 0,
        })
    }

    /// Restores a filter from all of its parts. Dimensions must agree.
    pub fn from_parts(
        cfg: KrlsConfig,
        dict: Dictionary,
        alpha: Vec<f64>,
        p: GrowMatrix,
        m: GrowMatrix,
        n: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let k = dict.len();
        for got in [alpha.len(), p.dim(), m.dim()] {
            if got != k {
                return Err(KafError::DimensionMismatch { expected: k, got });
            }
        }
        Ok(RegKrls {
            cfg,
            dict,
            alpha,
            p,
            m,
            n,
            grown: 0,
            unchanged: 0,
        })
    }

    pub fn config(&self) -> &KrlsConfig {
        &self.cfg
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn p(&self) -> &GrowMatrix {
        &self.p
    }

    pub fn m(&self) -> &GrowMatrix {
        &self.m
    }

    /// Samples processed so far.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Counts of (grow, unchanged) branches taken since construction.
    pub fn branch_counts(&self) -> (usize, usize) {
        (self.grown, self.unchanged)
    }

    /// Predict-then-update on one sample.
    pub fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput> {
        self.dict.check_input(u)?;
        check_target(d)?;
        let h = self.dict.kernel_vector(u);
        let y = dot(&h, &self.alpha);
        let ald = self.dict.ald_unchecked(u, h, self.cfg.delta)?;
        let grew = ald.admitted;
        if grew {
            self.grow_checked(u, d, &ald)?;
        } else {
            self.unchanged_checked(d, &ald)?;
        }
        Ok(StepOutput::new(y, d, grew, self.dict.len()))
    }

    /// Dictionary-unchanged update for a sample whose ALD test failed admission.
    pub fn update_unchanged(&mut self, u: &[f64], d: f64, ald: &AldResult) -> Result<()> {
        self.dict.check_input(u)?;
        check_target(d)?;
        if ald.admitted {
            return Err(KafError::invalid(
                "ald",
                "unchanged update requires a non-admitted sample",
            ));
        }
        self.check_ald_len(ald)?;
        self.unchanged_checked(d, ald)
    }

    /// Dictionary-growth update for a sample whose ALD test admitted it.
    pub fn update_grow(&mut self, u: &[f64], d: f64, ald: &AldResult) -> Result<()> {
        self.dict.check_input(u)?;
        check_target(d)?;
        self.check_ald_len(ald)?;
        self.grow_checked(u, d, ald)
    }

    fn check_ald_len(&self, ald: &AldResult) -> Result<()> {
        let k = self.dict.len();
        if ald.a.len() != k || ald.h.len() != k {
            return Err(KafError::DimensionMismatch {
                expected: k,
                got: ald.a.len(),
            });
        }
        Ok(())
    }

    fn unchanged_checked(&mut self, d: f64, ald: &AldResult) -> Result<()> {
        let a = &ald.a;
        let mut s = Vec::with_capacity(a.len());
        self.dict.gram().mul_vec(a, &mut s);
        let mut pa = Vec::with_capacity(a.len());
        self.p.mul_vec(a, &mut pa);
        let denom = 1.0 + dot(&s, &pa);
        if !denom.is_finite() || !(denom.abs() > self.cfg.floor()) {
            return Err(KafError::Degenerate {
                what: "1 + sᵀPa",
                value: denom,
            });
        }
        let innovation = d - dot(&s, &self.alpha);
        let q: Vec<f64> = pa.iter().map(|x| x / denom).collect();
        let mut sp = Vec::with_capacity(a.len());
        self.p.tr_mul_vec(&s, &mut sp);

        axpy(innovation, &q, &mut self.alpha);
        self.p.rank_one_update(-1.0, &q, &sp);
        self.m.rank_one_update(1.0, a, a);
        self.n += 1;
        self.unchanged += 1;
        Ok(())
    }

    fn grow_checked(&mut self, u: &[f64], d: f64, ald: &AldResult) -> Result<()> {
        self.dict.check_growth(ald)?;
        let h = &ald.h;
        let mut mh = Vec::with_capacity(h.len());
        self.m.mul_vec(h, &mut mh);
        let mut z_a = Vec::with_capacity(h.len());
        self.p.mul_vec(&mh, &mut z_a);
        let gamma = self.cfg.lambda + ald.kuu - dot(h, &z_a);
        if !gamma.is_finite() || !(gamma.abs() > self.cfg.floor()) {
            return Err(KafError::Degenerate {
                what: "γ",
                value: gamma,
            });
        }
        let mut z = Vec::with_capacity(h.len());
        self.p.tr_mul_vec(h, &mut z);
        let e = d - dot(h, &self.alpha);
        let inv_gamma = 1.0 / gamma;

        axpy(-e * inv_gamma, &z_a, &mut self.alpha);
        self.alpha.push(e * inv_gamma);

        self.p.rank_one_update(inv_gamma, &z_a, &z);
        let col: Vec<f64> = z_a.iter().map(|x| -x * inv_gamma).collect();
        let row: Vec<f64> = z.iter().map(|x| -x * inv_gamma).collect();
        self.p.push_border(&col, &row, inv_gamma);

        let zeros = vec![0.0; h.len()];
        self.m.push_border(&zeros, &zeros, 1.0);

        self.dict.grow_unchecked(u, ald);
        self.n += 1;
        self.grown += 1;
        Ok(())
    }

    /// `Σᵢ α̃ᵢ κ(cᵢ, u)`.
    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        self.dict.check_input(u)?;
        Ok(dot(&self.dict.kernel_vector(u), &self.alpha))
    }

    /// `‖P (M K̃ + λI) − I‖∞`. O(K³); meant for verification.
    pub fn p_residual(&self) -> f64 {
        let k = self.dict.len();
        let gram = self.dict.gram();
        let mut b = GrowMatrix::identity(k);
        for i in 0..k {
            let mut row = vec![0.0; k];
            for (j, &mij) in self.m.row(i).iter().enumerate() {
                if mij != 0.0 {
                    axpy(mij, gram.row(j), &mut row);
                }
            }
            row[i] += self.cfg.lambda;
            b.row_mut(i).copy_from_slice(&row);
        }
        identity_residual(&self.p, &b)
    }

    /// Snapshot; `resume_exact` embeds `P` and `M`.
    pub fn to_snapshot(&self, resume_exact: bool) -> KrlsSnapshot {
        KrlsSnapshot {
            kernel: self.cfg.kernel,
            lambda: self.cfg.lambda,
            delta: self.cfg.delta,
            unregularized: self.cfg.unregularized,
            centers: self.dict.centers_vec(),
            centers_checksum: self.dict.centers_checksum(),
            alpha: self.alpha.clone(),
            n: self.n,
            resume_exact,
            p: resume_exact.then(|| self.p.to_rows()),
            m: resume_exact.then(|| self.m.to_rows()),
        }
    }
}

impl OnlineFilter for RegKrls {
    fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput> {
        RegKrls::step(self, u, d)
    }

    fn predict(&self, u: &[f64]) -> Result<f64> {
        RegKrls::predict(self, u)
    }

    fn size(&self) -> usize {
        self.dict.len()
    }

    fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot::Krls(self.to_snapshot(true))
    }
}

fn check_target(d: f64) -> Result<()> {
    check_finite(&[d], "target")
}

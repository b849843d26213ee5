//! Linear LMS and RLS baselines.
//!
//! Both produce `y = ωᵀx` from the pre-update weights and adapt on
//! `e = d − y`. With `affine` set, `x = [u; 1]` so the filter learns an
//! intercept; otherwise `x = u`.
//!
//! RLS starts from `Q = (1/λ)I` with no forgetting, which makes its weights
//! the ridge solution `(XᵀX + λI)⁻¹Xᵀd` after every step.

use crate::error::{KafError, Result};
use crate::filter::{OnlineFilter, StepOutput};
use crate::kernels::check_finite;
use crate::matrix::{axpy, dot, GrowMatrix};
use crate::snapshot::{LinearSnapshot, ModelSnapshot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearConfig {
    Lms { eta: f64, affine: bool },
    Rls { lambda: f64, affine: bool },
}

impl LinearConfig {
    pub fn affine(&self) -> bool {
        match *self {
            LinearConfig::Lms { affine, .. } | LinearConfig::Rls { affine, .. } => affine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            // η = 0 is a frozen filter, which is allowed.
            LinearConfig::Lms { eta, .. } if !(eta.is_finite() && eta >= 0.0) => Err(
                KafError::invalid("eta", format!("must be finite and >= 0, got {eta}")),
            ),
            LinearConfig::Rls { lambda, .. } if !(lambda.is_finite() && lambda > 0.0) => Err(
                KafError::invalid("lambda", format!("must be finite and > 0, got {lambda}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearFilter {
    cfg: LinearConfig,
    input_dim: usize,
    weights: Vec<f64>,
    /// Inverse correlation matrix (RLS only).
    aux: Option<GrowMatrix>,
    x: Vec<f64>,
}

impl LinearFilter {
    pub fn new(cfg: LinearConfig, input_dim: usize) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(KafError::invalid("input", "input dimension must be >= 1"));
        }
        let n = input_dim + usize::from(cfg.affine());
        let aux = match cfg {
            LinearConfig::Rls { lambda, .. } => {
                let mut q = GrowMatrix::identity(n);
                for i in 0..n {
                    q.set(i, i, 1.0 / lambda);
                }
                Some(q)
            }
            LinearConfig::Lms { .. } => None,
        };
        Ok(LinearFilter {
            cfg,
            input_dim,
            weights: vec![0.0; n],
            aux,
            x: Vec::with_capacity(n),
        })
    }

    pub fn config(&self) -> &LinearConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn aux(&self) -> Option<&GrowMatrix> {
        self.aux.as_ref()
    }

    fn load_features(&mut self, u: &[f64]) -> Result<()> {
        if u.len() != self.input_dim {
            return Err(KafError::DimensionMismatch {
                expected: self.input_dim,
                got: u.len(),
            });
        }
        check_finite(u, "input")?;
        self.x.clear();
        self.x.extend_from_slice(u);
        if self.cfg.affine() {
            self.x.push(1.0);
        }
        Ok(())
    }

    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.input_dim {
            return Err(KafError::DimensionMismatch {
                expected: self.input_dim,
                got: u.len(),
            });
        }
        check_finite(u, "input")?;
        let mut y = dot(&self.weights[..self.input_dim], u);
        if self.cfg.affine() {
            y += self.weights[self.input_dim];
        }
        Ok(y)
    }

    pub fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput> {
        check_finite(&[d], "target")?;
        self.load_features(u)?;
        let y = dot(&self.weights, &self.x);
        let out = StepOutput::new(y, d, false, 0);
        match self.cfg {
            LinearConfig::Lms { eta, .. } => {
                axpy(eta * out.e, &self.x, &mut self.weights);
            }
            LinearConfig::Rls { .. } => {
                let q = self.aux.as_mut().expect("rls state");
                let mut qx = Vec::with_capacity(self.x.len());
                q.mul_vec(&self.x, &mut qx);
                let denom = 1.0 + dot(&self.x, &qx);
                let gain: Vec<f64> = qx.iter().map(|v| v / denom).collect();
                axpy(out.e, &gain, &mut self.weights);
                q.rank_one_update(-1.0, &gain, &qx);
            }
        }
        Ok(out)
    }

    pub fn to_snapshot(&self) -> LinearSnapshot {
        let (eta, lambda) = match self.cfg {
            LinearConfig::Lms { eta, .. } => (Some(eta), None),
            LinearConfig::Rls { lambda, .. } => (None, Some(lambda)),
        };
        LinearSnapshot {
            weights: self.weights.clone(),
            affine: self.cfg.affine(),
            eta,
            lambda,
            aux: self.aux.as_ref().map(GrowMatrix::to_rows),
        }
    }

    /// Restores from a snapshot; RLS requires the stored `aux` matrix.
    pub fn from_snapshot(cfg: LinearConfig, snap: &LinearSnapshot) -> Result<Self> {
        let n = snap.weights.len();
        let input_dim = n
            .checked_sub(usize::from(cfg.affine()))
            .filter(|&d| d > 0)
            .ok_or_else(|| KafError::Snapshot("weights vector too short".into()))?;
        let mut f = LinearFilter::new(cfg, input_dim)?;
        f.weights.copy_from_slice(&snap.weights);
        if let LinearConfig::Rls { .. } = cfg {
            let rows = snap
                .aux
                .as_ref()
                .ok_or_else(|| KafError::Snapshot("rls snapshot without `aux`".into()))?;
            let q = GrowMatrix::from_rows(rows)
                .filter(|q| q.dim() == n)
                .ok_or_else(|| KafError::Snapshot("`aux` must be square with weights' size".into()))?;
            f.aux = Some(q);
        }
        Ok(f)
    }
}

impl OnlineFilter for LinearFilter {
    fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput> {
        LinearFilter::step(self, u, d)
    }

    fn predict(&self, u: &[f64]) -> Result<f64> {
        LinearFilter::predict(self, u)
    }

    fn size(&self) -> usize {
        0
    }

    fn snapshot(&self) -> ModelSnapshot {
        match self.cfg {
            LinearConfig::Lms { .. } => ModelSnapshot::Lms(self.to_snapshot()),
            LinearConfig::Rls { .. } => ModelSnapshot::Rls(self.to_snapshot()),
        }
    }
}

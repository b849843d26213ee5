//! Kernel least-mean-square filter.
//!
//! Every sample becomes a unit of a growing RBF network with coefficient
//! `η·e(n)`, so the model after `n` steps is `Σᵢ η e(i) κ(u(i), ·)`. The first
//! prediction is zero (the weight starts at zero), hence `e(1) = d(1)`.

use serde::{Deserialize, Serialize};

use crate::error::{KafError, Result};
use crate::filter::{default_eta, default_kernel, OnlineFilter, StepOutput};
use crate::kernels::{check_finite, KernelSpec};
use crate::snapshot::{KlmsSnapshot, ModelSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlmsConfig {
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Hard cap on the number of network units. `None` means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_centers: Option<usize>,
}

impl Default for KlmsConfig {
    fn default() -> Self {
        KlmsConfig {
            kernel: default_kernel(),
            eta: default_eta(),
            max_centers: None,
        }
    }
}

impl KlmsConfig {
    pub fn new(kernel: KernelSpec, eta: f64) -> Self {
        KlmsConfig {
            kernel,
            eta,
            max_centers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(KafError::invalid(
                "eta",
                format!("must be finite and > 0, got {}", self.eta),
            ));
        }
        if self.max_centers == Some(0) {
            return Err(KafError::invalid("max_centers", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Klms {
    cfg: KlmsConfig,
    dim: usize,
    centers: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Klms {
    pub fn new(cfg: KlmsConfig, u: &[f64], d: f64) -> Result<Self> {
        cfg.validate()?;
        if u.is_empty() {
            return Err(KafError::invalid("input", "input dimension must be >= 1"));
        }
        check_finite(u, "input")?;
        check_finite(&[d], "target")?;
        Ok(Klms {
            cfg,
            dim: u.len(),
            centers: u.to_vec(),
            coeffs: vec![cfg.eta * d],
        })
    }

    /// Restores a network from its centers and pre-multiplied coefficients.
    pub fn from_parts(cfg: KlmsConfig, centers: &[Vec<f64>], coeffs: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if centers.len() != coeffs.len() {
            return Err(KafError::DimensionMismatch {
                expected: centers.len(),
                got: coeffs.len(),
            });
        }
        let dim = centers
            .first()
            .map(Vec::len)
            .filter(|&d| d > 0)
            .ok_or_else(|| KafError::invalid("centers", "at least one nonempty center is required"))?;
        let mut flat = Vec::with_capacity(dim * centers.len());
        for c in centers {
            if c.len() != dim {
                return Err(KafError::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            check_finite(c, "center")?;
            flat.extend_from_slice(c);
        }
        check_finite(&coeffs, "coefficient")?;
        Ok(Klms {
            cfg,
            dim,
            centers: flat,
            coeffs,
        })
    }

    pub fn config(&self) -> &KlmsConfig {
        &self.cfg
    }

    /// Steps processed, equal to the number of network units.
    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// The recorded a-priori errors `e(i) = coeffs[i] / η`.
    pub fn errors(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c / self.cfg.eta).collect()
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim)
    }

    fn check_input(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(KafError::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        check_finite(u, "input")
    }

    fn predict_unchecked(&self, u: &[f64]) -> f64 {
        let k = &self.cfg.kernel;
        self.centers
            .chunks_exact(self.dim)
            .zip(&self.coeffs)
            .map(|(c, a)| a * k.eval_unchecked(c, u))
            .sum()
    }

    pub fn predict(&self, u: &[f64]) -> Result<f64> {
        self.check_input(u)?;
        Ok(self.predict_unchecked(u))
    }

    pub fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput> {
        self.check_input(u)?;
        check_finite(&[d], "target")?;
        if let Some(cap) = self.cfg.max_centers {
            if self.coeffs.len() >= cap {
                return Err(KafError::CapacityExceeded { cap });
            }
        }
        let y = self.predict_unchecked(u);
        let out = StepOutput::new(y, d, true, self.coeffs.len() + 1);
        self.centers.extend_from_slice(u);
        self.coeffs.push(self.cfg.eta * out.e);
        Ok(out)
    }

    pub fn to_snapshot(&self) -> KlmsSnapshot {
        KlmsSnapshot {
            kernel: self.cfg.kernel,
            eta: self.cfg.eta,
            centers: self.centers().map(<[f64]>::to_vec).collect(),
            coeffs: self.coeffs.clone(),
        }
    }
}

impl OnlineFilter for Klms {
    fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput> {
        Klms::step(self, u, d)
    }

    fn predict(&self, u: &[f64]) -> Result<f64> {
        Klms::predict(self, u)
    }

    fn size(&self) -> usize {
        self.coeffs.len()
    }

    fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot::Klms(self.to_snapshot())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(eta: f64) -> KlmsConfig {
        KlmsConfig::new(KernelSpec::gaussian(1.0), eta)
    }

    #[test]
    fn init_examples() {
        let f = Klms::new(gauss(0.2), &[1.0, 2.0], 0.0).unwrap();
        assert_eq!(f.coeffs(), &[0.0]);
        let f = Klms::new(gauss(0.5), &[3.0], 1.0).unwrap();
        assert_eq!(f.coeffs(), &[0.5]);
        assert_eq!(f.n(), 1);
        assert_eq!(f.centers().count(), 1);
        assert!(Klms::new(gauss(0.0), &[3.0], 1.0).is_err());
        assert_eq!(
            Klms::new(gauss(-1.0), &[3.0], 1.0).unwrap_err().field(),
            Some("eta")
        );
    }

    #[test]
    fn hand_executed_second_step() {
        let mut f = Klms::new(gauss(0.5), &[0.0], 1.0).unwrap();
        let out = f.step(&[0.0], 1.0).unwrap();
        assert_eq!(out.y, 0.5);
        assert_eq!(out.e, 0.5);
        assert_eq!(f.coeffs(), &[0.5, 0.25]);
        assert_eq!(f.errors(), vec![1.0, 0.5]);
    }

    #[test]
    fn far_input_sees_no_prediction() {
        let mut f = Klms::new(gauss(0.5), &[0.0], 1.0).unwrap();
        let out = f.step(&[100.0], 2.0).unwrap();
        assert_eq!(out.y, 0.0);
        assert_eq!(out.e, 2.0);
    }

    #[test]
    fn predict_examples() {
        let f = Klms::new(gauss(0.5), &[0.0], 1.0).unwrap();
        let y = f.predict(&[1.0]).unwrap();
        assert!((y - 0.5 * (-1.0f64).exp()).abs() < 1e-16);
        let z = Klms::new(gauss(0.5), &[0.0], 0.0).unwrap();
        assert_eq!(z.predict(&[0.3]).unwrap(), 0.0);
        assert!(f.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn growth_is_linear_and_capped() {
        let mut cfg = gauss(0.1);
        cfg.max_centers = Some(10);
        let mut f = Klms::new(cfg, &[0.0], 1.0).unwrap();
        for i in 1..10 {
            let out = f.step(&[i as f64 * 0.1], 0.5).unwrap();
            assert!(out.grew);
            assert_eq!(out.dict_size, i + 1);
            assert_eq!(f.n(), i + 1);
        }
        let before = f.coeffs().to_vec();
        assert!(matches!(
            f.step(&[2.0], 0.5),
            Err(KafError::CapacityExceeded { cap: 10 })
        ));
        assert_eq!(f.coeffs(), before.as_slice());
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut f = Klms::new(gauss(0.3), &[0.1, 0.2], 0.4).unwrap();
            for i in 0..50 {
                let x = i as f64 * 0.37;
                f.step(&[x.sin(), x.cos()], (2.0 * x).sin()).unwrap();
            }
            f.coeffs().iter().map(|c| c.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}

//! Common interface over all online filters and their JSON configuration.

use serde::{Deserialize, Serialize};

use crate::error::{KafError, Result};
use crate::kernels::KernelSpec;
use crate::klms::{Klms, KlmsConfig};
use crate::krls::{KrlsConfig, RegKrls};
use crate::linear::{LinearConfig, LinearFilter};
use crate::snapshot::ModelSnapshot;

/// What one iteration of a filter reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    /// A-priori prediction for the current input.
    pub y: f64,
    /// `d − y`.
    pub e: f64,
    /// Whether the expansion gained a term this step.
    pub grew: bool,
    /// Network size after the step (0 for linear filters).
    pub dict_size: usize,
    /// Wall time of the step; filled in by the harness when timing is on.
    pub step_seconds: f64,
}

impl StepOutput {
    pub(crate) fn new(y: f64, d: f64, grew: bool, dict_size: usize) -> Self {
        StepOutput {
            y,
            e: d - y,
            grew,
            dict_size,
            step_seconds: 0.0,
        }
    }
}

pub trait OnlineFilter: Send {
    /// Predicts `u`, then adapts on `(u, d)`. On error the filter is unchanged.
    fn step(&mut self, u: &[f64], d: f64) -> Result<StepOutput>;

    fn predict(&self, u: &[f64]) -> Result<f64>;

    /// Number of expansion terms (dictionary size or network size).
    fn size(&self) -> usize;

    fn snapshot(&self) -> ModelSnapshot;
}

pub(crate) fn default_kernel() -> KernelSpec {
    KernelSpec::gaussian(1.0)
}
pub(crate) fn default_eta() -> f64 {
    0.2
}
pub(crate) fn default_lambda() -> f64 {
    0.1
}
pub(crate) fn default_delta() -> f64 {
    0.01
}

/// Filter selection and hyperparameters, tagged by `"algorithm"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum FilterConfig {
    #[serde(rename = "krls-ald-reg")]
    Krls(KrlsConfig),
    #[serde(rename = "klms")]
    Klms(KlmsConfig),
    #[serde(rename = "lms")]
    Lms {
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default = "default_true")]
        affine: bool,
    },
    #[serde(rename = "rls")]
    Rls {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_true")]
        affine: bool,
    },
}

fn default_true() -> bool {
    true
}

impl FilterConfig {
    pub fn name(&self) -> &'static str {
        match self {
            FilterConfig::Krls(_) => "krls-ald-reg",
            FilterConfig::Klms(_) => "klms",
            FilterConfig::Lms { .. } => "lms",
            FilterConfig::Rls { .. } => "rls",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FilterConfig::Krls(c) => c.validate(),
            FilterConfig::Klms(c) => c.validate(),
            FilterConfig::Lms { .. } | FilterConfig::Rls { .. } => {
                self.linear_config().expect("linear").validate()
            }
        }
    }

    fn linear_config(&self) -> Option<LinearConfig> {
        match *self {
            FilterConfig::Lms { eta, affine } => Some(LinearConfig::Lms { eta, affine }),
            FilterConfig::Rls { lambda, affine } => Some(LinearConfig::Rls { lambda, affine }),
            _ => None,
        }
    }

    /// Builds a filter from the first sample and returns it with the
    /// output recorded for that sample.
    pub fn start(&self, u: &[f64], d: f64) -> Result<(Box<dyn OnlineFilter>, StepOutput)> {
        match self {
            FilterConfig::Krls(c) => {
                let f = RegKrls::new(*c, u, d)?;
                let out = StepOutput::new(0.0, d, true, 1);
                Ok((Box::new(f), out))
            }
            FilterConfig::Klms(c) => {
                let f = Klms::new(*c, u, d)?;
                let out = StepOutput::new(0.0, d, true, 1);
                Ok((Box::new(f), out))
            }
            _ => {
                let cfg = self.linear_config().expect("linear");
                let mut f = LinearFilter::new(cfg, u.len())?;
                let out = f.step(u, d)?;
                Ok((Box::new(f), out))
            }
        }
    }

    /// Current value of a named hyperparameter, if this filter has it.
    pub fn param(&self, name: &str) -> Option<f64> {
        match (self, name) {
            (FilterConfig::Krls(c), "delta") => Some(c.delta),
            (FilterConfig::Krls(c), "lambda") => Some(c.lambda),
            (FilterConfig::Krls(c), "sigma") => Some(c.kernel.sigma),
            (FilterConfig::Klms(c), "eta") => Some(c.eta),
            (FilterConfig::Klms(c), "sigma") => Some(c.kernel.sigma),
            (FilterConfig::Lms { eta, .. }, "eta") => Some(*eta),
            (FilterConfig::Rls { lambda, .. }, "lambda") => Some(*lambda),
            _ => None,
        }
    }

    /// Applies a named hyperparameter override. Returns an error when the
    /// parameter does not belong to this filter.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let filter_name = self.name();
        match (self, name) {
            (FilterConfig::Krls(c), "delta") => c.delta = value,
            (FilterConfig::Krls(c), "lambda") => c.lambda = value,
            (FilterConfig::Krls(c), "sigma") => c.kernel.sigma = value,
            (FilterConfig::Klms(c), "eta") => c.eta = value,
            (FilterConfig::Klms(c), "sigma") => c.kernel.sigma = value,
            (FilterConfig::Lms { eta, .. }, "eta") => *eta = value,
            (FilterConfig::Rls { lambda, .. }, "lambda") => *lambda = value,
            _ => {
                return Err(KafError::invalid(
                    name,
                    format!("not a parameter of `{filter_name}`"),
                ))
            }
        }
        Ok(())
    }
}

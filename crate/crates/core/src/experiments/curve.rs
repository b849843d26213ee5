//! Learning curves, steady-state statistics and CSV output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{KafError, Result};
use crate::filter::StepOutput;

pub const CSV_HEADER: &str = "n,y,d,e,e2,dict_size,step_seconds";

/// When a curve counts as converged: the trailing mean of `trail` squared
/// errors stays within `band` (relative) of the steady-state MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceRule {
    #[serde(default = "default_trail")]
    pub trail: usize,
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_trail() -> usize {
    100
}
fn default_band() -> f64 {
    0.1
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        ConvergenceRule {
            trail: default_trail(),
            band: default_band(),
        }
    }
}

impl ConvergenceRule {
    pub fn validate(&self) -> Result<()> {
        if self.trail == 0 {
            return Err(KafError::invalid("convergence.trail", "must be >= 1"));
        }
        if !(self.band.is_finite() && self.band >= 0.0) {
            return Err(KafError::invalid("convergence.band", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// See [`convergence_step`].
    pub fn step(&self, e2: &[f64], target: f64) -> Option<usize> {
        convergence_step(e2, target, self.trail, self.band)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub y: f64,
    pub d: f64,
    pub e: f64,
    pub dict_size: usize,
    pub step_seconds: f64,
}

impl StepRecord {
    pub fn from_output(n: usize, d: f64, out: &StepOutput) -> Self {
        StepRecord {
            n,
            y: out.y,
            d,
            e: out.e,
            dict_size: out.dict_size,
            step_seconds: out.step_seconds,
        }
    }

    pub fn e2(&self) -> f64 {
        self.e * self.e
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<StepRecord>,
}

/// Steady-state summary of one curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub samples: usize,
    pub window: usize,
    pub steady_state_mse: f64,
    pub convergence_step: Option<usize>,
    pub final_dict_size: usize,
}

/// Default steady-state window: the final 10% of the stream.
pub fn default_window(samples: usize) -> usize {
    (samples / 10).max(1)
}

fn check_window(samples: usize, window: usize) -> Result<()> {
    if window == 0 || window > samples {
        return Err(KafError::invalid(
            "window",
            format!("must be in 1..={samples}, got {window}"),
        ));
    }
    Ok(())
}

/// Mean of the last `window` values.
pub fn tail_mean(values: &[f64], window: usize) -> Result<f64> {
    check_window(values.len(), window)?;
    Ok(values[values.len() - window..].iter().sum::<f64>() / window as f64)
}

/// First step (1-based) after which the trailing mean of `trail` values stays
/// within `band` of `target` until the end.
pub fn convergence_step(e2: &[f64], target: f64, trail: usize, band: f64) -> Option<usize> {
    let trail = trail.min(e2.len()).max(1);
    let tol = band * target.abs();
    let mut sum: f64 = e2[..trail - 1].iter().sum();
    let mut last_outside = None;
    for i in trail - 1..e2.len() {
        sum += e2[i];
        if i >= trail {
            sum -= e2[i - trail];
        }
        if (sum / trail as f64 - target).abs() > tol {
            last_outside = Some(i);
        }
    }
    match last_outside {
        None => Some(trail),
        Some(i) if i + 1 < e2.len() => Some(i + 2),
        Some(_) => None,
    }
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn squared_errors(&self) -> Vec<f64> {
        self.records.iter().map(StepRecord::e2).collect()
    }

    pub fn steady_state_mse(&self, window: usize) -> Result<f64> {
        tail_mean(&self.squared_errors(), window)
    }

    pub fn final_dict_size(&self) -> usize {
        self.records.last().map_or(0, |r| r.dict_size)
    }

    pub fn total_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.step_seconds).sum()
    }

    pub fn summary(&self, window: usize, rule: ConvergenceRule) -> Result<CurveSummary> {
        let e2 = self.squared_errors();
        let mse = tail_mean(&e2, window)?;
        Ok(CurveSummary {
            samples: e2.len(),
            window,
            steady_state_mse: mse,
            convergence_step: rule.step(&e2, mse),
            final_dict_size: self.final_dict_size(),
        })
    }

    pub fn write_csv_rows(&self, out: &mut String, trial: Option<usize>) {
        for r in &self.records {
            if let Some(t) = trial {
                let _ = write!(out, "{t},");
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n,
                fmt_f64(r.y),
                fmt_f64(r.d),
                fmt_f64(r.e),
                fmt_f64(r.e2()),
                r.dict_size,
                fmt_f64(r.step_seconds)
            );
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.len() * 120);
        s.push_str(CSV_HEADER);
        s.push('\n');
        self.write_csv_rows(&mut s, None);
        s
    }
}

/// Writes several trials into one CSV, grouped by a leading `trial` column.
pub fn trials_to_csv(curves: &[LearningCurve]) -> String {
    let mut s = String::new();
    s.push_str("trial,");
    s.push_str(CSV_HEADER);
    s.push('\n');
    for (t, c) in curves.iter().enumerate() {
        c.write_csv_rows(&mut s, Some(t));
    }
    s
}

/// Pointwise average over trials of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub mse: Vec<f64>,
    pub dict_size: Vec<f64>,
    pub step_seconds: Vec<f64>,
}

impl MeanCurve {
    pub fn new(curves: &[LearningCurve]) -> Result<Self> {
        let len = curves
            .first()
            .map(LearningCurve::len)
            .ok_or_else(|| KafError::invalid("trials", "at least one trial is required"))?;
        if let Some(c) = curves.iter().find(|c| c.len() != len) {
            return Err(KafError::DimensionMismatch {
                expected: len,
                got: c.len(),
            });
        }
        let k = curves.len() as f64;
        let avg = |f: &dyn Fn(&StepRecord) -> f64| -> Vec<f64> {
            (0..len)
                .map(|i| curves.iter().map(|c| f(&c.records[i])).sum::<f64>() / k)
                .collect()
        };
        Ok(MeanCurve {
            mse: avg(&StepRecord::e2),
            dict_size: avg(&|r| r.dict_size as f64),
            step_seconds: avg(&|r| r.step_seconds),
        })
    }

    pub fn steady_state_mse(&self, window: usize) -> Result<f64> {
        tail_mean(&self.mse, window)
    }

    pub fn convergence_step(&self, window: usize, rule: ConvergenceRule) -> Result<Option<usize>> {
        let mse = self.steady_state_mse(window)?;
        Ok(rule.step(&self.mse, mse))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,mse,dict_size,step_seconds\n");
        for i in 0..self.mse.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                i + 1,
                fmt_f64(self.mse[i]),
                fmt_f64(self.dict_size[i]),
                fmt_f64(self.step_seconds[i])
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(errors: &[f64]) -> LearningCurve {
        LearningCurve {
            records: errors
                .iter()
                .enumerate()
                .map(|(i, &e)| StepRecord {
                    n: i + 1,
                    y: 0.0,
                    d: e,
                    e,
                    dict_size: i + 1,
                    step_seconds: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn steady_state_window() {
        let c = curve(&[10.0, 10.0, 1.0, 1.0]);
        assert_eq!(c.steady_state_mse(2).unwrap(), 1.0);
        assert_eq!(c.steady_state_mse(4).unwrap(), 50.5);
        assert_eq!(c.steady_state_mse(0).unwrap_err().field(), Some("window"));
        assert!(c.steady_state_mse(5).is_err());
        assert_eq!(default_window(5), 1);
        assert_eq!(default_window(3000), 300);
    }

    #[test]
    fn convergence_detection() {
        let mut e2 = vec![4.0; 50];
        e2.extend(vec![1.0; 500]);
        // Trailing mean of 10 leaves the band once the window is all ones.
        assert_eq!(convergence_step(&e2, 1.0, 10, 0.1), Some(60));
        assert_eq!(convergence_step(&[1.0; 20], 1.0, 10, 0.1), Some(10));
        let mut late = vec![1.0; 30];
        late.push(9.0);
        assert_eq!(convergence_step(&late, 1.0, 5, 0.1), None);
    }

    #[test]
    fn csv_shape() {
        let c = curve(&[0.5, -0.25]);
        let s = c.to_csv();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[1],
            "1,0.0000000000000000e0,5.0000000000000000e-1,5.0000000000000000e-1,2.5000000000000000e-1,1,0.0000000000000000e0"
        );
        let t = trials_to_csv(&[c.clone(), c]);
        assert!(t.lines().nth(3).unwrap().starts_with("1,1,"));
    }

    #[test]
    fn seventeen_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn mean_curve() {
        let m = MeanCurve::new(&[curve(&[1.0, 2.0]), curve(&[3.0, 0.0])]).unwrap();
        assert_eq!(m.mse, vec![5.0, 2.0]);
        assert_eq!(m.dict_size, vec![1.0, 2.0]);
        assert!(MeanCurve::new(&[curve(&[1.0]), curve(&[1.0, 2.0])]).is_err());
        assert!(MeanCurve::new(&[]).is_err());
    }
}

//! Per-step cost as a function of model size.
//!
//! The filter is grown to each requested size on a stream that forces
//! growth (δ = 0 for KRLS, every sample for KLMS). At each size the state is
//! cloned `reps` times and a single step is timed on every clone, so all
//! repetitions see exactly the same size. The median is reported together
//! with the relative interquartile range.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{KafError, Result};
use crate::kernels::KernelSpec;
use crate::klms::{Klms, KlmsConfig};
use crate::krls::{KrlsConfig, RegKrls};
use crate::linear::{LinearConfig, LinearFilter};

/// Input dimension of the cost stream.
pub const COST_DIM: usize = 8;
/// Half-width of the uniform input box. Wide enough that every new point is
/// far from the dictionary relative to σ = 1.
pub const COST_SPREAD: f64 = 5.0;
/// Relative IQR above which a point is flagged as noisy.
pub const UNSTABLE_IQR: f64 = 0.5;

pub const DEFAULT_SIZES: [usize; 5] = [50, 100, 200, 400, 800];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CostTarget {
    Krls,
    Klms,
    Lms,
}

impl FromStr for CostTarget {
    type Err = KafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "krls" | "krls-ald-reg" => Ok(CostTarget::Krls),
            "klms" => Ok(CostTarget::Klms),
            "lms" => Ok(CostTarget::Lms),
            other => Err(KafError::invalid(
                "filter",
                format!("expected krls, klms or lms, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostPoint {
    pub size: usize,
    pub median_seconds: f64,
    pub iqr_rel: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub target: CostTarget,
    pub points: Vec<CostPoint>,
    pub slope: f64,
}

fn check_sizes(sizes: &[usize], reps: usize) -> Result<()> {
    if sizes.len() < 2 {
        return Err(KafError::invalid("sizes", "at least two sizes are required"));
    }
    if sizes[0] < 1 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KafError::invalid("sizes", "must be positive and strictly increasing"));
    }
    if reps < 3 {
        return Err(KafError::invalid("reps", "must be >= 3"));
    }
    Ok(())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(size: usize, mut times: Vec<f64>) -> CostPoint {
    times.sort_by(f64::total_cmp);
    let median = quantile(&times, 0.5);
    let iqr = quantile(&times, 0.75) - quantile(&times, 0.25);
    let iqr_rel = if median > 0.0 { iqr / median } else { f64::INFINITY };
    CostPoint {
        size,
        median_seconds: median,
        iqr_rel,
        unstable: iqr_rel > UNSTABLE_IQR,
    }
}

/// Least-squares slope of `ln(median)` against `ln(size)`.
pub fn loglog_slope(points: &[CostPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.size as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_seconds.max(1e-12).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn draw(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let u: Vec<f64> = (0..COST_DIM)
        .map(|_| rng.random_range(-COST_SPREAD..COST_SPREAD))
        .collect();
    let d = rng.random_range(-1.0..1.0);
    (u, d)
}

/// Times one step on `reps` clones of `state`.
fn time_clones<F: Clone>(
    state: &F,
    reps: usize,
    rng: &mut ChaCha8Rng,
    mut step: impl FnMut(&mut F, &[f64], f64) -> Result<()>,
) -> Result<Vec<f64>> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (u, d) = draw(rng);
        let mut probe = state.clone();
        let t0 = Instant::now();
        step(&mut probe, &u, d)?;
        times.push(t0.elapsed().as_secs_f64());
        drop(probe);
    }
    Ok(times)
}

/// The KRLS configuration used for cost measurement: every sample admitted.
pub fn cost_krls_config() -> KrlsConfig {
    KrlsConfig::new(KernelSpec::gaussian(1.0), 0.1, 0.0)
}

pub fn measure(target: CostTarget, sizes: &[usize], reps: usize, seed: u64) -> Result<CostReport> {
    check_sizes(sizes, reps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u0, d0) = draw(&mut rng);
    let mut points = Vec::with_capacity(sizes.len());
    match target {
        CostTarget::Krls => {
            let mut f = RegKrls::new(cost_krls_config(), &u0, d0)?;
            for &k in sizes {
                while f.dictionary().len() < k {
                    let (u, d) = draw(&mut rng);
                    let before = f.dictionary().len();
                    f.step(&u, d)?;
                    if f.dictionary().len() == before {
                        return Err(KafError::Degenerate {
                            what: "cost stream stopped growing the dictionary",
                            value: before as f64,
                        });
                    }
                }
                let times = time_clones(&f, reps, &mut rng, |g, u, d| g.step(u, d).map(|_| ()))?;
                points.push(summarize(k, times));
            }
        }
        CostTarget::Klms => {
            let mut f = Klms::new(KlmsConfig::new(KernelSpec::gaussian(1.0), 0.2), &u0, d0)?;
            for &k in sizes {
                while f.n() < k {
                    let (u, d) = draw(&mut rng);
                    f.step(&u, d)?;
                }
                let times = time_clones(&f, reps, &mut rng, |g, u, d| g.step(u, d).map(|_| ()))?;
                points.push(summarize(k, times));
            }
        }
        CostTarget::Lms => {
            let mut f = LinearFilter::new(LinearConfig::Lms { eta: 0.01, affine: true }, COST_DIM)?;
            let mut n = 0;
            for &k in sizes {
                while n < k {
                    let (u, d) = draw(&mut rng);
                    f.step(&u, d)?;
                    n += 1;
                }
                let times = time_clones(&f, reps, &mut rng, |g, u, d| g.step(u, d).map(|_| ()))?;
                points.push(summarize(k, times));
            }
        }
    }
    let slope = loglog_slope(&points);
    Ok(CostReport {
        target,
        points,
        slope,
    })
}

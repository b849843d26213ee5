//! Synthetic benchmark streams.
//!
//! Every generator draws a raw series `x(0..length)` and emits
//! `length − L` samples `(u(n), d(n))` for `n = L..length`, where `L` is the
//! embedding order. Values of `x` before index 0 are taken as 0.
//!
//! | generator           | driving series          | input `u(n)`                | target `d(n)` (before noise)              |
//! |---------------------|-------------------------|-----------------------------|-------------------------------------------|
//! | `nonlinear_sysid`   | `x ~ U(−1, 1)` i.i.d.   | `[x(n), …, x(n−L+1)]`       | `tanh(0.5·x(n) + 0.3·x(n−1)·x(n−2))`      |
//! | `noisy_sinc`        | `x ~ U(−3, 3)` i.i.d.   | `[x(n), …, x(n−L+1)]`       | `sin(πx(n)) / (πx(n))`                     |
//! | `mackey_glass_like` | Mackey–Glass, τ = 17    | `[o(n−1), …, o(n−L)]`       | `s(n)`                                     |
//! | `linear_plant`      | `x ~ N(0, 1)` i.i.d.    | `[x(n), …, x(n−L+1)]`       | `Σᵢ wᵢ x(n−i)`, `wᵢ = 0.8·(−0.5)ⁱ`, i < L |
//!
//! Noise is i.i.d. `N(0, noise_std²)` added to the target. For
//! `mackey_glass_like` the noise is added to the observed series `o = s + ε`,
//! so inputs are noisy too and `d(n) = o(n)`. The Mackey–Glass series
//! `ṡ = 0.2·s(t−17)/(1 + s(t−17)¹⁰) − 0.1·s(t)` is integrated by Euler with
//! step 0.1, sampled every 6 time units after a washout of 300 samples,
//! starting from a constant history `1.2 + 0.1·U(−1, 1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KafError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    NonlinearSysid,
    NoisySinc,
    MackeyGlassLike,
    LinearPlant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub generator: Generator,
    pub length: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "embed_L")]
    pub embed_l: usize,
}

/// Inputs, noisy targets and the noise-free targets of a generated stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub clean: Vec<f64>,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub const LINEAR_PLANT_GAIN: f64 = 0.8;

/// Taps of the `linear_plant` generator for order `L`.
pub fn linear_plant_weights(order: usize) -> Vec<f64> {
    (0..order)
        .map(|i| LINEAR_PLANT_GAIN * (-0.5f64).powi(i as i32))
        .collect()
}

impl StreamConfig {
    pub fn new(generator: Generator, samples: usize, noise_std: f64, seed: u64, embed_l: usize) -> Self {
        StreamConfig {
            generator,
            length: samples + embed_l,
            noise_std,
            seed,
            embed_l,
        }
    }

    /// Number of `(u, d)` samples the stream yields.
    pub fn samples(&self) -> usize {
        self.length.saturating_sub(self.embed_l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_l < 1 {
            return Err(KafError::invalid("stream.embed_L", "must be >= 1"));
        }
        if self.length <= self.embed_l {
            return Err(KafError::invalid(
                "stream.length",
                format!(
                    "must exceed embed_L = {} (no samples remain after embedding)",
                    self.embed_l
                ),
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(KafError::invalid("stream.noise_std", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Stream> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let l = self.embed_l;
        let n = self.length;
        let noise = Normal::new(0.0, self.noise_std)
            .map_err(|e| KafError::invalid("stream.noise_std", e.to_string()))?;

        let mut inputs = Vec::with_capacity(n - l);
        let mut clean = Vec::with_capacity(n - l);
        let mut targets = Vec::with_capacity(n - l);

        match self.generator {
            Generator::MackeyGlassLike => {
                let s = mackey_glass(n, &mut rng);
                let obs: Vec<f64> = s.iter().map(|v| v + noise.sample(&mut rng)).collect();
                for t in l..n {
                    inputs.push((1..=l).map(|i| obs[t - i]).collect());
                    clean.push(s[t]);
                    targets.push(obs[t]);
                }
            }
            generator => {
                let x: Vec<f64> = match generator {
                    Generator::NonlinearSysid => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    Generator::NoisySinc => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    _ => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
                };
                let at = |k: isize| if k < 0 { 0.0 } else { x[k as usize] };
                let w = linear_plant_weights(l);
                for t in l..n {
                    let ti = t as isize;
                    let u: Vec<f64> = (0..l as isize).map(|i| at(ti - i)).collect();
                    let c = match generator {
                        Generator::NonlinearSysid => {
                            (0.5 * at(ti) + 0.3 * at(ti - 1) * at(ti - 2)).tanh()
                        }
                        Generator::NoisySinc => sinc(at(ti)),
                        _ => w.iter().zip(&u).map(|(a, b)| a * b).sum(),
                    };
                    inputs.push(u);
                    clean.push(c);
                    targets.push(c + noise.sample(&mut rng));
                }
            }
        }
        Ok(Stream {
            inputs,
            targets,
            clean,
        })
    }
}

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn mackey_glass(samples: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    const DT: f64 = 0.1;
    const TAU_STEPS: usize = 170;
    const SUBSAMPLE: usize = 60;
    const WASHOUT: usize = 300;

    let init = 1.2 + 0.1 * rng.random_range(-1.0..1.0);
    let total = (samples + WASHOUT) * SUBSAMPLE;
    let mut hist: Vec<f64> = vec![init; TAU_STEPS + 1];
    let mut head = 0usize;
    let mut s = init;
    let mut out = Vec::with_capacity(samples);
    for step in 0..total {
        // `hist[head]` holds s(t − τ).
        let delayed = hist[head];
        s += DT * (0.2 * delayed / (1.0 + delayed.powi(10)) - 0.1 * s);
        hist[head] = s;
        head = (head + 1) % hist.len();
        if step % SUBSAMPLE == SUBSAMPLE - 1 && step / SUBSAMPLE >= WASHOUT {
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(generator: Generator, samples: usize, noise: f64, seed: u64, l: usize) -> StreamConfig {
        StreamConfig::new(generator, samples, noise, seed, l)
    }

    #[test]
    fn deterministic_by_seed() {
        for g in [
            Generator::NonlinearSysid,
            Generator::NoisySinc,
            Generator::MackeyGlassLike,
            Generator::LinearPlant,
        ] {
            let a = cfg(g, 200, 0.1, 42, 3).generate().unwrap();
            let b = cfg(g, 200, 0.1, 42, 3).generate().unwrap();
            let c = cfg(g, 200, 0.1, 43, 3).generate().unwrap();
            assert_eq!(a, b);
            assert_ne!(a.targets, c.targets);
            assert_eq!(a.len(), 200);
            assert!(a.inputs.iter().all(|u| u.len() == 3));
        }
    }

    #[test]
    fn rejects_empty_remainder() {
        let c = StreamConfig {
            generator: Generator::NoisySinc,
            length: 3,
            noise_std: 0.0,
            seed: 0,
            embed_l: 3,
        };
        let err = c.generate().unwrap_err();
        assert_eq!(err.field(), Some("stream.length"));
        let mut c = c;
        c.embed_l = 0;
        assert!(c.generate().is_err());
    }

    #[test]
    fn noiseless_linear_plant_is_linear() {
        let s = cfg(Generator::LinearPlant, 100, 0.0, 1, 4).generate().unwrap();
        let w = linear_plant_weights(4);
        for (u, d) in s.inputs.iter().zip(&s.targets) {
            let lin: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
            assert_eq!(*d, lin);
        }
    }

    #[test]
    fn sinc_noise_variance() {
        let s = cfg(Generator::NoisySinc, 5000, 0.1, 7, 1).generate().unwrap();
        let r: Vec<f64> = s
            .targets
            .iter()
            .zip(&s.inputs)
            .map(|(d, u)| d - sinc(u[0]))
            .collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
        assert!((0.005..=0.02).contains(&var), "variance {var}");
    }

    #[test]
    fn sysid_targets_follow_closed_form() {
        let s = cfg(Generator::NonlinearSysid, 50, 0.0, 3, 3).generate().unwrap();
        for (u, d) in s.inputs.iter().zip(&s.targets) {
            assert_eq!(*d, (0.5 * u[0] + 0.3 * u[1] * u[2]).tanh());
        }
    }

    #[test]
    fn mackey_glass_is_bounded_and_aperiodic() {
        let s = cfg(Generator::MackeyGlassLike, 500, 0.0, 5, 4).generate().unwrap();
        assert!(s.clean.iter().all(|v| (0.1..1.6).contains(v)));
        let mean = s.clean.iter().sum::<f64>() / 500.0;
        let var = s.clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0;
        assert!(var > 0.01, "series collapsed, variance {var}");
        // One-step targets line up with the next input.
        for t in 0..s.len() - 1 {
            assert_eq!(s.inputs[t + 1][0], s.targets[t]);
        }
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-16);
        assert!((sinc(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    }
}

//! Running filters over generated streams.

use std::time::Instant;

use crate::error::{KafError, Result};
use crate::experiments::curve::{LearningCurve, StepRecord};
use crate::experiments::generators::{Stream, StreamConfig};
use crate::filter::{FilterConfig, OnlineFilter};
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOptions {
    /// Record per-step wall time. Off keeps outputs byte-reproducible.
    pub record_timing: bool,
}

/// Runs `filter` over a prepared stream. Errors carry the 1-based step.
pub fn run_stream(
    filter: &FilterConfig,
    stream: &Stream,
    opts: TrialOptions,
) -> Result<(LearningCurve, Box<dyn OnlineFilter>)> {
    filter.validate()?;
    let (first_u, first_d) = match (stream.inputs.first(), stream.targets.first()) {
        (Some(u), Some(&d)) => (u, d),
        _ => return Err(KafError::invalid("stream.length", "stream is empty")),
    };
    let mut records = Vec::with_capacity(stream.len());
    let t0 = Instant::now();
    let (mut f, mut out) = filter.start(first_u, first_d).map_err(|e| e.at_step(1))?;
    if opts.record_timing {
        out.step_seconds = t0.elapsed().as_secs_f64();
    }
    records.push(StepRecord::from_output(1, first_d, &out));

    for (i, (u, &d)) in stream.inputs.iter().zip(&stream.targets).enumerate().skip(1) {
        let t0 = opts.record_timing.then(Instant::now);
        let mut out = f.step(u, d).map_err(|e| e.at_step(i + 1))?;
        if let Some(t0) = t0 {
            out.step_seconds = t0.elapsed().as_secs_f64();
        }
        records.push(StepRecord::from_output(i + 1, d, &out));
    }
    Ok((LearningCurve { records }, f))
}

pub fn run_trial(
    filter: &FilterConfig,
    stream: &StreamConfig,
    opts: TrialOptions,
) -> Result<(LearningCurve, Box<dyn OnlineFilter>)> {
    let data = stream.generate()?;
    run_stream(filter, &data, opts)
}

/// Seed of trial `t`: the configured seed offset by the trial index.
pub fn trial_seed(base: u64, t: usize) -> u64 {
    base.wrapping_add(t as u64)
}

/// Runs `trials` independent seeds. Results keep trial order whatever the
/// execution mode, and the first failing trial's error is returned.
pub fn run_trials(
    mode: ExecMode,
    filter: &FilterConfig,
    stream: &StreamConfig,
    trials: usize,
    opts: TrialOptions,
) -> Result<Vec<(LearningCurve, Box<dyn OnlineFilter>)>> {
    if trials == 0 {
        return Err(KafError::invalid("trials", "must be >= 1"));
    }
    filter.validate()?;
    stream.validate()?;
    par::map_range_with(mode, trials, |t| {
        let mut s = stream.clone();
        s.seed = trial_seed(stream.seed, t);
        run_trial(filter, &s, opts)
    })
    .into_iter()
    .collect()
}

//! Benchmark streams, learning curves and the trial harness.

pub mod cost;
pub mod curve;
pub mod generators;
pub mod trial;

pub use cost::{CostPoint, CostReport, CostTarget};
pub use curve::{CurveSummary, LearningCurve, MeanCurve, StepRecord};
pub use generators::{Generator, Stream, StreamConfig};
pub use trial::{run_stream, run_trial, run_trials, TrialOptions};

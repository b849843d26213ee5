//! Library side of the `kaf` commands. `main.rs` only parses arguments and
//! maps errors to exit codes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{KafError, Result};
use crate::experiments::cost::{self, CostReport, CostTarget};
use crate::experiments::curve::{
    default_window, fmt_f64, trials_to_csv, ConvergenceRule, CurveSummary, MeanCurve,
};
use crate::experiments::generators::StreamConfig;
use crate::experiments::trial::{run_trials, trial_seed, TrialOptions};
use crate::filter::FilterConfig;
use crate::par::{self, ExecMode};
use crate::verify::{Suite, SuiteReport};

pub const DEFAULT_RUN_DIR: &str = "kaf-out";
pub const DEFAULT_SWEEP_DIR: &str = "kaf-sweep";
pub const DEFAULT_BENCH_DIR: &str = "kaf-bench";

pub const PARAMS: [&str; 4] = ["delta", "lambda", "sigma", "eta"];

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub filter: FilterConfig,
    pub stream: StreamConfig,
    #[serde(default = "one")]
    pub trials: usize,
    /// Output directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Steady-state window; defaults to the final 10% of the stream.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub convergence: ConvergenceRule,
    #[serde(default)]
    pub record_timing: bool,
    /// Also write the trained model of trial 0 as `model.json`.
    #[serde(default)]
    pub snapshot: bool,
}

/// Values in a sweep grid. Axes left out keep the base filter's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

impl Grid {
    fn axis(&self, name: &str) -> Option<&Vec<f64>> {
        match name {
            "delta" => self.delta.as_ref(),
            "lambda" => self.lambda.as_ref(),
            "sigma" => self.sigma.as_ref(),
            _ => self.eta.as_ref(),
        }
    }

    /// Cartesian product in `delta, lambda, sigma, eta` nesting order.
    pub fn points(&self) -> Vec<Vec<(&'static str, f64)>> {
        let mut pts: Vec<Vec<(&'static str, f64)>> = vec![Vec::new()];
        for name in PARAMS {
            if let Some(values) = self.axis(name) {
                pts = pts
                    .into_iter()
                    .flat_map(|p| {
                        values.iter().map(move |&v| {
                            let mut q = p.clone();
                            q.push((name, v));
                            q
                        })
                    })
                    .collect();
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub filter: FilterConfig,
    pub stream: StreamConfig,
    pub grid: Grid,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub convergence: ConvergenceRule,
    #[serde(default)]
    pub record_timing: bool,
}

/// Command-line overrides; they take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn params(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("eta", self.eta),
        ]
    }

    fn apply(&self, filter: &mut FilterConfig, stream: &mut StreamConfig, out: &mut Option<PathBuf>) -> Result<()> {
        for (name, value) in self.params() {
            if let Some(v) = value {
                filter.set_param(name, v)?;
            }
        }
        if let Some(seed) = self.seed {
            stream.seed = seed;
        }
        if let Some(o) = &self.out {
            *out = Some(o.clone());
        }
        Ok(())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| KafError::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        overrides.apply(&mut cfg.filter, &mut cfg.stream, &mut cfg.out)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.stream.validate()?;
        self.convergence.validate()?;
        check_trials_and_window(self.trials, self.window, &self.stream)
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or_else(|| default_window(self.stream.samples()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_RUN_DIR))
    }
}

impl SweepConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let mut cfg: SweepConfig = read_json(path)?;
        overrides.apply(&mut cfg.filter, &mut cfg.stream, &mut cfg.out)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        self.convergence.validate()?;
        check_trials_and_window(self.trials, self.window, &self.stream)?;
        for name in PARAMS {
            if let Some(values) = self.grid.axis(name) {
                if values.is_empty() {
                    return Err(KafError::invalid(format!("grid.{name}"), "must not be empty"));
                }
                if self.filter.param(name).is_none() {
                    return Err(KafError::invalid(
                        format!("grid.{name}"),
                        format!("not a parameter of `{}`", self.filter.name()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn window(&self) -> usize {
        self.window.unwrap_or_else(|| default_window(self.stream.samples()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_SWEEP_DIR))
    }
}

fn check_trials_and_window(trials: usize, window: Option<usize>, stream: &StreamConfig) -> Result<()> {
    if trials == 0 {
        return Err(KafError::invalid("trials", "must be >= 1"));
    }
    if let Some(w) = window {
        if w == 0 || w > stream.samples() {
            return Err(KafError::invalid(
                "window",
                format!("must be in 1..={}, got {w}", stream.samples()),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub curve: CurveSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub algorithm: &'static str,
    pub trials: usize,
    pub samples: usize,
    pub window: usize,
    pub mean_steady_state_mse: f64,
    pub mean_final_dict_size: f64,
    pub mean_curve_convergence_step: Option<usize>,
    pub per_trial: Vec<TrialSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
}

/// In-memory result of a run before anything is written.
pub struct RunOutput {
    pub summary: RunSummary,
    pub curves_csv: String,
    pub mean_csv: Option<String>,
    pub model_json: Option<String>,
}

/// Runs every trial and assembles outputs without touching the filesystem.
pub fn execute_run(cfg: &RunConfig, mode: ExecMode) -> Result<RunOutput> {
    cfg.validate()?;
    let window = cfg.window();
    let opts = TrialOptions {
        record_timing: cfg.record_timing,
    };
    let t0 = Instant::now();
    let results = run_trials(mode, &cfg.filter, &cfg.stream, cfg.trials, opts)?;
    let elapsed = t0.elapsed().as_secs_f64();
    let curves: Vec<_> = results.iter().map(|(c, _)| c.clone()).collect();

    let per_trial = curves
        .iter()
        .enumerate()
        .map(|(t, c)| {
            Ok(TrialSummary {
                seed: trial_seed(cfg.stream.seed, t),
                curve: c.summary(window, cfg.convergence)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = MeanCurve::new(&curves)?;
    let k = cfg.trials as f64;
    let summary = RunSummary {
        algorithm: cfg.filter.name(),
        trials: cfg.trials,
        samples: cfg.stream.samples(),
        window,
        mean_steady_state_mse: per_trial.iter().map(|t| t.curve.steady_state_mse).sum::<f64>() / k,
        mean_final_dict_size: per_trial.iter().map(|t| t.curve.final_dict_size as f64).sum::<f64>() / k,
        mean_curve_convergence_step: mean.convergence_step(window, cfg.convergence)?,
        per_trial,
        total_seconds: cfg.record_timing.then_some(elapsed),
    };
    let model_json = if cfg.snapshot {
        Some(results[0].1.snapshot().to_json()?)
    } else {
        None
    };
    Ok(RunOutput {
        summary,
        curves_csv: trials_to_csv(&curves),
        mean_csv: (cfg.trials > 1).then(|| mean.to_csv()),
        model_json,
    })
}

/// Writes a set of files so that either all of them appear or none do.
/// Each file is staged under a temporary name and renamed at the end; on
/// any failure everything written so far is removed.
pub fn write_all(dir: &Path, files: &[(&str, &str)]) -> Result<Vec<PathBuf>> {
    let io = |p: &Path, e| KafError::io(p.display().to_string(), e);
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let mut done: Vec<PathBuf> = Vec::new();
    let result = (|| {
        for (name, content) in files {
            let final_path = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            fs::write(&tmp, content).map_err(|e| io(&tmp, e))?;
            staged.push((tmp, final_path));
        }
        for (tmp, final_path) in &staged {
            fs::rename(tmp, final_path).map_err(|e| io(final_path, e))?;
            done.push(final_path.clone());
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        for p in &done {
            let _ = fs::remove_file(p);
        }
        if created_dir {
            let _ = fs::remove_dir(dir);
        }
        return Err(e);
    }
    Ok(done)
}

pub fn cmd_run(cfg: &RunConfig, mode: ExecMode) -> Result<RunSummary> {
    let out = execute_run(cfg, mode)?;
    let summary_json = serde_json::to_string_pretty(&out.summary)?;
    let mut files: Vec<(&str, &str)> = vec![("curves.csv", &out.curves_csv), ("summary.json", &summary_json)];
    if let Some(m) = &out.mean_csv {
        files.push(("mean_curve.csv", m));
    }
    if let Some(m) = &out.model_json {
        files.push(("model.json", m));
    }
    write_all(&cfg.out_dir(), &files)?;
    Ok(out.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: usize,
    /// Effective hyperparameters of this point (only those the filter has).
    pub params: BTreeMap<&'static str, f64>,
    pub mean_steady_state_mse: Option<f64>,
    pub mean_final_dict_size: Option<f64>,
    pub total_seconds: f64,
    pub error: Option<String>,
}

pub fn execute_sweep(cfg: &SweepConfig, mode: ExecMode) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = cfg.grid.points();
    let rows = par::map_slice_with(mode, &points, |point| {
        let mut filter = cfg.filter.clone();
        let t0 = Instant::now();
        let applied = point
            .iter()
            .try_for_each(|&(name, v)| filter.set_param(name, v));
        let params = PARAMS
            .iter()
            .filter_map(|&name| filter.param(name).map(|v| (name, v)))
            .collect();
        let run = applied.and_then(|_| {
            let run_cfg = RunConfig {
                filter: filter.clone(),
                stream: cfg.stream.clone(),
                trials: cfg.trials,
                out: None,
                window: cfg.window,
                convergence: cfg.convergence,
                record_timing: cfg.record_timing,
                snapshot: false,
            };
            execute_run(&run_cfg, mode)
        });
        let total_seconds = if cfg.record_timing {
            t0.elapsed().as_secs_f64()
        } else {
            0.0
        };
        match run {
            Ok(r) => SweepRow {
                point: 0,
                params,
                mean_steady_state_mse: Some(r.summary.mean_steady_state_mse),
                mean_final_dict_size: Some(r.summary.mean_final_dict_size),
                total_seconds,
                error: None,
            },
            Err(e) => SweepRow {
                point: 0,
                params,
                mean_steady_state_mse: None,
                mean_final_dict_size: None,
                total_seconds,
                error: Some(e.to_string()),
            },
        }
    });
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.point = i + 1;
            r
        })
        .collect())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("point,delta,lambda,sigma,eta,steady_state_mse,final_dict_size,total_seconds,error\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        let _ = write!(s, "{}", r.point);
        for name in PARAMS {
            let _ = write!(s, ",{}", opt(r.params.get(name).copied()));
        }
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            opt(r.mean_steady_state_mse),
            opt(r.mean_final_dict_size),
            fmt_f64(r.total_seconds),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    s
}

pub fn cmd_sweep(cfg: &SweepConfig, mode: ExecMode) -> Result<Vec<SweepRow>> {
    let rows = execute_sweep(cfg, mode)?;
    let csv = sweep_to_csv(&rows);
    let json = serde_json::to_string_pretty(&rows)?;
    write_all(&cfg.out_dir(), &[("sweep.csv", &csv), ("sweep.json", &json)])?;
    Ok(rows)
}

/// Runs the named suites and returns their reports. A suite that errors
/// (as opposed to breaching tolerance) aborts the command.
pub fn cmd_verify(suites: &[Suite], seed: u64) -> Result<Vec<SuiteReport>> {
    suites.iter().map(|s| s.run(seed)).collect()
}

pub fn bench_to_csv(report: &CostReport) -> String {
    let mut s = String::from("size,median_step_seconds,iqr_rel,unstable\n");
    for p in &report.points {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            p.size,
            fmt_f64(p.median_seconds),
            fmt_f64(p.iqr_rel),
            p.unstable
        );
    }
    s
}

pub fn cmd_bench(
    target: CostTarget,
    sizes: &[usize],
    reps: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<CostReport> {
    let report = cost::measure(target, sizes, reps, seed)?;
    if let Some(dir) = out {
        let csv = bench_to_csv(&report);
        let json = serde_json::to_string_pretty(&report)?;
        write_all(dir, &[("bench.csv", &csv), ("bench.json", &json)])?;
    }
    Ok(report)
}

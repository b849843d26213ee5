use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use kaf::cli::{self, Overrides, RunConfig, SweepConfig, DEFAULT_BENCH_DIR};
use kaf::experiments::cost::{CostTarget, DEFAULT_SIZES, UNSTABLE_IQR};
use kaf::verify::{self, Suite};
use kaf::{ExecMode, KafError};

#[derive(Parser)]
#[command(name = "kaf", version, about = "Online kernel adaptive filters")]
struct Cli {
    /// Run trials and sweep points on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a filter over a generated stream and write learning curves.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Evaluate a grid of hyperparameters.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Check the recursions against dense oracles.
    Verify {
        /// krls-batch, klms-feature, gram-psd, inverse-consistency or all.
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
    /// Measure per-step cost against model size.
    Bench {
        /// krls, klms or lms.
        #[arg(long, default_value = "krls")]
        filter: String,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 31)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_BENCH_DIR)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            delta: a.delta,
            lambda: a.lambda,
            sigma: a.sigma,
            eta: a.eta,
            seed: a.seed,
            out: a.out,
        }
    }
}

fn emit(line: &str) -> Result<(), KafError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| KafError::io("stdout", e)),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), KafError> {
    emit(&serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<(), KafError> {
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides.into())?;
            print_json(&cli::cmd_run(&cfg, mode)?)
        }
        Command::Sweep { config, overrides } => {
            let cfg = SweepConfig::load(&config, &overrides.into())?;
            print_json(&cli::cmd_sweep(&cfg, mode)?)
        }
        Command::Verify { suite, seed } => {
            let suites = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let reports = cli::cmd_verify(&suites, seed)?;
            for r in &reports {
                emit(&serde_json::to_string(r)?)?;
            }
            reports.into_iter().try_for_each(|r| r.into_result().map(drop))
        }
        Command::Bench {
            filter,
            sizes,
            reps,
            seed,
            out,
        } => {
            let target: CostTarget = filter.parse()?;
            let report = cli::cmd_bench(target, &sizes, reps, seed, Some(&out))?;
            for p in report.points.iter().filter(|p| p.unstable) {
                eprintln!(
                    "warning: size {} has relative IQR {:.2} > {UNSTABLE_IQR}",
                    p.size, p.iqr_rel
                );
            }
            print_json(&report)
        }
    }
}

fn main() -> ExitCode {
    let threads = std::env::var("KAF_THREADS").ok().and_then(|v| v.parse().ok());
    kaf::par::configure_threads(threads);
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = json!({
                "error": "validation",
                "message": e.to_string().trim_end(),
                "field": null,
                "step": null,
                "exit_code": 1,
            });
            eprintln!("{report}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let step = match &e {
                KafError::AtStep { step, .. } | KafError::ToleranceBreach { step, .. } => Some(*step),
                _ => None,
            };
            let report = json!({
                "error": kind.as_str(),
                "message": e.to_string(),
                "field": e.field(),
                "step": step,
                "exit_code": kind.exit_code(),
            });
            eprintln!("{report}");
            ExitCode::from(kind.exit_code() as u8)
        }
    }
}

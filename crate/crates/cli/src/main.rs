//! `caimdp`: robust controller synthesis over interval MDPs with
//! continuous action sets.
//!
//! Exit codes: 0 on success, 1 on validation or solver failure, 2 on usage
//! errors. Failures are reported as single-line JSON objects on stderr.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use caimdp_core::bellman::{
    discrete_vi, evaluate_policy, suboptimality_bound, synthesize, AdversaryMode, MarkovPolicy,
    SynthesisReport,
};
use caimdp_core::experiments::{compare, generate, GeneratorConfig};
use caimdp_core::model::{load_model, save_model, validate_pointwise, Caimdp};
use caimdp_core::optimizers::OptimizerConfig;
use caimdp_core::sampling;

#[derive(Parser)]
#[command(
    name = "caimdp",
    version,
    about = "Robust finite-horizon synthesis over continuous-action interval MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Worst,
    Best,
}

#[derive(Subcommand)]
enum Command {
    /// Check interval consistency of a model on sampled actions.
    Validate {
        model: PathBuf,
        /// Number of quasi-random actions (polytope vertices are added on
        /// top).
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
    /// Pessimistic value iteration: optimal robust values and policy.
    Synthesize {
        model: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        gamma: f64,
        /// Optimality tolerance for the iterative solvers.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Zero wall-clock fields for byte-reproducible reports.
        #[arg(long)]
        no_timing: bool,
    },
    /// Evaluate a fixed policy under the worst- or best-case adversary.
    Evaluate {
        model: PathBuf,
        policy: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Value iteration over a finite action list.
    Discrete {
        model: PathBuf,
        /// `vertices`, `sample:<count>`, or a path to a JSON array of
        /// actions.
        #[arg(long)]
        actions: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        gamma: f64,
        /// Seed for `sample:<count>` draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
    /// Per-state suboptimality gaps: optimistic iteration on the
    /// upper-reward model minus pessimistic iteration on the lower-reward
    /// one.
    Bound {
        model_lo: PathBuf,
        model_hi: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Generate a random concave/convex instance over the cylinder action
    /// set.
    Gen {
        #[arg(long, default_value_t = 25)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Interval half-width in [0, 0.5).
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        /// Curvature scale in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Continuous-versus-sampled synthesis comparison.
    Compare {
        model: PathBuf,
        /// Comma-separated sample counts, e.g. 1,8,27,64,125.
        #[arg(long, value_delimiter = ',')]
        samples: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Also write per-state reward curves as CSV.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl fmt::Display) -> Self {
        Failure {
            kind,
            message: message.to_string(),
        }
    }
}

impl From<caimdp_core::model::ModelError> for Failure {
    fn from(e: caimdp_core::model::ModelError) -> Self {
        Failure::new("model", e)
    }
}

impl From<caimdp_core::bellman::BellmanError> for Failure {
    fn from(e: caimdp_core::bellman::BellmanError) -> Self {
        Failure::new("solver", e)
    }
}

impl From<caimdp_core::experiments::ExperimentError> for Failure {
    fn from(e: caimdp_core::experiments::ExperimentError) -> Self {
        Failure::new("experiment", e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new("io", e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new("parse", e)
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn parse_actions(
    selector: &str,
    imdp: &Caimdp,
    seed: u64,
) -> Result<Vec<Vec<f64>>, Failure> {
    if selector == "vertices" {
        return Ok(imdp.action_set().vertices()?);
    }
    if let Some(count) = selector.strip_prefix("sample:") {
        let count: usize = count
            .parse()
            .map_err(|e| Failure::new("usage", format!("bad sample count: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return sampling::uniform_in_set(imdp.action_set(), count, &mut rng)
            .map_err(|m| Failure::new("sampling", m));
    }
    let json = fs::read_to_string(selector)?;
    let actions: Vec<Vec<f64>> = serde_json::from_str(&json)?;
    Ok(actions)
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::Validate { model, samples } => {
            let imdp = load_model(&model)?;
            let actions = imdp.default_validation_actions(samples);
            let report = validate_pointwise(&imdp, &actions)?;
            let passed = report.passed();
            #[derive(Serialize)]
            struct ValidateOutput<'a> {
                passed: bool,
                worst_violation: f64,
                #[serde(flatten)]
                report: &'a caimdp_core::model::ValidationReport,
            }
            emit(
                &ValidateOutput {
                    passed,
                    worst_violation: report.worst_violation(),
                    report: &report,
                },
                None,
            )?;
            Ok(if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Synthesize {
            model,
            horizon,
            gamma,
            tol,
            out,
            no_timing,
        } => {
            let imdp = load_model(&model)?;
            let cfg = OptimizerConfig::with_tolerance(tol);
            let mut report = synthesize(&imdp, horizon, gamma, &cfg)?;
            if no_timing {
                report.zero_timings();
            }
            emit(&report, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            model,
            policy,
            mode,
            gamma,
        } => {
            let imdp = load_model(&model)?;
            let policy: MarkovPolicy = serde_json::from_str(&fs::read_to_string(&policy)?)?;
            let mode = match mode {
                Mode::Worst => AdversaryMode::Worst,
                Mode::Best => AdversaryMode::Best,
            };
            let values = evaluate_policy(&imdp, &policy, gamma.unwrap_or(1.0), mode)?;
            #[derive(Serialize)]
            struct EvaluateOutput {
                mode: AdversaryMode,
                values: Vec<f64>,
            }
            emit(&EvaluateOutput { mode, values }, None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Discrete {
            model,
            actions,
            horizon,
            gamma,
            seed,
            out,
            no_timing,
        } => {
            let imdp = load_model(&model)?;
            let actions = parse_actions(&actions, &imdp, seed)?;
            let mut report: SynthesisReport = discrete_vi(&imdp, &actions, horizon, gamma)?;
            if no_timing {
                report.zero_timings();
            }
            emit(&report, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound {
            model_lo,
            model_hi,
            horizon,
            gamma,
            tol,
        } => {
            let lo = load_model(&model_lo)?;
            let hi = load_model(&model_hi)?;
            let cfg = OptimizerConfig::with_tolerance(tol);
            let report = suboptimality_bound(&lo, &hi, horizon, gamma, &cfg)?;
            emit(&report, None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            states,
            seed,
            eps,
            kappa,
            out,
        } => {
            let cfg = GeneratorConfig {
                n_states: states,
                eps,
                kappa,
                seed,
                ..Default::default()
            };
            let imdp = generate(&cfg)?;
            save_model(&imdp, &out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            model,
            samples,
            reps,
            horizon,
            gamma,
            tol,
            seed,
            out,
            json,
            curves,
            no_timing,
        } => {
            let imdp = load_model(&model)?;
            let cfg = OptimizerConfig::with_tolerance(tol);
            let mut report = compare(&imdp, &samples, reps, horizon, gamma, seed, &cfg)?;
            if no_timing {
                report.zero_timings();
            }
            let csv = report.to_csv();
            match out.as_deref() {
                Some(path) => fs::write(path, &csv)?,
                None => print!("{csv}"),
            }
            if let Some(path) = json {
                emit(&report, Some(&path))?;
            }
            if let Some(path) = curves {
                fs::write(path, report.curves_csv())?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            let line = serde_json::json!({
                "error": failure.kind,
                "message": failure.message,
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

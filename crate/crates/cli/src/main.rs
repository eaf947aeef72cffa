//! `fairboot` command-line runner.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 when a run fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairboot::experiment::{emit_gaussian, emit_sweep, run_bootstrap_sweep, run_gaussian_experiment, ExperimentConfig, ExperimentKind, OutputFormat};
use fairboot::gaussian::{CcmPair, CcmVector, PolarVec};
use fairboot::qcqp::{solve, QcqpInstance};
use fairboot::robust::{sector_from_ball, solve_robust_infinite, solve_robust_three, solve_robust_three_lifted, AnnularSector};
use fairboot::Error;

/// Environment variable overriding the worker count of a config.
const THREADS_ENV: &str = "FAIRBOOT_THREADS";

#[derive(Parser)]
#[command(name = "fairboot", version, about = "Fair prediction under uncertain sensitive attributes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a gaussian_missing or gaussian_noise experiment.
    Gaussian(RunArgs),
    /// Run a bootstrap_sweep training experiment.
    Sweep(RunArgs),
    /// Solve one QCQP (or its robust version) and print the solution as JSON.
    Solve(SolveArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; also read from FAIRBOOT_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    /// Comma-separated b_yx.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    b_yx: Vec<f64>,
    /// Comma-separated (estimated) b_ex.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    b_ex: Vec<f64>,
    #[arg(long)]
    epsilon: f64,
    /// Robust solve over the sector around the ball of this radius.
    #[arg(long, conflicts_with_all = ["delta", "phi"])]
    tau: Option<f64>,
    /// Robust solve over an explicit sector (2-D only): radial slack.
    #[arg(long, requires = "phi")]
    delta: Option<f64>,
    /// Angular half-width in radians.
    #[arg(long, requires = "delta")]
    phi: Option<f64>,
    /// Use the infinite-constraint solver instead of the three-point one.
    #[arg(long)]
    infinite: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) => 2,
        _ => 3,
    }
}

fn load(args: &RunArgs, expected: &[ExperimentKind]) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if !expected.contains(&cfg.experiment) {
        return Err(Error::Config(format!("experiment {:?} cannot run under this subcommand", cfg.experiment)));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let env_threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?),
        Err(_) => None,
    };
    if let Some(t) = args.threads.or(env_threads) {
        cfg.threads = Some(t);
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gaussian(args) => {
            let cfg = load(&args, &[ExperimentKind::GaussianMissing, ExperimentKind::GaussianNoise])?;
            let report = run_gaussian_experiment(&cfg)?;
            for f in &report.failures {
                eprintln!("trial failed: {} at {} (trial {}): {}", f.method, f.grid_value, f.trial, f.message);
            }
            for p in emit_gaussian(&report, &cfg.output_dir, cfg.format)? {
                println!("{}", p.display());
            }
        }
        Command::Sweep(args) => {
            let cfg = load(&args, &[ExperimentKind::BootstrapSweep])?;
            let report = run_bootstrap_sweep(&cfg)?;
            for f in &report.failures {
                eprintln!("trial failed: {} at epsilon {} (trial {}): {}", f.method, f.epsilon, f.trial, f.message);
            }
            for p in emit_sweep(&report, &cfg.output_dir, cfg.format)? {
                println!("{}", p.display());
            }
        }
        Command::Solve(a) => {
            if a.b_yx.len() != a.b_ex.len() {
                return Err(Error::InvalidArgument("b_yx and b_ex must have the same length".into()));
            }
            let b_yx = CcmVector::new(a.b_yx.clone(), CcmPair::Yx);
            let b_ex = CcmVector::new(a.b_ex.clone(), CcmPair::Ex);
            let out = match (a.tau, a.delta.zip(a.phi)) {
                (None, None) => serde_json::to_value(solve(&QcqpInstance::new(b_yx, b_ex, a.epsilon)?)?)?,
                (Some(tau), None) if a.b_yx.len() > 2 => {
                    let (lifted, sol) = solve_robust_three_lifted(&a.b_yx, &a.b_ex, tau, a.epsilon)?;
                    serde_json::json!({ "a_star": lifted, "plane_solution": sol })
                }
                (tau, explicit) => {
                    if a.b_yx.len() != 2 {
                        return Err(Error::InvalidArgument("an explicit sector needs 2-D vectors".into()));
                    }
                    let sector = match (tau, explicit) {
                        (Some(t), _) => sector_from_ball(&b_ex, t)?.sector,
                        (None, Some((delta, phi))) => {
                            let p = b_ex.polar()?;
                            AnnularSector::new(p.r, p.theta, delta, phi)?
                        }
                        (None, None) => unreachable!(),
                    };
                    let y = PolarVec::from_cartesian([a.b_yx[0], a.b_yx[1]]);
                    let sol = if a.infinite { solve_robust_infinite(y, &sector, a.epsilon)? } else { solve_robust_three(y, &sector, a.epsilon)? };
                    serde_json::json!({ "sector": sector, "solution": sol })
                }
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

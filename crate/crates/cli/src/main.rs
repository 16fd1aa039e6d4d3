use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::warn;

use kolmo_core::experiment::{
    emit_plots, run_stages, ExperimentConfig, RunReport, Stage, StageStatus,
};
use kolmo_core::{par, Error};

/// Environment variable holding the worker count of the parallel pool.
const WORKERS_ENV: &str = "KOLMO_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "kolmo",
    version,
    about = "Green-kernel bound experiments for Kolmogorov operators"
)]
struct Cli {
    /// Seed for the random certificate sample points.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to runs/<name>.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Grid-refinement multiplier of the stability checks.
    #[arg(long, global = true)]
    refine: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Static and time-dependent Lyapunov checks.
    Certify { config: PathBuf },
    /// Kernel slice and the potential-free comparison kernel.
    SolveKernel { config: PathBuf },
    /// Moment, zeta and kernel bound verification.
    VerifyBounds { config: PathBuf },
    /// Truncated-diffusion convergence sweep.
    ApproxSweep { config: PathBuf },
    /// Every configured stage.
    Run { config: PathBuf },
    /// Plot-ready CSV files from a run directory.
    EmitPlots { run_dir: PathBuf },
}

fn validation_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::Expression(_)
            | Error::Json(_)
    )
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if validation_error(e) { 1 } else { 3 })
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(refine) = cli.refine {
        cfg.refine = refine;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(report: &RunReport) {
    for s in &report.stages {
        let tag = match s.status {
            StageStatus::Pass => "PASS",
            StageStatus::Fail => "FAIL",
            StageStatus::Error => "ERROR",
            StageStatus::Skipped => "SKIP",
        };
        println!(
            "{:<8} {tag:<5} {:>8.2}s",
            format!("{:?}", s.stage).to_lowercase(),
            s.wall_seconds
        );
        for m in &s.messages {
            println!("         {m}");
        }
    }
    for w in &report.warnings {
        warn!("{w}");
    }
    println!("report: {}", report.output.join("report.json").display());
}

fn run(cli: &Cli, config: &Path, stages: &[Stage]) -> ExitCode {
    let cfg = match load(cli, config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_stages(&cfg, stages) {
        Ok(report) => {
            print_report(&report);
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => par::configure_workers(n),
            _ => {
                eprintln!("error: {WORKERS_ENV} must be a positive integer, got '{v}'");
                return ExitCode::from(1);
            }
        }
    }
    match &cli.command {
        Command::Certify { config } => run(&cli, config, &[Stage::Certify]),
        Command::SolveKernel { config } => run(&cli, config, &[Stage::Solve]),
        Command::VerifyBounds { config } => run(&cli, config, &[Stage::Moments, Stage::Bounds]),
        Command::ApproxSweep { config } => run(&cli, config, &[Stage::Approx]),
        Command::Run { config } => run(&cli, config, &Stage::ALL),
        Command::EmitPlots { run_dir } => match emit_plots(run_dir) {
            Ok(m) => {
                for f in &m.emitted {
                    println!("emitted {f}");
                }
                for (f, why) in &m.missing {
                    println!("missing {f}: {why}");
                }
                for w in &m.warnings {
                    eprintln!("warning: {w}");
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}

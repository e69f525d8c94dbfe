use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use heavytraffic::exec::with_threads;
use heavytraffic::harness::{run, Command, ExperimentConfig};
use heavytraffic::Execution;

#[derive(Parser)]
#[command(name = "heavytraffic", version, about = "Heavy-traffic Gaussian approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Draw one realization per ladder point and write its points and path.
    Simulate(Common),
    /// Check the Palm identity on the bundled models and the configured one.
    PalmCheck(Common),
    /// Compare empirical covariances with the limit kernel.
    CovarianceCheck(Common),
    /// Evaluate Stein residuals and derivative bounds.
    SteinCheck(Common),
    /// Estimate expectation gaps along the n ladder and fit their rate.
    RateStudy(Common),
    /// Print the explicit error bounds.
    Bounds(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides any seed in the config.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Run replications on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::PalmCheck(a) => (Command::PalmCheck, a),
        Sub::CovarianceCheck(a) => (Command::CovarianceCheck, a),
        Sub::SteinCheck(a) => (Command::SteinCheck, a),
        Sub::RateStudy(a) => (Command::RateStudy, a),
        Sub::Bounds(a) => (Command::Bounds, a),
    };
    let mut config = ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    config.seed = Some(args.seed);
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let summary = with_threads(args.threads, || run(&config, command, &args.out, exec))
        .with_context(|| format!("{command} failed"))?;
    print!("{}", summary.text);
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    Ok(summary.all_passed())
}

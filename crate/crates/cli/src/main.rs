//! Batch runner: configuration in, CSV/JSON artifacts out.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::{Experiment, RunConfig};
use run::Runner;

#[derive(Parser)]
#[command(
    name = "kinfp",
    about = "Spectral simulator for a stochastically forced kinetic Fokker-Planck equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (default: ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (0 = all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// permit lambda >= 1 (instability demonstrations)
    #[arg(long)]
    override_lambda: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one noise realization and export the capture series
    Simulate(CommonArgs),
    /// Monte Carlo over realizations: mean and standard-error series
    Ensemble(CommonArgs),
    /// Fit an exponential decay rate to an ensemble-mean series
    DecayFit(CommonArgs),
    /// Time-averaged invariant-measure functionals
    Invariant(CommonArgs),
    /// Coupled two-trajectory contraction experiment
    Mixing(CommonArgs),
    /// Run the full identity and oracle suite
    Validate(CommonArgs),
    /// Couple the spectral solver to the particle oracle on one path
    OracleCompare(CommonArgs),
}

impl Command {
    fn split(&self) -> (Experiment, &CommonArgs) {
        match self {
            Command::Simulate(a) => (Experiment::Simulate, a),
            Command::Ensemble(a) => (Experiment::Ensemble, a),
            Command::DecayFit(a) => (Experiment::DecayFit, a),
            Command::Invariant(a) => (Experiment::Invariant, a),
            Command::Mixing(a) => (Experiment::Mixing, a),
            Command::Validate(a) => (Experiment::Validate, a),
            Command::OracleCompare(a) => (Experiment::OracleCompare, a),
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            RunConfig::parse(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::parse("")?,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if args.override_lambda {
        config.override_lambda = true;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = cli.command.split();
    match try_run(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_run(experiment: Experiment, args: &CommonArgs) -> Result<()> {
    let config = load_config(args)?;
    if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out_dir = run::resolve_out_dir(args.out.as_deref(), "out");
    let runner = Runner::new(config, out_dir)?;
    run::write_echo(&runner)?;
    runner.run(experiment)
}

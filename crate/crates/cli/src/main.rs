mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shadowlab::Error;

use crate::commands::Context;
use crate::config::{ConfigError, ExperimentConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

/// Finite-horizon shadowing experiments for free semigroup actions.
///
/// Without --config every setting takes its default: the unit disk with the
/// swap and halving maps under the alternating word, horizon H = 10000,
/// tail fraction 0.5, delta 0.4, epsilon 0.1, alpha 0.5, tol 0.01, mesh 0.1.
///
/// Exit codes: 0 success, 1 integrity or I/O failure, 2 config error,
/// 3 precondition rejected, 4 resource cap exceeded.
#[derive(Parser)]
#[command(name = "shadowlab", version)]
struct Cli {
    /// JSON experiment config (must carry "schema_version": 1).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for generated orbits and blocks [default: config seed, 0].
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Horizon H, at least 10 [default: config horizon, 10000].
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<usize>,

    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Worker threads; affects speed only.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Input artifact: an orbit file, or a CSV sequence for `cesaro`.
    /// Overrides the config's "input".
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a corrupted pseudo-orbit (orbit.json).
    Generate,
    /// Classify a pseudo-orbit under every pseudo-orbit notion (classify.json).
    Classify,
    /// Repair an ergodic pseudo-orbit into an average pseudo-orbit.
    Repair,
    /// Extract a density-zero set from a Cesàro-null sequence.
    Cesaro,
    /// Concatenate generated blocks and certify the asymptotic average.
    Concat,
    /// Search the net for average and (M, α) shadowing points.
    Search,
    /// Tracking bound on the disk example (example_disk.csv).
    ExampleDisk,
    /// Generate, repair, classify and search; emit the verdict matrix.
    EquivalenceSuite,
}

enum Failure {
    Config(ConfigError),
    Core(Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Core(e) => match e {
                Error::Parameter { .. } | Error::Range { .. } | Error::Domain { .. } => EXIT_CONFIG,
                Error::Precondition(_) => EXIT_PRECONDITION,
                Error::Resource { .. } => EXIT_RESOURCE,
                _ => EXIT_FAILURE,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(h) = cli.horizon {
        config.horizon = h;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Failure> {
    let config = load_config(&cli).map_err(Failure::Config)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config(ConfigError("`--threads` must be at least 1".into())));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(ConfigError(format!("`--threads`: {e}"))))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Core(e.into()))?;
    let ctx = Context {
        config,
        out: cli.out,
        input: cli.input,
    };
    let result = match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Classify => commands::classify(&ctx),
        Command::Repair => commands::run_repair(&ctx),
        Command::Cesaro => commands::cesaro(&ctx),
        Command::Concat => commands::concat(&ctx),
        Command::Search => commands::search(&ctx),
        Command::ExampleDisk => commands::example_disk(&ctx),
        Command::EquivalenceSuite => commands::equivalence_suite(&ctx),
    };
    result.map_err(Failure::Core)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

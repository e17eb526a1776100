//! `conjugate` — simulate conjugate processes, estimate their covariance
//! operators and run the Monte Carlo studies, writing plot-ready CSV and JSON.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "conjugate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config file layered over the subcommand's defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Seed override (applied after the config file and --set).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    workers: usize,
    /// Full-scale replication count, 10000 per n (montecarlo only).
    #[arg(long, global = true)]
    full: bool,
    /// Dotted-key override, e.g. `--set measure.scale=2` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sample path of the two-state example, one row per jump.
    Simulate,
    /// Lag-1 covariance kernel and the operator kernel on a quadrature grid.
    Estimate,
    /// Eigendecomposition of the true or estimated operator.
    Spectrum,
    /// Exact ψ-mixing coefficients and factorization checks of a finite model.
    Mixing,
    /// Replicated Ĉ₁(0, 0) boxplot study.
    Montecarlo,
    /// Convergence-rate study of the operator estimator.
    Rate,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(conjugate::Error),
    /// A computed result failed an internal consistency check.
    Assertion(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use conjugate::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Assertion(_) => 4,
            CliError::Core(e) => match e {
                E::Config(_) | E::Usage(_) => 2,
                E::Io(_) | E::Serde(_) => 3,
                E::Numeric(_) => 4,
                E::Resource(_) => 5,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Assertion(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<conjugate::Error> for CliError {
    fn from(e: conjugate::Error) -> Self {
        CliError::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("conjugate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if cli.full && !matches!(cli.command, Command::Montecarlo) {
        return Err(CliError::Config("--full applies to the montecarlo subcommand only".into()));
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cli.workers)))?;
    let opts = commands::Options {
        config: cli.config.as_deref(),
        out: &cli.out,
        seed: cli.seed,
        full: cli.full,
        set: &cli.set,
    };
    pool.install(|| match cli.command {
        Command::Simulate => commands::simulate(&opts),
        Command::Estimate => commands::estimate(&opts),
        Command::Spectrum => commands::spectrum(&opts),
        Command::Mixing => commands::mixing(&opts),
        Command::Montecarlo => commands::montecarlo(&opts),
        Command::Rate => commands::rate(&opts),
    })
}

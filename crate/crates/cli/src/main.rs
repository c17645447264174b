//! `hj`: evaluate, scan and trace viscosity solutions from a TOML run config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, flags or inputs. Exit code 2.
    #[error("{0}")]
    Config(String),
    /// A verification suite ran and failed. Exit code 1.
    #[error("{0}")]
    Suite(String),
}

impl From<hj_core::Error> for CliError {
    fn from(e: hj_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "hj", version, about = "Hopf formula, superdifferentials and generalized characteristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate u and the minimizer count on a space-time grid (points of Ω̄ only).
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// nt,nx[,ny,...]
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimal energy over the superdifferential on a spatial grid at time t (points of Ω only).
    SingularScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        t: f64,
        /// nx[,ny,...]
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Follow a generalized characteristic.
    Trace {
        #[arg(long)]
        config: PathBuf,
        /// t0,x0[,x1,...]
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one invariant suite and write a JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce the one-dimensional two-well example and print a pass table.
    Example {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    Monotonicity,
    Dissipation,
    Persistence,
    Identity,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HJ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("HJ_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve { config, grid, out } => commands::solve(&config::load(&config)?, &grid, &out),
        Command::SingularScan { config, t, grid, out } => {
            commands::singular_scan(&config::load(&config)?, t, &grid, &out)
        }
        Command::Trace {
            config,
            start,
            dt,
            tmax,
            out,
        } => commands::trace(&config::load(&config)?, &start, dt, tmax, &out),
        Command::Verify { suite, config, out } => commands::verify(&config::load(&config)?, suite, &out),
        Command::Example { eps } => commands::example(eps),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hj: {e}");
            match e {
                CliError::Suite(_) => ExitCode::from(1),
                CliError::Config(_) => ExitCode::from(2),
            }
        }
    }
}

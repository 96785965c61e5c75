//! `reactmix`: run simulations, evaluate the compactness functional on snapshots,
//! and drive the property and oracle suites.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 solver abort,
//! 3 verification failure.

mod compact;
mod error;
mod manifest;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "reactmix", version, about = "Reactive multicomponent Stokes mixtures on a periodic interval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configuration and write diagnostics, snapshots and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the seeded property suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: u64,
    },
    /// Evaluate the compactness functional on snapshot files.
    Compact {
        /// Glob matching snapshot files.
        #[arg(long)]
        snapshots: String,
        /// Comma-separated kernel widths.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3])]
        h: Vec<f64>,
        /// Also report the fitted log-Gronwall envelope.
        #[arg(long)]
        envelope: bool,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle cross-checks.
    Oracle {
        /// Replace every registered tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() {
    let Ok(raw) = std::env::var("REACTMIX_THREADS") else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring REACTMIX_THREADS={raw:?}; expected a positive integer"),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => run::cmd_run(&config, &out),
        Command::Check { seed, cases } => verify::cmd_check(seed, cases),
        Command::Compact {
            snapshots,
            h,
            envelope,
            out,
        } => compact::cmd_compact(&snapshots, &h, envelope, out.as_deref()),
        Command::Oracle { tolerance, out } => verify::cmd_oracle(tolerance, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

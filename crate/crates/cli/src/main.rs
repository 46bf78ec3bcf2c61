//! `pohozaev`: solve, verify, check, sweep and convergence studies from a
//! JSON configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pohozaev::defaults;

use crate::commands::{Failure, Format, Sink};
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "pohozaev", version, about = "Pohozaev identities and non-existence criteria for elliptic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file (a sweep spec for `sweep`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path: a directory for `solve` and `sweep`, a report file otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Relative residual gate for identity checks.
    #[arg(long, global = true)]
    gate: Option<f64>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem; writes solution.csv and report.json.
    Solve,
    /// Evaluate the Pohozaev identity on a fresh or supplied solution.
    Verify {
        /// Solution CSV files (one per pair for general systems).
        #[arg(long)]
        solution: Vec<PathBuf>,
        /// Identity constants, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Option<Vec<f64>>,
    },
    /// Report non-existence verdicts for the configured problem.
    Check,
    /// Classify and probe a grid of power exponents; writes sweep.csv and sweep.svg.
    Sweep,
    /// Residual convergence under grid refinement.
    Convergence {
        /// Grid levels (node counts), comma separated; at least three.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Failure> {
    match jobs {
        Some(0) => Err(Failure::Config("--jobs must be positive".into())),
        Some(j) => {
            rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| Failure::Io(e.to_string()))
        }
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = cli.config.clone().ok_or_else(|| Failure::Config("--config is required".into()))?;
    if let Some(g) = cli.gate.filter(|g| !(*g > 0.0)) {
        return Err(Failure::Config(format!("--gate must be positive, got {g}")));
    }
    set_jobs(cli.jobs)?;
    let dir = || cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let sink = |out: Option<PathBuf>| Sink { out, force: cli.force, format: cli.format };
    match &cli.command {
        Command::Solve => commands::cmd_solve(&RunConfig::load(&config)?, &dir(), &sink(None)),
        Command::Verify { solution, a } => {
            let gate = cli.gate.unwrap_or(defaults::VERIFY_GATE);
            commands::cmd_verify(&RunConfig::load(&config)?, solution, a.clone(), gate, &sink(cli.out.clone()))
        }
        Command::Check => commands::cmd_check(&RunConfig::load(&config)?, &sink(cli.out.clone())),
        Command::Sweep => commands::cmd_sweep(&config, cli.gate, &dir(), &sink(None)),
        Command::Convergence { levels } => {
            commands::cmd_convergence(&RunConfig::load(&config)?, levels.clone(), &sink(cli.out.clone()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

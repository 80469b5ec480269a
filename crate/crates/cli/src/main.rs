//! `ffc`: trajectory ensembles, the absorbing walk, the exact averaged
//! channel, exponent fits and target-state diagnostics from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CompareArgs, FitArgs, OracleArgs, TargetArgs, TrajectoryArgs, WalkArgs};
use crate::config::Failure;

#[derive(Parser, Debug)]
#[command(name = "ffc", version, about = "Measurement-feedback control of spin chains and its absorbing-walk description")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FFC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a trajectory ensemble and write its statistics.
    Trajectory(TrajectoryArgs),
    /// Absorbing-walk solver: decay rates, exponents, evolution, noisy fixed point, dispersion.
    Walk(WalkArgs),
    /// Integrate the exact averaged channel on the density matrix.
    Oracle(OracleArgs),
    /// Fit a dynamical exponent to one or more decay curves.
    Fit(FitArgs),
    /// Relative deviation between two bond-summed decay curves.
    Compare(CompareArgs),
    /// Build a target state and report its entanglement and dark-state residual.
    Target(TargetArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::config_err("threads", "need at least one thread"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Trajectory(a) => commands::trajectory(a),
        Command::Walk(a) => commands::walk(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Fit(a) => commands::fit(a),
        Command::Compare(a) => commands::compare(a),
        Command::Target(a) => commands::target(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ffc: {e}");
            ExitCode::from(e.code())
        }
    }
}

/// `-` or no path means standard output.
pub(crate) fn is_stdout(p: &Option<PathBuf>) -> bool {
    p.as_ref().is_none_or(|p| p.as_os_str() == "-")
}

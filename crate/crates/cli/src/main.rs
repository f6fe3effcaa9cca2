//! `fpp`: generate instances, run solvers, evaluate bounds and reproduce
//! the benchmark presets.
//!
//! Exit codes: 0 success, 1 I/O, 2 usage, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgAction, Parser, Subcommand};
use fpp_harness::HarnessError;

use commands::{BenchArgs, CrbArgs, GenArgs, SolveArgs};
use config::{overlay, ConfigFile, Usage};

#[derive(Debug, Parser)]
#[command(name = "fpp", version, about = "Phase retrieval by feasible point pursuit")]
struct Cli {
    /// TOML file; its [gen], [solve], [crb] and [bench] tables set defaults
    /// for the matching command, and flags override them.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving every output file (default: current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a measurement ensemble and signal, and simulate measurements.
    Gen(GenArgs),
    /// Recover a signal from an instance file.
    Solve(SolveArgs),
    /// Evaluate a Cramér-Rao bound at an instance's ground truth.
    Crb(CrbArgs),
    /// Run a benchmark preset and write its figure data.
    Bench(BenchArgs),
}

fn run(cli: Cli) -> Result<()> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let out_dir = cli.out_dir.or(file.out_dir).unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Gen(a) => commands::gen(overlay(&a, file.gen.as_ref(), "gen")?, &out_dir),
        Command::Solve(a) => commands::solve(overlay(&a, file.solve.as_ref(), "solve")?, &out_dir),
        Command::Crb(a) => commands::crb(overlay(&a, file.crb.as_ref(), "crb")?, &out_dir),
        Command::Bench(a) => commands::bench(overlay(&a, file.bench.as_ref(), "bench")?, &out_dir),
    }
}

/// The first typed error in the chain decides the exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(h) = cause.downcast_ref::<HarnessError>() {
            return match h {
                HarnessError::Core(c) if c.is_numerical() => 3,
                h if h.is_usage() => 2,
                _ => 1,
            };
        }
        if let Some(c) = cause.downcast_ref::<fpp_core::Error>() {
            return if c.is_numerical() { 3 } else { 2 };
        }
        if let Some(j) = cause.downcast_ref::<serde_json::Error>() {
            return if j.is_io() { 1 } else { 2 };
        }
        if cause.is::<std::io::Error>() {
            return 1;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

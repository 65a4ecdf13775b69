use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use belief_engine::replay::FoldKey;

mod commands;
mod config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "belief-engine", version, about = "Belief-engine simulations, replay calibration and trace audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed override (trial seed for simulations, fold seed for replay).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single agent against a scripted opponent, sweeping u then a.
    Sweep,
    /// Two-agent debates over the configured profile pairings.
    Debate,
    /// Fit (u, a) to recorded stance changes with grouped cross-validation.
    Replay {
        /// Case file, overriding the config.
        #[arg(long)]
        cases: Option<PathBuf>,
        /// Fold key, overriding the config.
        #[arg(long)]
        key: Option<FoldKey>,
        /// Fail on any malformed case line.
        #[arg(long)]
        strict: bool,
        /// Also write an audit trace replaying every case at its fold's fit.
        #[arg(long)]
        trace: bool,
    },
    /// Check a JSONL trace's chain and recompute every belief update.
    TraceVerify { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; --help and --version are not
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::TraceVerify { path } => commands::trace_verify(&path),
        command => commands::Context::load(cli.config.as_deref(), cli.out, cli.seed).and_then(|ctx| match command {
            Command::Sweep => commands::sweep(&ctx),
            Command::Debate => commands::debate(&ctx),
            Command::Replay {
                cases,
                key,
                strict,
                trace,
            } => commands::replay(
                &ctx,
                &commands::ReplayOptions {
                    cases,
                    key,
                    strict,
                    trace,
                },
            ),
            Command::TraceVerify { .. } => unreachable!(),
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

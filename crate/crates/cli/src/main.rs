use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

/// Adaptive nudge engine: simulate experiments, recommend item pairs,
/// assign arms and analyze impact.
#[derive(Parser, Debug)]
#[command(name = "nudge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, env = "NUDGE_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, env = "NUDGE_OUT")]
    out: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true, env = "NUDGE_SEED")]
    seed: Option<u64>,

    /// Significance level for every test; overrides the config.
    #[arg(long, global = true, env = "NUDGE_ALPHA")]
    alpha: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run a synthetic experiment and analyze it.
    Simulate,
    /// Item-pair recommendations for the eligible cohort.
    Recommend,
    /// Thompson-sampling arm assignments for the eligible cohort.
    Assign,
    /// Impact analysis of existing logs.
    Analyze,
    /// Re-render report files from a saved report.json.
    Report,
}

#[derive(Debug)]
pub enum CliError {
    Core(nudge_core::Error),
    Config(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_analysis_infeasible() => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => f.write_str(m),
        }
    }
}

impl From<nudge_core::Error> for CliError {
    fn from(e: nudge_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub struct Args {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let args = Args {
        config: cli.config.ok_or_else(|| CliError::config("--config is required (or set NUDGE_CONFIG)"))?,
        out: cli.out.ok_or_else(|| CliError::config("--out is required (or set NUDGE_OUT)"))?,
        seed: cli.seed,
        alpha: cli.alpha,
    };
    if !args.config.is_file() {
        return Err(CliError::config(format!("config file not found: {}", args.config.display())));
    }
    match cli.command {
        Command::Simulate => commands::simulate(&args),
        Command::Recommend => commands::recommend(&args),
        Command::Assign => commands::assign(&args),
        Command::Analyze => commands::analyze(&args),
        Command::Report => commands::report(&args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("nudge: error: {line}");
            ExitCode::from(e.exit_code())
        }
    }
}

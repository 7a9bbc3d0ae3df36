//! `conetrace <subcommand> --config path [--out dir] [--threads N] [-v]`

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conetrace::ConeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Math(#[from] ConeError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Math(ConeError::InvalidInput(_) | ConeError::Io(_) | ConeError::Csv(_) | ConeError::Json(_)) => 2,
            CliError::Math(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "conetrace", version, about = "Heat-trace asymptotics for cone operators of Fuchs type")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Boundary spectrum and weight-line ellipticity.
    Spectrum,
    /// Parameter-ellipticity conditions (i)-(iii).
    Ellipticity,
    /// Heat trace over the t-grid, with a Dunford cross-check.
    Trace,
    /// Fit the small-time expansion to a heat-trace table.
    Fit,
    /// Weakly parametric expansion coefficients.
    Wp,
    /// Trace followed by fit.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Ellipticity => "ellipticity",
            Command::Trace => "trace",
            Command::Fit => "fit",
            Command::Wp => "wp",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let config = config::RunConfig::parse(text)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let dir = cli.out.clone().or_else(|| config.output_dir.as_ref().map(|d| base.join(d))).unwrap_or_else(|| PathBuf::from("."));
    let out = output::Output::new(dir, output::config_hash(&bytes), cli.verbose)?;
    out.log(format!("{} with {}", cli.command.name(), path.display()));
    let ctx = commands::Context { config: &config, base: &base, out: &out };
    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Ellipticity => commands::ellipticity(&ctx),
        Command::Trace => commands::trace(&ctx),
        Command::Fit => commands::fit(&ctx),
        Command::Wp => commands::wp(&ctx),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

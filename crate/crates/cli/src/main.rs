//! Batch front-end: assumption checks, table builds, verification, plot
//! exports and timings, all driven by one TOML file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "parametrix", version, about = "Heat-kernel tables for non-symmetric Lévy-type operators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: PathBuf,
    /// Output directory, overriding `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scaling, coefficient, drift and ε₀-window checks.
    CheckAssumptions(Common),
    /// Build p₀, q₀, q₁…q_n, q and p tables with a manifest.
    Build {
        #[command(flatten)]
        common: Common,
        /// Build even when the assumption checks fail.
        #[arg(long)]
        force: bool,
    },
    /// Residual suite and envelope fit on a table directory.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Directory holding the tables; defaults to the output directory.
        tables: Option<PathBuf>,
    },
    /// Slices, envelopes and Monte-Carlo overlays for plotting.
    Export {
        #[command(flatten)]
        common: Common,
        /// Directory holding the tables; defaults to the output directory.
        tables: Option<PathBuf>,
    },
    /// Time the frozen density and a full build.
    Bench(Common),
}

/// Failure classes with their exit codes.
pub enum Failure {
    /// Checks ran and did not pass (exit 1).
    Check(String),
    /// Bad config, missing input or unusable request (exit 2).
    Usage(String),
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, action) = match &cli.cmd {
        Cmd::CheckAssumptions(c) => (c, 0),
        Cmd::Build { common, .. } => (common, 1),
        Cmd::Verify { common, .. } => (common, 2),
        Cmd::Export { common, .. } => (common, 3),
        Cmd::Bench(c) => (c, 4),
    };
    let cfg = RunConfig::load(&common.config)?;
    let out = cfg.out_dir(common.out.as_deref());
    match (action, &cli.cmd) {
        (0, _) => commands::check_assumptions(&cfg, &out),
        (1, Cmd::Build { force, .. }) => commands::build(&cfg, &out, *force),
        (2, Cmd::Verify { tables, .. }) => commands::verify(&cfg, tables.as_deref().unwrap_or(&out), &out),
        (3, Cmd::Export { tables, .. }) => commands::export(&cfg, tables.as_deref().unwrap_or(&out), &out),
        _ => commands::bench(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

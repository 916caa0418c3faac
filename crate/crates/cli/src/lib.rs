//! Command-line driver for the `ion-reservoir` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::{RunOptions, RunReport};
pub use config::ExperimentConfig;
pub use output::OutputPaths;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ion_reservoir::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ion-reservoir",
    version,
    about = "Pulsed multireservoir engineering experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; the JSON summary goes next to it. Overrides `output_path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the Fock-space dimension.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stage-by-stage state synthesis, F∞ and F₀ per stage.
    Synth(Common),
    /// Squeezed-state protection against dissipation.
    Protect(Common),
    /// Steady state of the configured channels.
    Steady(Common),
    /// Two-step optical pumping of the electronic levels.
    Reset(Common),
    /// Quench-regime Otto cycle efficiency over a sweep.
    Otto {
        #[command(flatten)]
        common: Common,
        /// Add trace-based energetics on truncated states.
        #[arg(long)]
        numeric: bool,
        /// Prepare the cycle states by collisional synthesis (implies --numeric).
        #[arg(long)]
        synthesize: bool,
    },
    /// Built-in invariant suite.
    Validate(Common),
}

fn load(common: &Common, required: bool) -> Result<Option<ExperimentConfig>, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if required => {
            return Err(CliError::Config("--config PATH is required".into()));
        }
        None => return Ok(None),
    };
    if let Some(d) = common.dim {
        cfg.dim = d;
        cfg.check()?;
    }
    Ok(Some(cfg))
}

fn paths(common: &Common, cfg: &ExperimentConfig) -> OutputPaths {
    OutputPaths::new(
        common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output_path)),
    )
}

fn report_guards(report: &RunReport) -> Result<(), CliError> {
    let failed: Vec<_> = report.guards.iter().filter(|g| !g.passed).collect();
    for g in &report.guards {
        let tag = if g.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", g.name, g.detail);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<_> = failed.iter().map(|g| g.name.as_str()).collect();
        Err(CliError::Validation(names.join(", ")))
    }
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(common) => {
            let cfg = load(&common, false)?;
            let report = validate::run_suite(cfg.as_ref())?;
            for c in &report.checks {
                println!("{c}");
            }
            if let Some(out) = &common.out {
                output::write_summary(out, &serde_json::to_value(&report)?)?;
            }
            if report.passed() {
                Ok(())
            } else {
                let names: Vec<_> = report
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(CliError::Validation(names.join(", ")))
            }
        }
        Command::Otto {
            common,
            numeric,
            synthesize,
        } => {
            let cfg = load(&common, true)?.expect("required");
            let opts = RunOptions {
                numeric,
                synthesize,
            };
            let report = commands::otto_cmd(&cfg, opts, &paths(&common, &cfg))?;
            report_guards(&report)
        }
        Command::Synth(common) => run_with(&common, commands::synth),
        Command::Protect(common) => run_with(&common, commands::protect),
        Command::Steady(common) => run_with(&common, commands::steady),
        Command::Reset(common) => run_with(&common, commands::reset),
    }
}

fn run_with(
    common: &Common,
    f: fn(&ExperimentConfig, &OutputPaths) -> Result<RunReport, CliError>,
) -> Result<(), CliError> {
    let cfg = load(common, true)?.expect("required");
    let report = f(&cfg, &paths(common, &cfg))?;
    report_guards(&report)
}

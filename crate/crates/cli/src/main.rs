//! `ctp-lab`: scenario runner for the CTP lab.
//!
//! ```text
//! ctp-lab <scenario> --config <path> [--set key=value]... [--sweep key=v1,v2,...]
//! ```
//!
//! Exit codes: 0 on success, 1 on input errors, 2 on numerical failures.
//! Diagnostics are single `code: message` lines on stderr.

mod config;
mod error;
mod scenario;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::ScenarioConfig;
use crate::error::RunError;
use crate::scenario::{run, Scenario};
use crate::sweep::{sweep, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "ctp-lab", version, about = "Closed-time-path action numerical lab")]
struct Cli {
    /// Scenario to run.
    #[arg(value_enum)]
    scenario: Scenario,

    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: PathBuf,

    /// Override a configuration entry, `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Sweep one scalar parameter, `key=v1,v2,...`.
    #[arg(long, value_name = "KEY=VALUES")]
    sweep: Option<String>,
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let mut cfg = ScenarioConfig::from_file(&cli.config)?;
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    match &cli.sweep {
        Some(text) => {
            let spec = SweepSpec::parse(text)?;
            sweep(cli.scenario, &cfg, &spec)?;
        }
        None => {
            run(cli.scenario, &cfg, &cfg.output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let line = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("input: {}", line.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `magwell`: constants, spectra, normal forms and trajectories from a field config.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Failure, Sink};
use config::{ConfigError, ConfigValue, Preset, RunConfig};

#[derive(Parser)]
#[command(name = "magwell", version, about = "Semiclassical magnetic-well eigenvalues, normal forms and trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// `key = value` run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for the output files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated semiclassical parameters.
    #[arg(long, global = true, value_name = "LIST", allow_hyphen_values = true)]
    hbar: Option<String>,
    /// Nodes per side of the oracle grid.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
    /// Jet degree cap.
    #[arg(long, global = true, value_name = "D")]
    degree: Option<i32>,
    /// Normal-form order.
    #[arg(long, global = true, value_name = "N")]
    order: Option<u32>,
    #[arg(long, global = true, value_parser = ["figure1", "circle", "quadratic"])]
    preset: Option<String>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Model constants along both routes.
    Constants,
    /// Oracle eigenvalues against the model, with a fit.
    Compare,
    /// Birkhoff normalization of a series file.
    Birkhoff {
        /// Series file; defaults to the `series` key.
        series: Option<PathBuf>,
    },
    /// Trajectory, field line and adiabatic diagnostics.
    Trajectory,
    /// Lowest eigenvalues of the discretized operator.
    Oracle,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        preset: cli.preset.as_deref().map(|p| p.parse::<Preset>()).transpose().map_err(ConfigError)?,
        hbar: cli.hbar.as_deref().map(Vec::<f64>::read).transpose().map_err(|e| ConfigError(format!("--hbar: {e}")))?,
        grid: cli.grid,
        degree: cli.degree,
        order: cli.order,
        ..RunConfig::default()
    };
    let merged = file.overlay(&flags);
    merged.validate()?;
    let resolved = merged.resolved();
    resolved.validate()?;
    Ok(resolved)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let config = effective_config(cli)?;
    if cli.print_config {
        return Ok(config.to_text());
    }
    let sink = Sink::new(cli.out.clone())?;
    match &cli.command {
        Command::Constants => commands::cmd_constants(&config, &sink),
        Command::Compare => commands::cmd_compare(&config, &sink),
        Command::Birkhoff { series } => commands::cmd_birkhoff(&config, series.as_deref(), &sink),
        Command::Trajectory => commands::cmd_trajectory(&config, &sink),
        Command::Oracle => commands::cmd_oracle(&config, &sink),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (kind, err) = match &f {
                Failure::Config(e) => ("config error", e),
                Failure::Numerical(e) => ("numerical failure", e),
            };
            eprintln!("magwell: {kind}: {err:#}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

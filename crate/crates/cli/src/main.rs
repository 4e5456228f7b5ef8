use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::CommonArgs;

/// Tamed Euler, Milstein and order-1.5 Taylor schemes for SDEs with
/// superlinearly growing coefficients.
#[derive(Debug, Parser)]
#[command(name = "tamed-taylor", version)]
struct Cli {
    /// Worker threads for the path loop (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strong errors against a fine reference grid and the fitted rate.
    Rate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Terminal states (and optionally trajectories) at one step count.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write every path's trajectory.
        #[arg(long)]
        trajectory: bool,
    },
    /// Parameter ranges and grid checks of assumptions A-1 to A-5.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Moment exponent p₀ for A-2 (defaults to 2(5ρ + 1)).
        #[arg(long)]
        p0: Option<f64>,
        /// Exponent p₁ for A-3 (defaults to 3).
        #[arg(long)]
        p1: Option<f64>,
    },
    /// Empirical E|X_T|^p per step count.
    Moments {
        #[command(flatten)]
        common: CommonArgs,
        /// Even moment order (defaults to 4).
        #[arg(long)]
        p: Option<u32>,
        /// Add columns for the scheme with the opposite taming setting.
        #[arg(long)]
        contrast: bool,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Rate { common } => commands::rate(&common, cli.threads),
        Command::Simulate { common, trajectory } => {
            commands::simulate(&common, cli.threads, trajectory)
        }
        Command::Check { common, p0, p1 } => commands::check(&common, cli.threads, p0, p1),
        Command::Moments {
            common,
            p,
            contrast,
        } => commands::moments(&common, cli.threads, p, contrast),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

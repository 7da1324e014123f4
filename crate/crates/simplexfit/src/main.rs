//! `simplexfit`: fit simplex regression models, compute residual envelopes
//! and local-influence diagnostics, run Monte Carlo studies, and simulate
//! datasets, all driven by one JSON run configuration.

mod commands;
mod config;
mod error;
mod generator;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "simplexfit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-likelihood fit; writes fit.json and residuals.csv.
    Fit(Common),
    /// Simulated envelope of the weighted residuals.
    Envelope(Common),
    /// Local-influence curvatures and case-deletion tables.
    Influence(Common),
    /// Monte Carlo study of the residual distribution.
    McStudy(Common),
    /// Draw a dataset from a simplex regression model.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

type Handler = fn(&RunConfig) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, command): (&Common, Handler) = match &cli.command {
        Command::Fit(c) => (c, commands::cmd_fit),
        Command::Envelope(c) => (c, commands::cmd_envelope),
        Command::Influence(c) => (c, commands::cmd_influence),
        Command::McStudy(c) => (c, commands::cmd_mc_study),
        Command::Simulate(c) => (c, commands::cmd_simulate),
    };
    let overrides = Overrides { seed: common.seed, out_dir: common.out_dir.clone() };
    let cfg = RunConfig::load(&common.config, &overrides)?;
    command(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simplexfit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Experiment driver for the well-balanced Euler solver.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Command;
use config::{FileConfig, Overrides, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "wbeuler", version, about = "Well-balanced finite-volume experiments for the Euler equations with gravity")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run an experiment at each resolution and write snapshots.
    Run(Flags),
    /// Run a resolution sweep and write error tables with observed rates.
    Convergence(Flags),
    /// Compute (or load from cache) the reference solution of a perturbed experiment.
    Reference(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// atmosphere, atmosphere_perturbed, polytrope, polytrope_perturbed or blast.
    #[arg(long)]
    experiment: Option<String>,
    /// well_balanced (or wb), unbalanced or both.
    #[arg(long)]
    scheme: Option<String>,
    /// Comma separated list of resolutions, e.g. 32,64,128.
    #[arg(long, value_delimiter = ',')]
    resolutions: Option<Vec<usize>>,
    #[arg(long, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    #[arg(long = "t-end", allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve(flags: Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(p) => FileConfig::from_path(p)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        experiment: flags.experiment,
        scheme: flags.scheme,
        resolutions: flags.resolutions,
        amplitude: flags.amplitude,
        t_end: flags.t_end,
        output: flags.out,
    };
    RunConfig::resolve(file, overrides)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Run(f) => (Command::Run, f),
        Sub::Convergence(f) => (Command::Convergence, f),
        Sub::Reference(f) => (Command::Reference, f),
    };
    let result = resolve(flags).and_then(|cfg| commands::execute(command, &cfg).map(|_| cfg));
    match result {
        Ok(cfg) => {
            println!("artifacts written to {}", cfg.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

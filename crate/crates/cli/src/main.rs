mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

/// Approximate Bayesian computation for epidemic model selection.
#[derive(Debug, Parser)]
#[command(name = "epiabc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model menu to a dataset.
    Infer {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV with columns epidemic,year,a,m,c_tilde.
        #[arg(long)]
        data: PathBuf,
    },
    /// Simulation study on synthetic datasets from a built-in scenario.
    Study {
        #[command(flatten)]
        common: Common,
        /// Built-in scenario: a or b.
        #[arg(long)]
        scenario: String,
        /// Number of synthetic datasets.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Forward-simulate an ensemble of observed series.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Model name, e.g. indirect-sde-binom. Defaults to the scenario's
        /// generating model.
        #[arg(long)]
        model: Option<String>,
        /// Number of replicate datasets.
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Scenario supplying parameters and observation years.
        #[arg(long, default_value = "a")]
        scenario: String,
        /// TOML file with `[params]` and `[[ics]]` overriding the scenario's
        /// true values.
        #[arg(long)]
        theta: Option<PathBuf>,
        /// Dataset whose years and (a, m) replace the scenario design.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Earlier `infer` output: simulate at the model's marginal modes
        /// using that run's dataset.
        #[arg(long, conflicts_with_all = ["theta", "data"])]
        from_run: Option<PathBuf>,
    },
    /// Recompute the model table and parameter summaries of an `infer` run.
    Summarize {
        /// Directory written by `infer`.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("inference failed: {0}")]
    Smc(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Smc(_) => 4,
        }
    }
}

impl From<epiabc::output::OutputError> for CliError {
    fn from(e: epiabc::output::OutputError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Infer { common, data } => commands::infer(&common, &data),
        Command::Study {
            common,
            scenario,
            n,
        } => commands::study(&common, &scenario, n),
        Command::Simulate {
            common,
            model,
            reps,
            scenario,
            theta,
            data,
            from_run,
        } => commands::simulate(
            &common,
            &commands::SimulateArgs {
                model,
                reps,
                scenario,
                theta,
                data,
                from_run,
            },
        ),
        Command::Summarize { out } => commands::summarize(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epiabc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

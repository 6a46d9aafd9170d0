//! `bscb`: train the rate predictor, build black-spot maps, replay schemes,
//! sweep parameters and compare runs.
//!
//! Every command writes its artifacts plus a `run.json` into `--out`. Passing
//! that `run.json` back as `--config` with the same command reproduces the
//! directory byte for byte.

mod commands;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use bscb_core::schemes::SchemeKind;
use bscb_core::sim::LogEpochs;
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bscb", version, about = "Black-spot-aware bandit scheduling of sensor uploads")]
pub struct Cli {
    /// TOML config, or a run.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the data-rate forest on the training drives.
    TrainPredictor,
    /// Cluster prediction errors into a black-spot map.
    BuildBlackspots(ModelArgs),
    /// Replay one scheme over the configured epochs.
    Simulate(SimulateArgs),
    /// Simulate once per value of a parameter grid.
    Sweep(SweepArgs),
    /// Compare simulate runs against the periodic baseline.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainPredictor => "train-predictor",
            Command::BuildBlackspots(_) => "build-blackspots",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Trained forest; trained in-process when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SchemeArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    /// Black-spot map; built in-process for bscb when absent.
    #[arg(long)]
    pub map: Option<PathBuf>,

    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<SchemeKind>,

    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,

    /// Learning state saved by an earlier simulate run.
    #[arg(long)]
    pub resume_state: Option<PathBuf>,

    /// Epochs whose decisions go to events.csv: none, last or all.
    #[arg(long, value_parser = parse_log_epochs)]
    pub log_epochs: Option<LogEpochs>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,

    /// w, delta, dt_max or periodic_interval.
    #[arg(long)]
    pub parameter: Option<String>,

    /// Comma-separated grid, e.g. 0.5,0.6,0.7.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directories of simulate runs.
    pub runs: Vec<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse().map_err(|e: bscb_core::Error| e.to_string())
}

fn parse_log_epochs(s: &str) -> Result<LogEpochs, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected none, last or all, got `{s}`"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim_end().to_string())),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::FAILURE
}

//! Command-line driver: scenario generation, training, evaluation and paired
//! comparison runs with reproducible manifests.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "beamtrack", version, about = "Joint handover and beam tracking simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve a scenario into scene, sites and trajectory JSON.
    Generate(GenerateArgs),
    /// Train the proposed agent or the learned-handover baseline.
    Train(TrainArgs),
    /// Run a policy or baseline over evaluation realizations.
    Evaluate(EvaluateArgs),
    /// Train both learners and evaluate all three methods on paired seeds.
    Compare(CompareArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Proposed,
    Baseline1,
    Baseline2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Baseline1 => "baseline1",
            Method::Baseline2 => "baseline2",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub scene: PathBuf,
    /// Master seed; overrides the scenario's own.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use only the first K sites.
    #[arg(long)]
    pub num_bs: Option<usize>,
    /// Trajectory length M in slots.
    #[arg(long)]
    pub traj_slots: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Training hyperparameters JSON; unspecified fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Checkpoint written by `train` (learned methods only).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub realizations: usize,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub realizations: usize,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Arguments after the subcommand, minus `--out-dir`, as recorded in manifests.
fn recorded_args() -> Vec<String> {
    let mut out = Vec::new();
    let mut it = std::env::args().skip(2);
    while let Some(a) = it.next() {
        if a == "--out-dir" {
            it.next();
        } else if !a.starts_with("--out-dir=") {
            out.push(a);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command, recorded_args()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

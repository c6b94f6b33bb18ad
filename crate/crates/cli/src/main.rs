//! `warpchart` command-line front end.
//!
//! Exit codes: 0 success (no alarm), 1 usage or configuration error,
//! 2 alarm raised, 3 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Error caused by bad flags or configuration (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// What a successful command observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    Alarm,
}

#[derive(Parser, Debug)]
#[command(name = "warpchart", version, about = "Distribution-valued process monitoring with rank-based control charts")]
pub struct Cli {
    /// Flat JSON config file (or a previous run manifest); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic data.
    Simulate(SimulateArgs),
    /// Calibrate a control limit by simulation and append it to a table.
    Calibrate(CalibrateArgs),
    /// Fit the FPC model on training data and save it.
    Train(TrainArgs),
    /// Train, tune and monitor a stream; exit code 2 on alarm.
    Monitor(MonitorArgs),
    /// Estimate detection power over a grid of mixing strengths.
    PowerStudy(PowerStudyArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// 50,000-sample series with a shape change halfway (raw CSV).
    Appendix1,
    /// Mixture change, T = 130, change at 100.
    Scenario1,
    /// Mixture change, T = 200, change at 100.
    Scenario2,
    /// T = 230, change at 200, outliers at 160-163.
    Scenario2Outliers,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub generator: Generator,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mixing strength for the scenario generators.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub ic_arl: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Calibration table to append to (created if missing).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Where the densities come from.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Raw feature CSV (`value` or `timestamp,value`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Density-sequence CSV, one density per row.
    #[arg(long, conflicts_with = "input")]
    pub pdfs: Option<PathBuf>,
    /// Equal-length subgroups of this many samples.
    #[arg(long)]
    pub subgroup_size: Option<usize>,
    /// One subgroup per calendar day (needs timestamps).
    #[arg(long, conflicts_with = "subgroup_size")]
    pub daily: bool,
    #[arg(long)]
    pub theta_widen: Option<f64>,
    #[arg(long)]
    pub fence_k: Option<f64>,
}

/// Model and chart settings shared by `train` and `monitor`.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Control limit; looked up from the calibration table when omitted.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub ic_arl: Option<f64>,
    /// warp-rank, pdf-fpca-cc or direct-chart.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub var_frac: Option<f64>,
    #[arg(long)]
    pub alpha_mix: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub alpha_direct: Option<f64>,
    /// Extra calibration table searched before the shipped one.
    #[arg(long)]
    pub calibration_table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Model JSON output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory (created if missing).
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PowerStudyArgs {
    /// 1 (T = 130) or 2 (T = 200).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Comma-separated mixing strengths.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub ic_arl: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub calibration_table: Option<PathBuf>,
    /// Report CSV; a `.json` metadata sidecar is written next to it.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<warpchart::Error>() {
        Some(warpchart::Error::InvalidParameter(_) | warpchart::Error::UnknownMethod(_)) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Alarm) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

//! `softrank` command-line tool.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad or conflicting flags),
//! 3 for data errors (unparsable or inconsistent inputs), 4 for I/O failures.
//! `SOFTRANK_THREADS` caps the worker threads used by `detect`.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "softrank", version, about = "Rank energy statistics and change-point detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic series.
    Simulate(SimulateArgs),
    /// Compute RE (epsilon 0) or sRE between two samples.
    Stat(StatArgs),
    /// Scan a series with sliding windows and pick change points.
    Detect(DetectArgs),
    /// Score a trace or a detection list against labels.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in preset.
    #[arg(long, value_parser = ["fig1"], required_unless_present = "spec", conflicts_with = "spec")]
    pub preset: Option<String>,
    /// JSON array of segment specs instead of a preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub segment_length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Entropic regularizer; 0 selects the exact (hard rank) statistic.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = softrank::ot::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = softrank::ot::DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Divide costs by their maximum before solving (changes the scale of epsilon).
    #[arg(long)]
    pub normalize_cost: bool,
}

#[derive(Debug, Args)]
pub struct StatArgs {
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Input CSVs start with a header row.
    #[arg(long)]
    pub header: bool,
    /// CSV of target grid points in [0,1]^d instead of the Halton grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub window: usize,
    #[arg(long)]
    pub delta: usize,
    /// Threshold; accepts `inf`.
    #[arg(long, allow_hyphen_values = true, required_unless_present = "calibrate_null", conflicts_with = "calibrate_null")]
    pub eta: Option<f64>,
    /// Set eta to a quantile of this many permutation-null statistics.
    #[arg(long, value_name = "K")]
    pub calibrate_null: Option<usize>,
    /// Quantile used with --calibrate-null.
    #[arg(long, default_value_t = 0.95)]
    pub null_level: f64,
    /// Seed for the permutation null.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threshold the mn/(m+n)-scaled statistic.
    #[arg(long)]
    pub scaled: bool,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Zero rows added at both ends before scanning.
    #[arg(long)]
    pub pad: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// trace.csv written by `detect`.
    #[arg(long, required_unless_present = "detections", conflicts_with = "detections")]
    pub trace: Option<PathBuf>,
    /// detections.json written by `detect`.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    /// Matching margin; defaults to --delta.
    #[arg(long)]
    pub margin: Option<usize>,
    /// Local-maximum range used on a trace.
    #[arg(long)]
    pub delta: Option<usize>,
    /// Threshold for F1 on a trace.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = configure_threads() {
        eprintln!("error: {err}");
        return ExitCode::from(err.exit_code());
    }
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Stat(args) => commands::stat(&args),
        Command::Detect(args) => commands::detect(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), commands::CliError> {
    let Ok(value) = std::env::var("SOFTRANK_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| commands::CliError::Usage(format!("SOFTRANK_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| commands::CliError::Usage(format!("cannot configure thread pool: {e}")))
}

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use mtica::sim::campaign::{Algorithm, Experiment};
use mtica::SourceFamily;

/// Measure-transformed independent component analysis.
#[derive(Debug, Parser)]
#[command(name = "mtica", version, arg_required_else_help = true)]
pub struct Cli {
    /// Log more on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a separation matrix for a CSV data file (rows are samples).
    Separate(SeparateArgs),
    /// Run a Monte-Carlo campaign and write trials.csv and summary.json.
    Experiment(ExperimentArgs),
    /// Separate a synthetic mixture and print the Amari error of each algorithm.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Input CSV, one sample per row, one channel per column.
    #[arg(long)]
    pub input: PathBuf,

    /// Directory for B.csv, sources.csv and diagnostics.json.
    #[arg(long)]
    pub outdir: PathBuf,

    /// emtica or gmtica [default: gmtica].
    #[arg(long)]
    pub algo: Option<Algorithm>,

    /// Number of test-points [default: 30].
    #[arg(long)]
    pub m: Option<usize>,

    /// Gaussian MT-function width [default: 1].
    #[arg(long)]
    pub tau: Option<f64>,

    /// Master seed; falls back to the config file, then MTICA_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,

    /// The input starts with a header row to skip.
    #[arg(long)]
    pub header: bool,

    /// TOML or JSON file with default parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// sensitivity-identical, sensitivity-random, outliers or mismatch.
    #[arg(long)]
    pub experiment: Option<Experiment>,

    /// Algorithms to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub algo: Vec<Algorithm>,

    /// Samples per trial [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,

    /// Sources and channels [default: 5].
    #[arg(long)]
    pub p: Option<usize>,

    /// Test-points per run [default: 30].
    #[arg(long)]
    pub m: Option<usize>,

    /// Gaussian MT-function width [default: 1].
    #[arg(long)]
    pub tau: Option<f64>,

    /// Trials per condition [default: 50].
    #[arg(long)]
    pub trials: Option<usize>,

    /// Master seed; falls back to the config file, then MTICA_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,

    /// SNR grid in dB for the mismatch experiment, comma separated.
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_db: Vec<f64>,

    /// Outlier counts for the outliers experiment, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub outliers: Vec<usize>,

    /// Size of each injected outlier.
    #[arg(long)]
    pub outlier_magnitude: Option<f64>,

    /// Fixed source laws, one per channel (overrides random draws).
    #[arg(long, value_delimiter = ',')]
    pub sources: Vec<SourceFamily>,

    /// Pool of source laws for identical and random draws.
    #[arg(long, value_delimiter = ',')]
    pub families: Vec<SourceFamily>,

    /// Directory for trials.csv and summary.json.
    #[arg(long)]
    pub outdir: PathBuf,

    /// Worker threads [default: all cores]. Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Add a runtime_ms column (makes trials.csv non-reproducible).
    #[arg(long)]
    pub timings: bool,

    /// TOML or JSON campaign file, or a trials.csv whose echo to rerun.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Algorithms to run, comma separated [default: both].
    #[arg(long, value_delimiter = ',')]
    pub algo: Vec<Algorithm>,

    #[arg(long, default_value_t = 2000)]
    pub n: usize,

    #[arg(long, default_value_t = 4)]
    pub p: usize,

    #[arg(long, default_value_t = 30)]
    pub m: usize,

    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,

    /// Master seed; falls back to MTICA_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Also write the mixture (mixed.csv) and mixing matrix (mixing.csv) here.
    #[arg(long)]
    pub outdir: Option<PathBuf>,
}

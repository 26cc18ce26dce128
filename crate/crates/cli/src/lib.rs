//! Library side of the `atlasbench` binary: scene generation, QA encoding, planner training, inference,
//! evaluation and plotting.

mod commands;
pub mod config;
pub mod error;
mod manifest;
mod plot;

use atlasbench_core::metrics::L2Convention;
use atlasbench_core::qa::{ChainSpec, Task};
use atlasbench_core::tokens::RpEmbedding;
use clap::{Parser, Subcommand, ValueEnum};
pub use error::CliError;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "atlasbench", version, about = "Desk-scale 3D-tokenized driving QA benchmark")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Chain-of-thought order for planning answers, e.g. V-A-P.
    #[arg(long, global = true)]
    pub chain: Option<ChainSpec>,
    #[arg(long, global = true)]
    pub rp_embedding: Option<RpEmbedding>,
    /// Ego footprint as LENGTHxWIDTH meters.
    #[arg(long, global = true, value_parser = config::parse_ego_dims)]
    pub ego_dims: Option<[f64; 2]>,
    #[arg(long, global = true, value_parser = parse_l2)]
    pub l2_convention: Option<L2Convention>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_l2(s: &str) -> Result<L2Convention, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Greedy,
    Sample,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic scenes as JSONL.
    Gen {
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Build QA pairs from scenes.
    Encode {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "detection,lane,planning")]
        tasks: Vec<Task>,
    },
    /// Train the planner on a QA dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "planning")]
        tasks: Vec<Task>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Drop the `<query>` slots' 3D tokens (text-only ablation).
        #[arg(long)]
        no_queries: bool,
    },
    /// Decode answers for a QA dataset with a trained checkpoint.
    Infer {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Greedy)]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 96)]
        max_new: usize,
        #[arg(long, value_delimiter = ',', default_value = "planning")]
        tasks: Vec<Task>,
    },
    /// Score predictions against scenes.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        /// Row label in the CSV table.
        #[arg(long)]
        method: Option<String>,
    },
    /// Emit SVG figures and the planning table.
    Plot {
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, requires = "scenes")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        scenes: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        max_plots: usize,
    },
}

/// Size the global rayon pool from `ATLASBENCH_THREADS`, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ATLASBENCH_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("ATLASBENCH_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    commands::run(cli)
}

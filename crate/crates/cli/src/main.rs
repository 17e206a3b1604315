//! `reviewjudge` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use reviewjudge::corpus::LengthUnit;
use reviewjudge::preprocess::FrequencyStage;

/// A problem with how the tool was invoked or configured; exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "reviewjudge",
    version,
    about = "Detect computer-generated product reviews"
)]
pub struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic stage; overrides the config file.
    #[arg(long, global = true, env = "REVIEWJUDGE_SEED")]
    pub seed: Option<u64>,
    /// Threads for word2vec training and batch scoring.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Dataset CSV; overrides `dataset_path`.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Where files are written; overrides `output_dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Suppress human-readable tables; print JSON only.
    #[arg(long, global = true)]
    pub json_only: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitChoice {
    Train,
    Validation,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Category statistics of the dataset; writes stats.json.
    Stats {
        #[arg(long, default_value = "chars")]
        length_unit: LengthUnit,
    },
    /// Clean every review; writes cleaned.jsonl and a frequency table.
    Preprocess {
        #[arg(long, default_value = "cleaned")]
        stage: FrequencyStage,
        /// Entries kept in the frequency table, 0 for all.
        #[arg(long, default_value_t = 100)]
        top: usize,
    },
    /// Train skip-gram vectors on the cleaned corpus.
    TrainW2v {
        #[arg(long)]
        fixed_window: bool,
        /// Also write the vectors in text format here.
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Full training run: preprocess, word2vec, Siamese network.
    Train {
        #[arg(long)]
        fixed_window: bool,
        #[arg(long)]
        shared_weights: bool,
        /// Load word_vectors.w2v from the output directory instead of retraining.
        #[arg(long)]
        reuse_vectors: bool,
    },
    /// Sigmoid and fuzzy metrics of a checkpoint; writes metrics.json.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "validation")]
        split: SplitChoice,
    },
    /// Score one review text.
    Classify {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        text: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

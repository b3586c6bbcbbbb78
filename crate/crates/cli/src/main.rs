//! `bans`: the summarization pipeline from raw JSONL to evaluation reports.
//!
//! Exit status is 0 on success, 1 on a domain error (empty corpus,
//! divergence, fingerprint mismatch) and 2 on usage or I/O errors.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use bans_core::train::OptimizerKind;
use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "bans", version, about = "Abstractive Bengali news summarization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Strip URLs and non-Bengali text, then apply word-count bounds.
    Clean(CleanArgs),
    /// Print corpus statistics as JSON.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Build a vocabulary file from a cleaned corpus.
    BuildVocab(VocabArgs),
    /// Shuffle and split a corpus into train/val/test files.
    Split(SplitArgs),
    /// Train a model and write checkpoints and an epoch report.
    Train(TrainArgs),
    /// Greedy-decode summaries, one output line per input.
    Summarize(SummarizeArgs),
    /// Score generated summaries against references.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct CleanArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON report of dropped records and tokens.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    article_min: usize,
    #[arg(long, default_value_t = 76)]
    article_max: usize,
    #[arg(long, default_value_t = 3)]
    summary_min: usize,
    #[arg(long, default_value_t = 12)]
    summary_max: usize,
}

#[derive(Args, Debug)]
struct VocabArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = bans_core::text::DEFAULT_MIN_FREQ)]
    min_freq: usize,
    #[arg(long, default_value_t = bans_core::text::DEFAULT_MAX_SIZE)]
    max_size: usize,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    ratios: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training corpus (cleaned JSONL).
    #[arg(long)]
    data: PathBuf,
    /// Validation corpus; without it the training loss selects the best epoch.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// JSON file with training options; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    embed: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

impl TrainArgs {
    fn overrides(&self) -> FileConfig {
        FileConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            clip_norm: self.clip_norm,
            seed: self.seed,
            patience: self.patience,
            optimizer: self.optimizer,
            embed: self.embed,
            hidden: self.hidden,
            ..FileConfig::default()
        }
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    match s {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        _ => Err(format!("unknown optimizer {s:?} (expected adam or sgd)")),
    }
}

#[derive(Args, Debug)]
struct ModelInput {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to vocab.tsv next to the checkpoint.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = bans_core::model::DEFAULT_MAX_DECODE_LEN)]
    max_len: usize,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["text", "input"])))]
struct SummarizeArgs {
    #[command(flatten)]
    model: ModelInput,
    /// A single article.
    #[arg(long)]
    text: Option<String>,
    /// JSONL corpus; one summary per record.
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelInput,
    #[arg(long)]
    data: PathBuf,
    /// Directory for eval_report.json and side_by_side.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Clean(a) => commands::clean(&a),
        Command::Stats { input } => commands::stats(&input),
        Command::BuildVocab(a) => commands::build_vocab(&a),
        Command::Split(a) => commands::split(&a),
        Command::Train(a) => commands::train(&a),
        Command::Summarize(a) => commands::summarize(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}

//! `authorscore`: ingest tweets, train per-author characterizers, score
//! tweets and correlate scores with popularity.
//!
//! Exit codes: 0 on success, 2 for usage or input validation errors, 3 for
//! failures after inputs were accepted.

mod commands;
mod manifest;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use authorscore::trainer::Method;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Relative input paths are resolved against this directory when it is set.
pub const DATA_DIR_ENV: &str = "AUTHORSCORE_DATA_DIR";

#[derive(Parser)]
#[command(name = "authorscore", version, about = "Author characterization scores for short texts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter and normalize a raw tweet corpus.
    Ingest(IngestArgs),
    /// Train one characterizer for one author.
    Train(TrainArgs),
    /// Accuracy of a trained model on labelled test files.
    Evaluate(EvaluateArgs),
    /// Score every tweet of a corpus with a trained model.
    Score(ScoreArgs),
    /// Bucket scores by percentile and correlate with popularity.
    Correlate(CorrelateArgs),
    /// Train and evaluate every (author, method) pair; writes grid.csv.
    Experiment(ExperimentArgs),
}

#[derive(Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub wordlist: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Tweets need strictly more tokens than this.
    #[arg(long, default_value_t = 10)]
    pub min_words: usize,
    #[arg(long, default_value_t = 5)]
    pub min_dictionary_words: usize,
    #[arg(long)]
    pub keep_retweets: bool,
    #[arg(long)]
    pub keep_media: bool,
    /// Do not require `lang == "en"` when a language tag is present.
    #[arg(long)]
    pub any_language: bool,
}

/// Hyperparameters shared by `train` and `experiment`.
#[derive(Args, Serialize, Clone)]
pub struct ModelArgs {
    /// Fraction of positives used for training.
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    #[arg(long, default_value_t = 500)]
    pub topics: usize,
    /// Document-topic prior; defaults to 50 / topics.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Gibbs sweeps when fitting the topic model.
    #[arg(long, default_value_t = 200)]
    pub lda_iterations: usize,
    /// Gibbs sweeps when inferring a document's topic mixture.
    #[arg(long, default_value_t = 50)]
    pub infer_iterations: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    /// Average n-gram probabilities geometrically instead of arithmetically.
    #[arg(long)]
    pub geometric: bool,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub author: String,
    /// Tweets of the author (other authors' rows are ignored).
    #[arg(long)]
    pub pos: PathBuf,
    /// Pool of tweets negatives are drawn from.
    #[arg(long)]
    pub negpool: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Iterative sampling rounds; classifier methods only.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Draw fresh negatives every round.
    #[arg(long, requires = "iterations")]
    pub resample: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Serialize)]
pub struct EvaluateArgs {
    /// Model directory (or a model.json file).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test_pos: PathBuf,
    #[arg(long)]
    pub test_neg: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Also write evaluation.csv and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct CorrelateArgs {
    /// Scored tweets (JSON Lines); may come from any model.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub buckets: usize,
    /// Number of top and bottom tweets in extremes.csv.
    #[arg(long, default_value_t = 50)]
    pub extremes: usize,
}

#[derive(Args, Serialize)]
pub struct ExperimentArgs {
    /// Tweets of all authors under study.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Negative pool; defaults to the corpus itself.
    #[arg(long)]
    pub negpool: Option<PathBuf>,
    /// Comma-separated author ids; defaults to every author with at least `--min-tweets`.
    #[arg(long, value_delimiter = ',')]
    pub authors: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub min_tweets: usize,
    /// Comma-separated methods; defaults to all methods usable with the given inputs.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tags an error with its exit class.
pub trait Classify<T> {
    fn usage(self, what: impl Display) -> CmdResult<T>;
    fn runtime(self, what: impl Display) -> CmdResult<T>;
}

impl<T, E: Display> Classify<T> for Result<T, E> {
    fn usage(self, what: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Usage(format!("{what}: {e}")))
    }

    fn runtime(self, what: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Runtime(format!("{what}: {e}")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Score(a) => commands::score(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

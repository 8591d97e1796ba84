//! `satbot` command-line tooling.

pub mod bench;
mod commands;
mod serve;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "satbot", version, about = "SAT coaching engine operator tools")]
pub struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true, default_value_t = 0, env = "SATBOT_SEED")]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a dataset by persona and write augmented pool files.
    Augment(AugmentArgs),
    /// Annotate pool files with empathy labels and raw fluency.
    Precompute(PrecomputeArgs),
    /// Accuracy and macro-F1 of an emotion classifier on a labelled set.
    EvalEmotion(EvalEmotionArgs),
    /// Accuracy and macro-F1 of an empathy scorer on annotated utterances.
    EvalEmpathy(EvalEmpathyArgs),
    /// Time retrieval over a grid of subset sizes and memory sizes.
    Bench(BenchArgs),
    /// Run the HTTP chat service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Restrict to these personas (default: all five).
    #[arg(long, value_delimiter = ',')]
    pub persona: Vec<String>,
    /// Directory for pool files; omit to print the count report only.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Separator between expressions inside one emotion cell.
    #[arg(long, default_value = "\n")]
    pub separator: String,
    /// Also route 70+ respondents to Robert and Gabrielle.
    #[arg(long)]
    pub seniors_in_older_personas: bool,
}

#[derive(Debug, Args)]
pub struct PrecomputeArgs {
    /// Directory of pool files written by `augment`.
    #[arg(long)]
    pub pools: PathBuf,
    /// Output directory (default: rewrite in place).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset whose raw rewritings train each persona's language model.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Empathy annotations (utterance,label1,label2,label3) to train the
    /// naive Bayes scorer; defaults to the bundled demo set.
    #[arg(long, conflicts_with = "empathy_labels")]
    pub annotations: Option<PathBuf>,
    /// Labels from an external empathy model (text,label), used verbatim.
    #[arg(long)]
    pub empathy_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0.16)]
    pub max_fluency: f64,
    #[arg(long, default_value_t = 0.01)]
    pub repeat_penalty: f64,
    #[arg(long, default_value = "\n")]
    pub separator: String,
    #[arg(long)]
    pub seniors_in_older_personas: bool,
}

#[derive(Debug, Args)]
pub struct EvalEmotionArgs {
    /// Labelled test set (text,label).
    #[arg(long)]
    pub test: PathBuf,
    /// Keyword lexicon (context,keyword,weight); defaults to the bundled one.
    #[arg(long, conflicts_with = "predictions")]
    pub lexicon: Option<PathBuf>,
    /// Predictions from an external model (text,label) to score instead.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Context reported when no keyword matches.
    #[arg(long, default_value = "sadness")]
    pub fallback: String,
}

#[derive(Debug, Args)]
pub struct EvalEmpathyArgs {
    /// Annotated test set (utterance,label1,label2,label3).
    #[arg(long)]
    pub test: PathBuf,
    /// Training annotations for naive Bayes; defaults to the bundled demo set.
    #[arg(long, conflicts_with = "predictions")]
    pub train: Option<PathBuf>,
    /// Predictions from an external model (text,label) to score instead.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Candidate subset sizes to sweep.
    #[arg(long, value_delimiter = ',', default_value = "15")]
    pub k: Vec<usize>,
    /// Memory sizes to sweep.
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub p: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Pool files to draw candidates from; defaults to the bundled demo pools.
    #[arg(long, conflicts_with = "synthetic_words")]
    pub pools: Option<PathBuf>,
    #[arg(long, default_value = "kai")]
    pub persona: String,
    /// Use a synthetic pool in which every utterance has exactly this many words.
    #[arg(long)]
    pub synthetic_words: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080, env = "SATBOT_PORT")]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1", env = "SATBOT_BIND")]
    pub bind: String,
    /// Directory with `pools/` and optional `flow.json`, `protocols.csv`,
    /// `risk_lexicon.csv`, `emotion_lexicon.csv`, `credentials.csv`.
    /// Without it the bundled demo corpus is served.
    #[arg(long, env = "SATBOT_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Credentials CSV (username,password_sha256).
    #[arg(long, env = "SATBOT_CREDENTIALS")]
    pub credentials: Option<PathBuf>,
    #[arg(long, default_value_t = 60, env = "SATBOT_IDLE_TIMEOUT_MINS")]
    pub idle_timeout_mins: u64,
    /// Retrieval weights as empathy,fluency,novelty.
    #[arg(long, default_value = "1.0,0.75,2.0", env = "SATBOT_WEIGHTS")]
    pub weights: String,
    /// Candidates scored per retrieval.
    #[arg(long, default_value_t = 15, env = "SATBOT_K")]
    pub k: usize,
}

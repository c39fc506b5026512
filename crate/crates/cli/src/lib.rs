//! `acrank`: generate data, prepare pairs, train embeddings and the ranker,
//! evaluate against popularity baselines and serve suggestions.
//!
//! Every subcommand writes its outputs atomically and records a run
//! manifest (resolved settings, seed, content hashes of inputs and outputs)
//! next to them. Settings can also come from a TOML file given with
//! `--config`; see [`config`].

pub mod config;
pub mod fsio;
pub mod manifest;

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "acrank", version, about = "Context-aware autocomplete ranking pipeline")]
pub struct Cli {
    /// TOML file with one table per subcommand; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session log, stats file, search stream and query list.
    GenSynthetic(GenSyntheticArgs),
    /// Split a session log into training pairs, validation pairs and evaluation samples.
    PrepareData(PrepareDataArgs),
    /// Train query embeddings on a search stream or session log.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Train the pairwise neural ranker and write a checkpoint.
    TrainRanker(TrainRankerArgs),
    /// Score rankers on evaluation samples, overall and by context slice.
    Evaluate(EvaluateArgs),
    /// Serve suggestions over HTTP.
    Serve(ServeArgs),
    /// Print a checkpoint's configuration, layout and training history.
    InspectCheckpoint(InspectArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenSyntheticArgs {
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub sessions: Option<usize>,
    #[arg(long)]
    pub queries_per_cluster: Option<usize>,
    /// Fraction of sessions that carry past searches.
    #[arg(long)]
    pub context_rate: Option<f64>,
    /// Relevance bonus for queries in the session's topical cluster; larger
    /// values make the right completion depend more on past searches.
    #[arg(long)]
    pub context_weight: Option<f64>,
    /// Exponent of the click-position bias (0 disables it).
    #[arg(long)]
    pub position_bias: Option<f64>,
    /// Probability weight of clicking a shown query other than the intended one.
    #[arg(long)]
    pub distraction: Option<f64>,
    /// Fraction of sessions that end in a purchase.
    #[arg(long)]
    pub purchase_rate: Option<f64>,
    /// Users in the embedding search stream.
    #[arg(long)]
    pub search_users: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrepareDataArgs {
    /// Session log, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub sessions: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// gmv, unit or log1p_gmv.
    #[arg(long, default_value = "log1p_gmv")]
    pub weight_mode: String,
    /// Keep only sessions that led to a purchase.
    #[arg(long)]
    pub gmv_positive_only: bool,
    /// Skip malformed log lines instead of failing.
    #[arg(long)]
    pub skip_bad_lines: bool,
    /// Days in the stats series built from the training sessions.
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_SERIES_DAYS)]
    pub stats_days: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainEmbeddingsArgs {
    /// `ts<TAB>query[<TAB>user]` lines.
    #[arg(long, value_name = "FILE", conflicts_with = "sessions", required_unless_present = "sessions")]
    pub searches: Option<PathBuf>,
    /// Session log; past searches and submitted queries form the stream.
    #[arg(long, value_name = "FILE")]
    pub sessions: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 2)]
    pub min_count: u64,
    /// Also write the context vectors.
    #[arg(long)]
    pub include_context: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainRankerArgs {
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub validation: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub stats: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub embeddings: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Seeds initialization; shuffling and dropout use seed + 1.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 128)]
    pub query_units: usize,
    #[arg(long, default_value_t = 16)]
    pub lstm_units: usize,
    #[arg(long, default_value_t = 128)]
    pub context_units: usize,
    #[arg(long, default_value_t = 64)]
    pub head_units: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Train with unweighted pairwise loss.
    #[arg(long)]
    pub ablate_delta_ndcg: bool,
    /// Zero the context block at train and inference time.
    #[arg(long)]
    pub ablate_context: bool,
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_SERIES_DAYS)]
    pub stats_days: usize,
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_HALF_LIFE_DAYS)]
    pub half_life_days: f64,
    #[arg(long, default_value_t = acrank_core::features::DEFAULT_PAST_K)]
    pub past_k: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    pub eval: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub stats: PathBuf,
    /// Required with --checkpoint.
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Neural checkpoint to evaluate; repeatable.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Vec<PathBuf>,
    /// Popularity baselines to include (mpc, mpgc); repeatable.
    #[arg(long, default_values_t = vec!["mpc".to_string(), "mpgc".to_string()])]
    pub ranker: Vec<String>,
    /// Ranker the relative improvements are measured against.
    #[arg(long, default_value = "mpc")]
    pub baseline: String,
    /// Write the reports as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_SERIES_DAYS)]
    pub stats_days: usize,
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_HALF_LIFE_DAYS)]
    pub half_life_days: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    /// `query<TAB>popularity` lines; built from the stats when absent.
    #[arg(long, env = "ACRANK_TRIE", value_name = "FILE")]
    pub trie: Option<PathBuf>,
    #[arg(long, env = "ACRANK_STATS", value_name = "FILE")]
    pub stats: PathBuf,
    #[arg(long, env = "ACRANK_EMBEDDINGS", value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Neural checkpoints; the first is the default ranker.
    #[arg(long, env = "ACRANK_CHECKPOINT", value_name = "FILE", value_delimiter = ',')]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, env = "ACRANK_HOST", default_value = "127.0.0.1")]
    pub host: String,
    /// 0 binds an ephemeral port.
    #[arg(long, env = "ACRANK_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = acrank_core::trie::DEFAULT_SHORTLIST)]
    pub shortlist: usize,
    #[arg(long, default_value_t = 30)]
    pub context_ttl_minutes: i64,
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_SERIES_DAYS)]
    pub stats_days: usize,
    #[arg(long, default_value_t = acrank_core::stats::DEFAULT_HALF_LIFE_DAYS)]
    pub half_life_days: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InspectArgs {
    #[arg(value_name = "CHECKPOINT")]
    pub checkpoint: PathBuf,
    /// Write the full checkpoint, parameters included, as JSON.
    #[arg(long, value_name = "FILE")]
    pub export_json: Option<PathBuf>,
}

/// Parses `args` (program name first), applying `--config` if given.
pub fn parse_args<I, T>(args: I) -> Result<Cli>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let merged = config::merge_config_args(args)?;
    Ok(Cli::try_parse_from(merged).unwrap_or_else(|e| e.exit()))
}

pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(parse_args(args)?)
}

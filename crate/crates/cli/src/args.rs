use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "dnim",
    version,
    about = "Influence maximization on continuous-time dynamic graphs"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo estimation (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Base seed for every random quantity.
    #[arg(long, global = true)]
    pub rng_seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an edge list, print its summary and write the binary cache.
    Ingest(IngestArgs),
    /// Monte Carlo influence of a seed set.
    Evaluate(EvaluateArgs),
    /// Choose k seeds with one of the selectors.
    Select(SelectArgs),
    /// Train the Q-network agent.
    Train(TrainArgs),
    /// Run one diffusion realization.
    Simulate(SimulateArgs),
    /// Export node embeddings.
    Embed(EmbedArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DelimiterArg {
    Auto,
    Comma,
    Whitespace,
    Tab,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Edge list: `src dst timestamp [weight]` per line.
    pub input: PathBuf,
    /// Where to write the binary cache.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = DelimiterArg::Auto)]
    pub delimiter: DelimiterArg,
    /// Force a fourth weight column (ignored) on or off instead of inferring it.
    #[arg(long)]
    pub weights: Option<bool>,
    #[arg(long)]
    pub drop_loops: bool,
    /// Drop repeated `(src, dst, timestamp)` lines.
    #[arg(long)]
    pub dedup: bool,
    /// Keep only edges with timestamp at least this.
    #[arg(long, requires = "t_end")]
    pub t_start: Option<i64>,
    /// Keep only edges with timestamp at most this.
    #[arg(long, requires = "t_start")]
    pub t_end: Option<i64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GraphArg {
    /// Edge list or binary cache.
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SeedsArg {
    /// Comma-separated original node ids.
    #[arg(long, value_delimiter = ',', required_unless_present = "seeds_file")]
    pub seeds: Vec<i64>,
    /// JSON array of original ids, or a `select` output.
    #[arg(long, conflicts_with = "seeds")]
    pub seeds_file: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiffusionArgs {
    /// Activation probability per edge event.
    #[arg(long, default_value_t = 0.5)]
    pub mu: f64,
    /// Activity per activation: seconds, or a number with suffix s, min, h, d, w, mo.
    #[arg(long, default_value = "1mo", value_parser = crate::io::parse_duration)]
    pub t_act: i64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub seeds: SeedsArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub diffusion: DiffusionArgs,
    #[arg(long, default_value_t = dnim::oracle::EVAL_REPS)]
    pub reps: usize,
    /// Count active nodes in this many equal windows of one realization.
    #[arg(long, requires = "windows_out")]
    pub windows: Option<usize>,
    #[arg(long, requires = "windows")]
    pub windows_out: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Greedy,
    Degree,
    Random,
    Dnimrl,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub diffusion: DiffusionArgs,
    /// Replications per gain estimate (greedy).
    #[arg(long, default_value_t = dnim::oracle::REWARD_REPS)]
    pub reps: usize,
    /// Trained network (dnimrl).
    #[arg(long, required_if_eq("algorithm", "dnimrl"))]
    pub checkpoint: Option<PathBuf>,
    /// Append an `algorithm,k,seconds` row to this CSV.
    #[arg(long)]
    #[serde(skip)]
    pub timing: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, required_unless_present = "print_config")]
    pub graph: Option<PathBuf>,
    /// JSON with optional `agent`, `embedding` and `diffusion` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long, required_unless_present = "print_config")]
    pub checkpoint: Option<PathBuf>,
    /// Per-episode CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub seeds: SeedsArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub diffusion: DiffusionArgs,
    /// Write every activity interval as `node,start,end`.
    #[arg(long)]
    pub intervals_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArg,
    /// Trained network; without it a fresh network is built from `--config`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, conflicts_with = "checkpoint")]
    pub config: Option<PathBuf>,
    /// CSV destination (`node,z0,...`); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

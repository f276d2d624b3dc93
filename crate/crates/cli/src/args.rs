//! Command-line surface. Run flags come back as options so a config file
//! can fill the gaps: flags override the file, the file overrides defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "dpot",
    about = "Dynamic-planning GUI agent runtime and offline replay evaluation harness",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run episodes under a strategy and write traces.
    Run(Box<RunArgs>),
    /// Score traces against a dataset (no gateway needed).
    Score(ScoreArgs),
    /// Render a score report as a table.
    Report(ReportArgs),
    /// Generate a deterministic synthetic dataset.
    GenSynthetic(GenArgs),
    /// Check a dataset against the episode invariants.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Np,
    Sp,
    Dp,
    Dpot,
    #[value(name = "dpot-ref")]
    DpotRef,
    React,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Http,
    Scripted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GroundingArg {
    Model,
    Grammar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PoolArg {
    Subset,
    All,
}

#[derive(Args)]
pub struct RunArgs {
    /// Episode dataset (one JSON record per line).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Keep only these subset tags (repeatable).
    #[arg(long)]
    pub subset: Vec<String>,
    /// Agent strategy. [default: dpot]
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// ReAct history length in rounds, or "unbounded". [default: 4]
    #[arg(long)]
    pub history_len: Option<String>,
    /// Turn cap per episode. [default: the episode length]
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// Model backend. [default: scripted]
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Scripted responses file: per line {"episode_id", "responses": [..]}.
    #[arg(long)]
    pub scripts: Option<PathBuf>,
    /// Chat-completions base URL (http backend).
    #[arg(long)]
    pub base_url: Option<String>,
    /// Model name sent with each request. [default: gpt-4-vision-preview]
    #[arg(long)]
    pub model: Option<String>,
    /// [default: 300]
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// [default: 0]
    #[arg(long)]
    pub temperature: Option<f64>,
    /// References per episode for dpot-ref. [default: 2]
    #[arg(long)]
    pub reference_k: Option<usize>,
    /// Reference candidate pool for dpot-ref. [default: subset]
    #[arg(long, value_enum)]
    pub reference_pool: Option<PoolArg>,
    /// Use predicted actions from this prior run as reference histories
    /// instead of the corpus gold actions (dpot-ref).
    #[arg(long)]
    pub reference_traces: Option<PathBuf>,
    /// How chosen steps become actions. [default: model]
    #[arg(long, value_enum)]
    pub grounding: Option<GroundingArg>,
    /// External plans file: per line {"episode_id", "turn", "plan", "step"?}.
    #[arg(long)]
    pub plan_file: Option<PathBuf>,
    /// Run output directory (traces + manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Episodes to run concurrently. [default: 1]
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Store full prompt texts in traces instead of digests only.
    #[arg(long)]
    pub store_prompts: bool,
    /// Recorded in the run manifest for provenance.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional prompt token cap; oldest history drops first.
    #[arg(long)]
    pub prompt_budget: Option<u64>,
    /// Global dispatch cap in requests per minute (http backend).
    #[arg(long)]
    pub rate_limit: Option<u32>,
    /// Attach screenshot handles as image parts (http backend).
    #[arg(long)]
    pub multimodal: bool,
    /// TOML file mirroring these flags; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Run directory holding traces.jsonl.
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Weight the overall score by episode counts instead of averaging
    /// subset means.
    #[arg(long)]
    pub weighted: bool,
    /// Require typed text to match exactly for type-vs-type.
    #[arg(long)]
    pub strict_type_text: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Score report (JSON) produced by `score`.
    #[arg(long)]
    pub report: PathBuf,
    /// Output format: plain, csv, or json.
    #[arg(long, default_value = "plain")]
    pub format: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of episodes.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub min_steps: usize,
    #[arg(long, default_value_t = 9)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 10)]
    pub min_elements: usize,
    #[arg(long, default_value_t = 28)]
    pub max_elements: usize,
    /// Output dataset path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub subset: Vec<String>,
}

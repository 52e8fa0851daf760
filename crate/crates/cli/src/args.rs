use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wsan-sched", version, about = "Sampling-rate schedulability of a WSAN sensor node")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form minimum sampling period.
    Analytic(AnalyticArgs),
    /// Model-check one sampling period.
    Check(CheckArgs),
    /// Minimum periods over a (C_S, N) grid.
    Sweep(SweepArgs),
    /// Model-check one period and write the counterexample, if any.
    Trace(TraceArgs),
    /// Re-execute a counterexample against the model.
    Replay(ReplayArgs),
    /// Print the instantiated actor network as JSON.
    DumpNetwork(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Tdma,
    Bmac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Eq6,
    Eq7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LowerBoundArg {
    Wcet,
    Bcet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
    Json,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Analytical,
    Mc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Linear,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DeadlineArg {
    Exclusive,
    Inclusive,
}

/// Task parameters; flags override `--config`.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// JSON parameter file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sensor WCET C_S (ms).
    #[arg(long)]
    pub cs: Option<i64>,
    /// Sensor BCET (ms).
    #[arg(long)]
    pub bcet: Option<i64>,
    /// Misc WCET C_M (ms).
    #[arg(long)]
    pub cm: Option<i64>,
    /// Misc period T_M (ms).
    #[arg(long)]
    pub tm: Option<i64>,
    /// TDMA super-frame T_tdma (ms).
    #[arg(long)]
    pub ttdma: Option<i64>,
    /// Samples per packet N.
    #[arg(long)]
    pub n: Option<i64>,
    /// One-packet transmission times, comma separated (ms).
    #[arg(long, value_delimiter = ',')]
    pub tx: Option<Vec<i64>>,
    #[arg(long, value_enum, default_value = "tdma")]
    pub protocol: ProtocolArg,
    #[command(flatten)]
    pub bmac: BmacArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BmacArgs {
    #[arg(long = "t-b1")]
    pub t_b1: Option<i64>,
    #[arg(long = "t-f1")]
    pub t_f1: Option<i64>,
    #[arg(long = "t-b2")]
    pub t_b2: Option<i64>,
    #[arg(long = "t-f2")]
    pub t_f2: Option<i64>,
    #[arg(long = "t-pkt")]
    pub t_pkt: Option<i64>,
    /// Maximum retransmissions.
    #[arg(long = "k")]
    pub k: Option<i64>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticOpts {
    #[arg(long, value_enum, default_value = "eq6")]
    pub variant: VariantArg,
    /// Strict medium-access inequality.
    #[arg(long)]
    pub strict: bool,
    /// Which sensor execution time stands in for B.
    #[arg(long = "lower-bound", value_enum, default_value = "wcet")]
    pub lower_bound: LowerBoundArg,
}

#[derive(Debug, Clone, Args)]
pub struct ModelOpts {
    /// Nodes sharing the TDMA super-frame.
    #[arg(long)]
    pub nodes: Option<i64>,
    /// Start of the sender's first slot (ms).
    #[arg(long = "slot-offset", default_value_t = 0)]
    pub slot_offset: i64,
    /// Release of the first misc job (ms).
    #[arg(long = "misc-offset", default_value_t = 0)]
    pub misc_offset: i64,
    #[arg(long, value_enum, default_value = "exclusive")]
    pub deadline: DeadlineArg,
    #[arg(long = "max-states", default_value_t = 5_000_000)]
    pub max_states: usize,
    /// Do not expand states beyond this absolute time (ms).
    #[arg(long)]
    pub horizon: Option<i64>,
    /// Worker threads.
    #[arg(long, env = "WSAN_SCHED_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub analytic: AnalyticOpts,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Sampling period T_S (ms).
    #[arg(long)]
    pub period: Option<i64>,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Where to write a counterexample.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub period: Option<i64>,
    #[command(flatten)]
    pub model: ModelOpts,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub period: Option<i64>,
    #[command(flatten)]
    pub model: ModelOpts,
    /// JSON-lines trace to replay.
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub analytic: AnalyticOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// C_S values, comma separated.
    #[arg(long = "cs-list", value_delimiter = ',', default_value = "2,10,20,30")]
    pub cs_list: Vec<i64>,
    /// N values, comma separated.
    #[arg(long = "n-list", value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    pub n_list: Vec<i64>,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "linear")]
    pub strategy: StrategyArg,
    /// Period search range `lo,hi` (ms).
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1, 200])]
    pub range: Vec<i64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub period: Option<i64>,
    #[command(flatten)]
    pub model: ModelOpts,
}

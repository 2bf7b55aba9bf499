use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ensroute::io::TaskMetric;
use ensroute::{EstimationMode, Metric};

#[derive(Debug, Parser)]
#[command(name = "ensroute", version, about = "Label-free routing across an ensemble of text generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate per-sample generator quality scores.
    Estimate(EstimateArgs),
    /// Route every sample to one generator.
    Route(RouteArgs),
    /// Sample a synthetic dataset with known scores.
    Simulate(SimulateArgs),
    /// Score estimates or routing decisions against ground truth or labels.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Global,
    Local,
    Train,
}

impl From<ModeArg> for EstimationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Global => EstimationMode::Global,
            ModeArg::Local => EstimationMode::Local,
            ModeArg::Train => EstimationMode::Train,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskMetricArg {
    Contains,
    Rouge2,
}

impl From<TaskMetricArg> for TaskMetric {
    fn from(m: TaskMetricArg) -> Self {
        match m {
            TaskMetricArg::Contains => TaskMetric::Contains,
            TaskMetricArg::Rouge2 => TaskMetric::Rouge2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Random,
    BestOnVal,
    LabeledKnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Smb1,
}

/// Where the samples to score come from.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Dataset manifest (JSON).
    #[arg(long, conflicts_with = "embeddings")]
    pub manifest: Option<PathBuf>,
    /// Embedding file (JSON Lines or .smb1), used when no manifest is given.
    #[arg(long, required_unless_present = "manifest")]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    #[arg(long, value_enum, default_value = "local")]
    pub mode: ModeArg,
    /// Neighborhood size for local and train modes.
    #[arg(long, default_value_t = 1)]
    pub n0: usize,
    /// Manifest of the held-out pool used by train mode.
    #[arg(long)]
    pub train_manifest: Option<PathBuf>,
    /// Metric for neighbor search.
    #[arg(long, value_enum, default_value = "euclidean")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long, default_value = "estimates.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RouteArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// Route with a comparison baseline instead of estimated scores.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
    /// Labeled validation set (labels JSON Lines with quality vectors) for the
    /// best-on-val and labeled-knn baselines.
    #[arg(long)]
    pub val_labels: Option<PathBuf>,
    /// Validation examples used by best-on-val.
    #[arg(long, default_value_t = 50)]
    pub val_size: usize,
    /// Neighbors used by labeled-knn.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value = "decisions.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated scores shared by every sample. Defaults to m values
    /// log-spaced between 0.5 and 8.
    #[arg(long, value_delimiter = ',', conflicts_with = "region_theta")]
    pub theta: Option<Vec<f64>>,
    /// Comma-separated scores of one region; repeat once per region.
    #[arg(long)]
    pub region_theta: Vec<String>,
    /// Spatial clusters for piecewise data; defaults to the number of regions.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Standard deviation of latent points around their cluster centroid.
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: FormatArg,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Truth sidecar written by `simulate`.
    #[arg(long)]
    pub against_truth: Option<PathBuf>,
    /// Estimates written by `estimate`.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Decisions written by `route`.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    /// Manifest whose labels (and generations) score the decisions.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides the manifest's task metric.
    #[arg(long, value_enum)]
    pub task_metric: Option<TaskMetricArg>,
    /// Also write a one-row CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
}

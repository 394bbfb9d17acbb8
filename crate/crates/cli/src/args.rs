use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "freqmask", version, about = "Frequency-domain mask-perturbation saliency for time-series classifiers")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-subject dataset with known informative cells.
    Generate(GenerateArgs),
    /// Train a classifier on a dataset.
    Train(TrainArgs),
    /// Learn per-epoch masks and the group saliency map.
    Explain(ExplainArgs),
    /// Run the removal and feed-in game for a saliency map.
    Evaluate(EvaluateArgs),
    /// Score every (channel, band) cell with the Gaussian-noise baseline.
    Baseline(BaselineArgs),
    /// Explain and evaluate across several lambda values.
    Sweep(SweepArgs),
    /// Leave-one-subject-out training, explanation and evaluation.
    Loso(LosoArgs),
    /// Render a saliency map as a plain-text graymap.
    Render(RenderArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flat key=value file; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 6)]
    pub subjects: usize,
    #[arg(long, default_value_t = 80)]
    pub per_class: usize,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    #[arg(long, default_value_t = 10)]
    pub bands: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    /// mini_cnn or mlp.
    #[arg(long, default_value = "mini_cnn")]
    pub arch: String,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MaskFlags {
    #[arg(long, default_value_t = 0.05)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub bands: usize,
    /// Maximum optimization epochs per mask.
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long)]
    pub one_branch: bool,
    #[arg(long)]
    pub no_regularizers: bool,
    /// Explain at most this many epochs, evenly spaced through the dataset.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub mask: MaskFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Group saliency map file.
    #[arg(long)]
    pub map: PathBuf,
    /// Per-epoch maps for the instance-level game.
    #[arg(long)]
    pub instance_maps: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub bands: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.0005,0.005,0.05,0.5")]
    pub lambdas: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub mask: MaskFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct LosoArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "mini_cnn")]
    pub arch: String,
    #[arg(long, default_value_t = 100)]
    pub train_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub train_lr: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub mask: MaskFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Which map of a multi-map file to draw.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}

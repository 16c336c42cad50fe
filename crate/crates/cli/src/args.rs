use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lrmm", version, about = "Multimodal rating prediction robust to missing modalities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the data files and write the vocabulary and split manifest.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint with its sidecar files.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report test metrics of a checkpoint under one or more regimes.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        /// +F, -U, -O, -M, -V, a comma list of these, or `all`.
        #[arg(long, default_value = "+F", allow_hyphen_values = true)]
        regime: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain with at most k training reviews per item for each k.
    SparsifyExperiment {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma list of counts; `all` keeps every review.
        #[arg(long, default_value = "all,5,1,0")]
        k: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain with each maximum document length.
    LengthSweep {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Comma list of lengths.
        #[arg(long)]
        lengths: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a source-domain checkpoint on a target domain without retraining.
    CrossDomain {
        #[arg(long)]
        source_ckpt: PathBuf,
        /// Directory holding reviews.jsonl (and optionally meta.jsonl,
        /// features.lrmmfeat), or a reviews file.
        #[arg(long)]
        target_data: PathBuf,
        /// Target metadata when --target-data is a file.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Target image features when --target-data is a file.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write encoder outputs and reconstructions for one split as CSV.
    DumpEmbeddings {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the global and per-item mean-rating baselines on the test split.
    ExtractOffset {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus (reviews, metadata, image features).
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        n_reviews: usize,
        #[arg(long, default_value_t = 200)]
        n_users: usize,
        #[arg(long, default_value_t = 100)]
        n_items: usize,
        #[arg(long, default_value_t = 32)]
        feature_dim: usize,
        /// Probability that a review goes to an item at the author's level.
        #[arg(long, default_value_t = 0.0)]
        correlation: f64,
    },
}

#[derive(Debug, Args, Default, Clone)]
pub struct DataArgs {
    /// Reviews JSON lines.
    #[arg(long)]
    pub reviews: Option<PathBuf>,
    /// Item metadata JSON lines.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Image features in LRMMFEAT format.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides both the split and the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

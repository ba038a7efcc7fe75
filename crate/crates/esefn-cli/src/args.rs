//! Shared flag groups and dataset assembly.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use esefn::{
    class_count, feature_dims, generate_xor_pair, read_feature_pair, split_train_test, DataSplit,
    Error, LossWeights, OptimConfig, Result, SynthSpec,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SyntheticKind {
    /// Jointly-separable pair task: each modality encodes one latent
    /// factor, the label combines both.
    Xor,
}

/// The dataset source: exactly one of `--synthetic` or the feature-file
/// pair. Commands embedding [`DataArgs`] declare this group.
pub fn source_group() -> clap::ArgGroup {
    clap::ArgGroup::new("source")
        .args(["synthetic", "rgb_features"])
        .required(true)
        .multiple(false)
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Generate a synthetic dataset instead of reading feature files
    #[arg(long, value_enum)]
    pub synthetic: Option<SyntheticKind>,

    /// First-modality feature file (pair with --skel-features)
    #[arg(long, requires = "skel_features")]
    pub rgb_features: Option<PathBuf>,

    /// Second-modality feature file (pair with --rgb-features)
    #[arg(long, requires = "rgb_features")]
    pub skel_features: Option<PathBuf>,

    /// Synthetic: first-modality feature width
    #[arg(long, default_value_t = 8)]
    pub d1: usize,

    /// Synthetic: second-modality feature width
    #[arg(long, default_value_t = 8)]
    pub d2: usize,

    /// Synthetic: noise standard deviation around the class prototypes
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,

    /// Synthetic: samples generated per class
    #[arg(long, default_value_t = 100)]
    pub samples_per_class: usize,

    /// Fraction of samples held out for testing (stratified)
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
}

impl DataArgs {
    /// Builds the train/test split. `seed` drives generation and the split.
    pub fn load(&self, seed: u64) -> Result<LoadedData> {
        let data = match (&self.synthetic, &self.rgb_features, &self.skel_features) {
            (Some(SyntheticKind::Xor), _, _) => {
                let spec = SynthSpec {
                    dim_r: self.d1,
                    dim_s: self.d2,
                    noise_sigma: self.noise,
                    samples_per_class: self.samples_per_class,
                    ..SynthSpec::xor_pair(seed)
                };
                generate_xor_pair(&spec)?
            }
            (None, Some(rgb), Some(skel)) => read_feature_pair(rgb, skel)?,
            _ => {
                return Err(Error::Input(
                    "need --synthetic or both --rgb-features and --skel-features".to_string(),
                ))
            }
        };
        if data.is_empty() {
            return Err(Error::Input("dataset is empty".to_string()));
        }
        let (dim_r, dim_s) = feature_dims(&data)?;
        let classes = class_count(&data);
        let split = split_train_test(&data, self.test_fraction, seed)?;
        Ok(LoadedData {
            split,
            dim_r,
            dim_s,
            classes,
        })
    }
}

pub struct LoadedData {
    pub split: DataSplit,
    pub dim_r: usize,
    pub dim_s: usize,
    pub classes: usize,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    /// Training epochs
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,

    /// Batch size
    #[arg(long, default_value_t = 32)]
    pub batch: usize,

    /// Learning rate
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,

    /// Momentum factor
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,

    /// Weight decay factor
    #[arg(long, default_value_t = 1e-4)]
    pub decay: f64,
}

impl OptimArgs {
    pub fn config(&self, seed: u64) -> OptimConfig {
        OptimConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            weight_decay: self.decay,
            batch_size: self.batch,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Weight of the fused-head loss
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,

    /// Weight of the min-branch consistency term
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
}

impl LossArgs {
    pub fn weights(&self) -> Result<LossWeights> {
        LossWeights::new(self.alpha, self.beta)
    }
}

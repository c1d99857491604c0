//! Datasets, optimization, checkpoints and the epoch loop.

mod adam;
mod augment;
mod checkpoint;
mod dataset;
mod metrics;
mod schedule;
mod synth;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Execution;

pub use adam::{AdamState, BETA1, BETA2, EPSILON};
pub use augment::{random_crop, time_stretch_columns, AugmentConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dataset::{load_samples, load_video, DatasetManifest, ManifestEntry, Sample, Split, CLASSES_FILE};
pub use metrics::{accuracy, ConfusionMatrix};
pub use schedule::lr_at;
pub use synth::{synth_dataset, SynthConfig};
pub use trainer::{evaluate, sample_rng, EpochMetrics, Evaluation, TrainReport, TrainState, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub lambda_audio: f64,
    pub lambda_video: f64,
    pub seed: u64,
    /// Overrides the encoder dropout probability when set.
    pub dropout: Option<f64>,
    pub execution: Execution,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            lr0: 0.001,
            decay_factor: 0.9,
            decay_every: 4,
            patience: 10,
            max_epochs: 100,
            lambda_audio: 0.5,
            lambda_video: 0.5,
            seed: 0,
            dropout: None,
            execution: Execution::Parallel,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("decay_factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.decay_every == 0 {
            return bad("decay_every must be positive".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.lambda_audio < 0.0 || self.lambda_video < 0.0 {
            return bad("loss weights must be non-negative".into());
        }
        if let Some(p) = self.dropout {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("dropout {p} outside [0, 1)"));
            }
        }
        self.augment.validate()
    }
}

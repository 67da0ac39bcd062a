//! Supervised pre-training, success-filtered self-play and ablation sweeps.

mod ablate;
mod optim;
mod rl;
mod sl;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::ParameterStore;
use crate::env::{EnvConfig, QGenPolicy};
use crate::error::{Error, Result};
use crate::losses::SupervisionConfig;
use crate::model::{Model, ModelSpec};

pub use ablate::{ablate, AblationCell, AblationGrid, AblationRow, AblationSettings};
pub use optim::{clip_global_norm, Adam, AdamConfig, LrSchedule, Momentum};
pub use rl::{rl_game_seed, train_rl};
pub use sl::{batch_gradient, train_sl};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a validation improvement before stopping; 0 disables.
    pub patience: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Global gradient-norm cap, if any.
    #[serde(default)]
    pub clip: Option<f64>,
    /// Train only on games the reference guesser solved.
    pub successful_only: bool,
}

impl Default for SlConfig {
    fn default() -> Self {
        SlConfig {
            lr: 3e-4,
            batch_size: 64,
            epochs: 20,
            patience: 5,
            adam: AdamConfig::default(),
            clip: None,
            successful_only: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub schedule: LrSchedule,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Self-play games per epoch.
    pub games_per_epoch: usize,
    /// Evaluate on fresh games every this many epochs; 0 disables.
    pub eval_every: usize,
    pub eval_games: usize,
    #[serde(default)]
    pub clip: Option<f64>,
    /// Question policy during self-play.
    pub qgen: QGenPolicy,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            schedule: LrSchedule { base: 1e-3, decay: 0.99, every: 25 },
            momentum: 0.9,
            batch_size: 64,
            epochs: 50,
            games_per_epoch: 1024,
            eval_every: 10,
            eval_games: 500,
            clip: None,
            qgen: QGenPolicy::GreedySplit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    #[serde(default)]
    pub sl: SlConfig,
    #[serde(default)]
    pub rl: RlConfig,
    #[serde(default)]
    pub supervision: SupervisionConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { seed: 1, sl: SlConfig::default(), rl: RlConfig::default(), supervision: SupervisionConfig::default() }
    }
}

impl TrainConfig {
    /// Paper schedule with the larger learning rate the small desk model needs.
    pub fn desk() -> Self {
        let mut cfg = TrainConfig::default();
        cfg.sl.lr = 3e-3;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.supervision.validate()?;
        self.rl.schedule.validate()?;
        if !(self.sl.lr >= 0.0) || self.sl.batch_size == 0 || self.rl.batch_size == 0 {
            return Err(Error::Config("learning rate must be ≥ 0 and batch size ≥ 1".into()));
        }
        if !(0.0..1.0).contains(&self.rl.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: String,
    pub epoch: usize,
    pub step: usize,
    pub es: f64,
    pub ps: f64,
    pub is: f64,
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_error: Option<f64>,
    pub lr: f64,
}

/// Trained parameters plus everything needed to rebuild and re-evaluate them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub store: ParameterStore,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub metrics: Vec<MetricsRecord>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Model> {
        Model::bind(&self.spec, &self.store)
    }
}

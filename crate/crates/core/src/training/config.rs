use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::optim::OptimizerKind;
use crate::error::{Error, Result};
use crate::nn::{InputMode, ModelConfig};
use crate::objectives::{CacmSpace, KernelSpec, LossWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Per epoch: a task + reconstruction + causal-penalty pass, then a
    /// contrastive + task pass over the same batches.
    #[default]
    BilevelAlternate,
    /// One combined objective per step.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Whether the decoder sees attribute embeddings during training and
    /// inference. Satellite-only models receive a zero embedding.
    pub input_mode: InputMode,
    pub epochs: usize,
    pub batch_size: usize,
    /// Samples drawn from one environment per batch block; 0 shuffles
    /// samples freely.
    pub env_block: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub weights: LossWeights,
    pub schedule: Schedule,
    pub cacm_space: CacmSpace,
    pub kernel: KernelSpec,
    pub min_group_size: usize,
    /// Abort when more than this fraction of penalty evaluations is skipped.
    pub max_degenerate_rate: f64,
    /// Hinge margin for the triplet loss; `None` keeps the raw difference.
    pub hinge_margin: Option<f64>,
    /// Also apply the triplet loss to image embeddings.
    pub contrastive_on_image: bool,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    /// Keep the causal and contrastive terms active while fine-tuning.
    pub finetune_regularizers: bool,
    /// Parameter-name prefixes held fixed while fine-tuning.
    pub freeze: Vec<String>,
    /// Save a checkpoint every N epochs (0 disables).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            input_mode: InputMode::default(),
            epochs: 30,
            batch_size: 40,
            env_block: 10,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            weights: LossWeights::default(),
            schedule: Schedule::default(),
            cacm_space: CacmSpace::default(),
            kernel: KernelSpec::default(),
            min_group_size: 2,
            max_degenerate_rate: 0.5,
            hinge_margin: None,
            contrastive_on_image: false,
            pretrain_epochs: 0,
            pretrain_lr: 1e-3,
            finetune_epochs: 10,
            finetune_lr: 1e-3,
            finetune_regularizers: true,
            freeze: Vec::new(),
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.min_group_size < 2 {
            return bad("min_group_size must be >= 2".into());
        }
        if self.batch_size < 4 * self.min_group_size {
            return bad(format!(
                "batch_size {} is below 4 x min_group_size ({})",
                self.batch_size,
                4 * self.min_group_size
            ));
        }
        for (n, v) in [
            ("learning_rate", self.learning_rate),
            ("pretrain_lr", self.pretrain_lr),
            ("finetune_lr", self.finetune_lr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{n} must be > 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.max_degenerate_rate) {
            return bad("max_degenerate_rate must be in [0, 1]".into());
        }
        if let Some(m) = self.hinge_margin {
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("hinge_margin must be >= 0, got {m}"));
            }
        }
        self.weights.validate()?;
        self.kernel.validate()?;
        self.optimizer.validate()
    }

    /// Hex SHA-256 prefix of the JSON form.
    pub fn hash(&self) -> String {
        config_hash(&serde_json::to_string(self).expect("config serializes"))
    }

    pub fn contrastive_active(&self) -> bool {
        self.weights.con > 0.0
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

use serde::{Deserialize, Serialize};

use crate::features::N_PC;
use crate::{Error, Result};

/// Global per-target loss weights for `[S_dur, S_f0, W_dur - S_dur, W_f0 - S_f0]`.
pub const DEFAULT_TARGET_WEIGHTS: [f64; N_PC] = [1.0, 1.0, 1.5, 3.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmphasisFeature {
    Off,
    /// Emphasis flag embedded with this many dimensions.
    On(usize),
}

impl EmphasisFeature {
    pub fn dim(self) -> usize {
        match self {
            EmphasisFeature::Off => 0,
            EmphasisFeature::On(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub n_blocks: usize,
    pub hidden_units: usize,
    pub speaker_emb_dim: usize,
    pub phone_emb_dim: usize,
    pub emphasis_feature: EmphasisFeature,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub target_weights: [f64; N_PC],
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            n_blocks: 2,
            hidden_units: 32,
            speaker_emb_dim: 8,
            phone_emb_dim: 8,
            emphasis_feature: EmphasisFeature::Off,
            dropout_rate: 0.1,
            learning_rate: 1e-3,
            target_weights: DEFAULT_TARGET_WEIGHTS,
            epochs: 50,
            batch_size: 8,
            rng_seed: 0,
        }
    }
}

/// Named configurations. The first three are the published model sizes; the
/// `desk-*` ones are small enough to train on a laptop CPU in minutes.
pub const PRESET_NAMES: [&str; 5] = ["pc-unsup", "hybrid", "base-sup", "desk-unsup", "desk-hybrid"];

impl PredictorConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let cfg = match name {
            "pc-unsup" => Self {
                n_blocks: 5,
                hidden_units: 175,
                speaker_emb_dim: 20,
                phone_emb_dim: 32,
                emphasis_feature: EmphasisFeature::Off,
                ..base
            },
            "hybrid" => Self {
                n_blocks: 4,
                hidden_units: 200,
                speaker_emb_dim: 20,
                phone_emb_dim: 32,
                emphasis_feature: EmphasisFeature::On(8),
                ..base
            },
            "base-sup" => Self {
                n_blocks: 4,
                hidden_units: 200,
                speaker_emb_dim: 20,
                phone_emb_dim: 32,
                emphasis_feature: EmphasisFeature::On(16),
                ..base
            },
            "desk-unsup" => Self {
                n_blocks: 2,
                hidden_units: 16,
                speaker_emb_dim: 4,
                phone_emb_dim: 8,
                emphasis_feature: EmphasisFeature::Off,
                learning_rate: 3e-3,
                ..base
            },
            "desk-hybrid" => Self {
                n_blocks: 2,
                hidden_units: 16,
                speaker_emb_dim: 4,
                phone_emb_dim: 8,
                emphasis_feature: EmphasisFeature::On(8),
                learning_rate: 3e-3,
                ..base
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown predictor preset {other:?}; known: {}",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.n_blocks,
            self.hidden_units,
            self.speaker_emb_dim,
            self.phone_emb_dim,
            self.batch_size,
        ];
        if dims.contains(&0) || self.emphasis_feature == EmphasisFeature::On(0) {
            return Err(Error::Config("all dimensions must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.target_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config("target weights must be positive".into()));
        }
        Ok(())
    }

    /// Width of the per-phone input features.
    pub fn feature_dim(&self) -> usize {
        self.phone_emb_dim + super::N_POSITION_FEATURES + self.emphasis_feature.dim()
    }
}

/// The default structure grid: blocks 2 to 5, hidden units 32 or 64.
pub fn default_grid(base: &PredictorConfig) -> Vec<PredictorConfig> {
    let mut grid = Vec::new();
    for n_blocks in 2..=5 {
        for hidden_units in [32, 64] {
            grid.push(PredictorConfig {
                n_blocks,
                hidden_units,
                ..base.clone()
            });
        }
    }
    grid
}

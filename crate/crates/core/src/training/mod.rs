//! Pair construction, the weighted objective and the training loop for the
//! learned estimators.

mod adam;
mod loss;
mod pairs;
mod split;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::Adam;
pub use loss::{batch_loss, positive_weight, weighted_bce, weighted_bce_grad, PROB_CLAMP};
pub use pairs::{build_pairs, build_pairs_with_mix, class_counts, is_admissible, PairKind, PairSample};
pub use split::{participants, split_by_individual, Split};
pub use trainer::{evaluate_loss, train, EpochLoss, PairSet, TrainReport};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Window length in samples.
    pub window: usize,
    /// Cap on negatives per positive in the training set.
    pub rho_neg: f64,
    /// Share of negatives drawn from different identities at the same time.
    pub cross_fraction: f64,
    pub stride_train: usize,
    pub stride_val: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of participants assigned to training.
    pub split_ratio: f64,
    /// Moving-average momentum of the running statistics.
    pub stats_momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            window: 300,
            rho_neg: 16.0,
            cross_fraction: 0.5,
            stride_train: 10,
            stride_val: 1,
            learning_rate: 1e-4,
            batch_size: 512,
            epochs: 100,
            patience: 10,
            split_ratio: 0.8,
            stats_momentum: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(Error::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.window == 0 {
            return bad("window", "must be ≥ 1");
        }
        if !(self.rho_neg >= 1.0) {
            return bad("rho_neg", "must be ≥ 1");
        }
        if !(0.0..=1.0).contains(&self.cross_fraction) {
            return bad("cross_fraction", "must lie in [0, 1]");
        }
        if self.stride_train == 0 || self.stride_val == 0 {
            return bad("stride_train", "strides must be ≥ 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be ≥ 1");
        }
        if self.patience == 0 {
            return bad("patience", "must be ≥ 1");
        }
        if !(self.split_ratio > 0.0 && self.split_ratio <= 1.0) {
            return bad("split_ratio", "must lie in (0, 1]");
        }
        if !(self.stats_momentum > 0.0 && self.stats_momentum <= 1.0) {
            return bad("stats_momentum", "must lie in (0, 1]");
        }
        Ok(())
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::numkit::OptimizerKind;

/// Learning hyperparameters. Episode length and the device-count range come
/// from the simulation config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Discount applied to the bootstrapped target.
    pub discount: f64,
    pub kappa_actor: f64,
    pub kappa_critic: f64,
    /// Exploration variance before the first decay.
    pub noise_var: f64,
    /// Per-episode multiplicative decay of the exploration variance.
    pub noise_decay: f64,
    pub replay_capacity: usize,
    pub optimizer: OptimizerKind,
    /// Multiplies rewards before they are stored.
    pub reward_scale: f64,
    /// Updates start once the buffer holds this many transitions.
    pub warmup: usize,
    /// Write a checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 100_000,
            batch_size: 256,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            discount: 0.95,
            kappa_actor: 0.005,
            kappa_critic: 0.005,
            noise_var: 0.45,
            noise_decay: 0.9995,
            replay_capacity: 100_000,
            optimizer: OptimizerKind::Sgd,
            reward_scale: 1.0,
            warmup: 1,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        contract!(self.episodes > 0, "episodes must be positive");
        contract!(self.batch_size > 0, "batch size must be positive");
        contract!(self.replay_capacity > 0, "replay capacity must be positive");
        contract!(self.warmup >= 1, "warmup must be at least 1");
        contract!(
            self.lr_actor >= 0.0 && self.lr_critic >= 0.0,
            "learning rates must be nonnegative"
        );
        contract!(
            self.discount > 0.0 && self.discount <= 1.0,
            "discount {} outside (0, 1]",
            self.discount
        );
        contract!(
            (0.0..=1.0).contains(&self.kappa_actor) && (0.0..=1.0).contains(&self.kappa_critic),
            "target rates must lie in [0, 1]"
        );
        contract!(self.noise_var >= 0.0, "noise variance must be nonnegative");
        contract!(
            self.noise_decay > 0.0 && self.noise_decay <= 1.0,
            "noise decay {} outside (0, 1]",
            self.noise_decay
        );
        contract!(
            self.reward_scale > 0.0 && self.reward_scale.is_finite(),
            "reward scale must be positive"
        );
        Ok(())
    }

    /// Exploration variance used during episode `k` (1-based): `σ²₀·ρᵏ`.
    pub fn noise_at(&self, k: usize) -> f64 {
        self.noise_var * self.noise_decay.powi(k as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.lr_actor, c.lr_critic), (1e-4, 1e-3));
        assert_eq!((c.noise_var, c.noise_decay), (0.45, 0.9995));
        assert_eq!(c.noise_at(0), 0.45);
        assert_eq!(c.noise_at(3), 0.45 * 0.9995f64.powi(3));
        assert!(TrainConfig { discount: 0.0, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { noise_decay: 1.5, ..c }.validate().is_err());
    }
}

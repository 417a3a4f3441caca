//! Clipped-surrogate policy optimisation with generalized advantage
//! estimation.

mod bandit;
mod gae;
mod loss;
mod rollout;
mod trainer;
mod update;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bandit::Bandit;
pub use gae::{compute_gae, normalize_advantages, AdvantageSet, Trajectory};
pub use loss::{clipped_objective, ppo_surrogate, total_loss, value_loss};
pub use rollout::{collect_rollout, EpisodeRecord, Rollout, Worker};
pub use trainer::{read_log, train, LogRow, TrainOutputs, Trainer, LOG_HEADER};
pub use update::{loss_and_gradient, update, Batch, LossParts, Minibatch, UpdateStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    /// Value-loss coefficient.
    pub value_coef: f64,
    /// Entropy-bonus coefficient.
    pub entropy_coef: f64,
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub total_steps: u64,
    pub num_envs: usize,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            value_coef: 0.95,
            entropy_coef: 0.001,
            horizon: 2048,
            epochs: 3,
            minibatch_size: 256,
            total_steps: 500_000,
            num_envs: 8,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon.is_finite()) {
            return bad(format!("clip_epsilon must be positive, got {}", self.clip_epsilon));
        }
        for (name, v) in [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("learning_rate", self.learning_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.max_grad_norm > 0.0) {
            return bad(format!("max_grad_norm must be positive, got {}", self.max_grad_norm));
        }
        for (name, v) in [
            ("horizon", self.horizon),
            ("epochs", self.epochs),
            ("minibatch_size", self.minibatch_size),
            ("num_envs", self.num_envs),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }

    /// Environment steps gathered per update.
    pub fn steps_per_update(&self) -> u64 {
        (self.horizon * self.num_envs) as u64
    }

    /// Updates needed to consume `total_steps`; a partial last batch rounds up.
    pub fn num_updates(&self) -> u64 {
        self.total_steps.div_ceil(self.steps_per_update())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_count_arithmetic() {
        let cfg = PpoConfig {
            total_steps: 4096,
            horizon: 2048,
            num_envs: 1,
            ..Default::default()
        };
        assert_eq!(cfg.num_updates(), 2);
        let cfg = PpoConfig {
            total_steps: 4097,
            ..cfg
        };
        assert_eq!(cfg.num_updates(), 3);
    }

    #[test]
    fn validation() {
        assert!(PpoConfig::default().validate().is_ok());
        for cfg in [
            PpoConfig { gamma: 0.0, ..Default::default() },
            PpoConfig { gamma: 1.01, ..Default::default() },
            PpoConfig { clip_epsilon: 0.0, ..Default::default() },
            PpoConfig { horizon: 0, ..Default::default() },
            PpoConfig { learning_rate: f64::NAN, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(PpoConfig { gamma: 1.0, ..Default::default() }.validate().is_ok());
    }
}

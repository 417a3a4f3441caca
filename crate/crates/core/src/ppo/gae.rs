use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Transitions gathered from one environment over one rollout horizon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub obs_len: usize,
    pub action_dim: usize,
    /// Row-major `len x obs_len`.
    pub states: Vec<f64>,
    /// Pre-clamp sampled actions, row-major `len x action_dim`.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value of the state following the last transition.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn new(obs_len: usize, action_dim: usize) -> Self {
        Self {
            obs_len,
            action_dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, state: &[f64], action: &[f64], log_prob: f64, value: f64, reward: f64, done: bool) {
        self.states.extend_from_slice(state);
        self.actions.extend_from_slice(action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        if self.values.len() != t
            || self.log_probs.len() != t
            || self.dones.len() != t
            || self.states.len() != t * self.obs_len
            || self.actions.len() != t * self.action_dim
        {
            return Err(Error::Shape(format!(
                "trajectory arrays disagree: {t} rewards, {} values, {} log-probs, {} dones, {} state entries, {} action entries",
                self.values.len(),
                self.log_probs.len(),
                self.dones.len(),
                self.states.len(),
                self.actions.len()
            )));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.values) || !finite(&self.rewards) || !self.bootstrap_value.is_finite() {
            return Err(Error::NonFinite("trajectory values or rewards".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageSet {
    pub advantages: Vec<f64>,
    /// Value targets, `advantage + value` before any normalization.
    pub returns: Vec<f64>,
    pub normalized: bool,
}

/// Backward lambda-weighted recursion `A_t = d_t + gamma lambda A_{t+1}` with
/// `d_t = r_t + gamma V(s_{t+1}) - V(s_t)`. Both terms are cut at a done flag.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<AdvantageSet> {
    traj.validate()?;
    let t = traj.len();
    let mut advantages = vec![0.0; t];
    let mut next_value = traj.bootstrap_value;
    let mut next_adv = 0.0;
    for i in (0..t).rev() {
        let live = if traj.dones[i] { 0.0 } else { 1.0 };
        let delta = traj.rewards[i] + gamma * next_value * live - traj.values[i];
        let adv = delta + gamma * lambda * live * next_adv;
        advantages[i] = adv;
        next_value = traj.values[i];
        next_adv = adv;
    }
    let returns = advantages.iter().zip(&traj.values).map(|(a, v)| a + v).collect();
    Ok(AdvantageSet {
        advantages,
        returns,
        normalized: false,
    })
}

/// Shifts and scales to zero mean and unit (population) standard deviation.
/// A constant batch is only centred.
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
    for a in advantages.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

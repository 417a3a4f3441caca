use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{clipped_objective, compute_gae, normalize_advantages, PpoConfig, Trajectory};
use crate::neural::{
    backward, entropy, forward_batch, gaussian_log_prob, optimizer_step, OptimizerState,
    PolicyParams,
};
use crate::{Error, Result};

/// Flattened transitions of one rollout with their advantages and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs_len: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    /// Runs GAE per trajectory, concatenates, then optionally normalizes the
    /// advantages over the whole batch.
    pub fn from_trajectories(trajectories: &[Trajectory], config: &PpoConfig) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
        let mut batch = Batch {
            obs_len: first.obs_len,
            action_dim: first.action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            log_probs: Vec::new(),
            values: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        for traj in trajectories {
            if traj.obs_len != batch.obs_len || traj.action_dim != batch.action_dim {
                return Err(Error::Shape("trajectories with different shapes".into()));
            }
            let set = compute_gae(traj, config.gamma, config.gae_lambda)?;
            batch.states.extend_from_slice(&traj.states);
            batch.actions.extend_from_slice(&traj.actions);
            batch.log_probs.extend_from_slice(&traj.log_probs);
            batch.values.extend_from_slice(&traj.values);
            batch.advantages.extend(set.advantages);
            batch.returns.extend(set.returns);
        }
        if config.normalize_advantages {
            normalize_advantages(&mut batch.advantages);
        }
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn minibatch(&self, indices: &[usize]) -> Minibatch {
        let mut states = Array2::zeros((indices.len(), self.obs_len));
        let mut actions = Array2::zeros((indices.len(), self.action_dim));
        for (r, &i) in indices.iter().enumerate() {
            states
                .row_mut(r)
                .assign(&ndarray::ArrayView1::from(&self.states[i * self.obs_len..(i + 1) * self.obs_len]));
            actions.row_mut(r).assign(&ndarray::ArrayView1::from(
                &self.actions[i * self.action_dim..(i + 1) * self.action_dim],
            ));
        }
        Minibatch {
            states,
            actions,
            old_log_probs: indices.iter().map(|&i| self.log_probs[i]).collect(),
            advantages: indices.iter().map(|&i| self.advantages[i]).collect(),
            returns: indices.iter().map(|&i| self.returns[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub states: Array2<f64>,
    /// Pre-clamp actions.
    pub actions: Array2<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    /// Negated batch-mean clipped surrogate.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Quantity being minimized: `policy_loss + c1 value_loss - c2 entropy`.
    pub total: f64,
    pub mean_ratio: f64,
    /// Fraction of samples whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: f64,
    /// Mean of `old_log_prob - new_log_prob`.
    pub approx_kl: f64,
}

/// Loss on one minibatch and its exact gradient with respect to every
/// parameter, log-std included.
pub fn loss_and_gradient(
    params: &PolicyParams,
    mb: &Minibatch,
    config: &PpoConfig,
) -> Result<(LossParts, Vec<f64>)> {
    let n = mb.states.nrows();
    let dim = params.spec.action_dim;
    if n == 0 {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    if mb.actions.dim() != (n, dim)
        || mb.old_log_probs.len() != n
        || mb.advantages.len() != n
        || mb.returns.len() != n
    {
        return Err(Error::Shape("minibatch arrays disagree".into()));
    }
    let (out, cache) = forward_batch(params, mb.states.view())?;
    let log_std = params.log_std().to_vec();
    let sigma: Vec<f64> = log_std.iter().map(|l| l.exp()).collect();
    let inv_n = 1.0 / n as f64;
    let eps = config.clip_epsilon;

    let mut d_mean = Array2::zeros((n, dim));
    let mut d_value = Array1::zeros(n);
    let mut d_log_std = vec![0.0; dim];
    let mut parts = LossParts::default();
    for i in 0..n {
        let mean = out.mean.row(i);
        let action = mb.actions.row(i);
        let mean = mean.as_slice().unwrap();
        let action = action.as_slice().unwrap();
        let lp = gaussian_log_prob(action, mean, &log_std);
        let ratio = (lp - mb.old_log_probs[i]).exp();
        let adv = mb.advantages[i];
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
        parts.policy_loss -= clipped_objective(ratio, adv, eps) * inv_n;
        parts.mean_ratio += ratio * inv_n;
        parts.approx_kl += (mb.old_log_probs[i] - lp) * inv_n;
        if (ratio - 1.0).abs() > eps {
            parts.clip_fraction += inv_n;
        }
        // The min picks the unclipped branch unless clipping is strictly smaller.
        let d_lp = if ratio * adv <= clipped * adv {
            -adv * ratio * inv_n
        } else {
            0.0
        };
        for j in 0..dim {
            let z = (action[j] - mean[j]) / sigma[j];
            d_mean[[i, j]] = d_lp * z / sigma[j];
            d_log_std[j] += d_lp * (z * z - 1.0);
        }
        let err = out.value[i] - mb.returns[i];
        parts.value_loss += err * err * inv_n;
        d_value[i] = config.value_coef * 2.0 * err * inv_n;
    }
    parts.entropy = entropy(&log_std);
    parts.total = parts.policy_loss + config.value_coef * parts.value_loss
        - config.entropy_coef * parts.entropy;
    if !parts.total.is_finite() {
        return Err(Error::NonFinite(format!("loss {parts:?}")));
    }
    let mut grads = backward(params, &cache, d_mean.view(), d_value.view())?;
    for (g, d) in grads[params.log_std_range()].iter_mut().zip(&d_log_std) {
        *g = d - config.entropy_coef;
    }
    Ok((parts, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    /// Averages over every minibatch step of the update.
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
    /// Loss on the very first minibatch, before any parameter change.
    pub first: LossParts,
}

/// `epochs` passes of shuffled minibatch gradient steps. The optimizer's
/// own learning rate and clipping norm are used.
pub fn update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    optimizer: &mut OptimizerState,
    batch: &Batch,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    config.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if batch.obs_len != params.spec.input_len || batch.action_dim != params.spec.action_dim {
        return Err(Error::Shape("batch does not match the network".into()));
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = UpdateStats::default();
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for (k, chunk) in order.chunks(config.minibatch_size).enumerate() {
            let mb = batch.minibatch(chunk);
            let (parts, grads) = loss_and_gradient(params, &mb, config).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch} minibatch {k}: {m}")),
                other => other,
            })?;
            let report = optimizer_step(params, &grads, optimizer)?;
            if stats.minibatches == 0 {
                stats.first = parts;
            }
            stats.minibatches += 1;
            stats.policy_loss += parts.policy_loss;
            stats.value_loss += parts.value_loss;
            stats.entropy += parts.entropy;
            stats.mean_ratio += parts.mean_ratio;
            stats.clip_fraction += parts.clip_fraction;
            stats.approx_kl += parts.approx_kl;
            stats.grad_norm += report.grad_norm;
        }
    }
    let m = stats.minibatches as f64;
    for v in [
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.mean_ratio,
        &mut stats.clip_fraction,
        &mut stats.approx_kl,
        &mut stats.grad_norm,
    ] {
        *v /= m;
    }
    Ok(stats)
}

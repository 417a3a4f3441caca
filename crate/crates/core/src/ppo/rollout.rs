use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::env::{Environment, Termination};
use crate::neural::{forward_batch, gaussian_policy, PolicyParams};
use crate::{Error, Result};

/// One finished episode, stamped with the global step count at which it ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub step: u64,
    pub worker: usize,
    pub reward: f64,
    pub length: u64,
    pub termination: Termination,
}

/// An environment together with its private seed and action streams.
pub struct Worker {
    env: Box<dyn Environment>,
    index: usize,
    observation: Vec<f64>,
    episode_reward: f64,
    episode_length: u64,
    episode_seeds: ChaCha8Rng,
    actions: ChaCha8Rng,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct WorkerState {
    env: serde_json::Value,
    observation: Vec<f64>,
    episode_reward: f64,
    episode_length: u64,
    episode_seeds: ChaCha8Rng,
    actions: ChaCha8Rng,
}

impl Worker {
    /// Streams are derived from `(seed, index)` only, so results do not
    /// depend on how workers are scheduled.
    pub fn new(mut env: Box<dyn Environment>, seed: u64, index: usize) -> Result<Self> {
        let mut episode_seeds = ChaCha8Rng::seed_from_u64(seed);
        episode_seeds.set_stream(2 * index as u64 + 2);
        let mut actions = ChaCha8Rng::seed_from_u64(seed);
        actions.set_stream(2 * index as u64 + 3);
        let observation = env.reset(episode_seeds.random())?;
        Ok(Self {
            env,
            index,
            observation,
            episode_reward: 0.0,
            episode_length: 0,
            episode_seeds,
            actions,
        })
    }

    pub fn env(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    pub(crate) fn state(&self) -> Result<WorkerState> {
        Ok(WorkerState {
            env: self.env.snapshot()?,
            observation: self.observation.clone(),
            episode_reward: self.episode_reward,
            episode_length: self.episode_length,
            episode_seeds: self.episode_seeds.clone(),
            actions: self.actions.clone(),
        })
    }

    pub(crate) fn restore(
        mut env: Box<dyn Environment>,
        index: usize,
        state: WorkerState,
    ) -> Result<Self> {
        env.restore(&state.env)?;
        Ok(Self {
            env,
            index,
            observation: state.observation,
            episode_reward: state.episode_reward,
            episode_length: state.episode_length,
            episode_seeds: state.episode_seeds,
            actions: state.actions,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectories: Vec<Trajectory>,
    pub episodes: Vec<EpisodeRecord>,
}

impl Rollout {
    pub fn transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

fn stack(workers: &[Worker], obs_len: usize) -> Result<Array2<f64>> {
    let mut states = Array2::zeros((workers.len(), obs_len));
    for (mut row, w) in states.rows_mut().into_iter().zip(workers) {
        if w.observation.len() != obs_len {
            return Err(Error::Shape(format!(
                "worker {} observation has {} entries, network expects {obs_len}",
                w.index,
                w.observation.len()
            )));
        }
        row.assign(&ndarray::ArrayView1::from(&w.observation[..]));
    }
    Ok(states)
}

/// Runs every worker for `horizon` steps under the stochastic policy.
/// Episodes that end mid-rollout are reset from the worker's seed stream.
/// `step_offset` is the global step count before this rollout.
pub fn collect_rollout(
    workers: &mut [Worker],
    params: &PolicyParams,
    horizon: usize,
    step_offset: u64,
) -> Result<Rollout> {
    let obs_len = params.spec.input_len;
    let action_dim = params.spec.action_dim;
    if action_dim != 2 {
        return Err(Error::Shape(format!("environments take 2 actions, network has {action_dim}")));
    }
    let log_std = params.log_std().to_vec();
    let mut trajectories: Vec<Trajectory> =
        workers.iter().map(|_| Trajectory::new(obs_len, action_dim)).collect();
    let mut episodes = Vec::new();
    let n = workers.len();
    for t in 0..horizon {
        let states = stack(workers, obs_len)?;
        let (out, _) = forward_batch(params, states.view())?;
        for (i, w) in workers.iter_mut().enumerate() {
            let mean = out.mean.row(i);
            let sample = gaussian_policy(mean.as_slice().unwrap(), &log_std, &mut w.actions);
            let step = w.env.step([sample.action[0], sample.action[1]])?;
            trajectories[i].push(
                &w.observation,
                &sample.raw,
                sample.log_prob,
                out.value[i],
                step.reward,
                step.done,
            );
            w.episode_reward += step.reward;
            w.episode_length += 1;
            if step.done {
                episodes.push(EpisodeRecord {
                    step: step_offset + (t * n + i + 1) as u64,
                    worker: w.index,
                    reward: w.episode_reward,
                    length: w.episode_length,
                    termination: step.info,
                });
                w.episode_reward = 0.0;
                w.episode_length = 0;
                w.observation = w.env.reset(w.episode_seeds.random())?;
            } else {
                w.observation = step.observation;
            }
        }
    }
    let states = stack(workers, obs_len)?;
    let (out, _) = forward_batch(params, states.view())?;
    for (traj, v) in trajectories.iter_mut().zip(out.value.iter()) {
        traj.bootstrap_value = *v;
    }
    Ok(Rollout {
        trajectories,
        episodes,
    })
}

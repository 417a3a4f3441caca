use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rollout::WorkerState;
use super::{collect_rollout, update, Batch, EpisodeRecord, PpoConfig, UpdateStats, Worker};
use crate::env::{Environment, Termination};
use crate::neural::{save_checkpoint, Checkpoint, NetworkSpec, OptimizerState, PolicyParams};
use crate::{Error, Result};

pub const LOG_HEADER: &str =
    "step,episode_reward,episode_length,termination,policy_loss,value_loss,entropy,clip_fraction";

/// One training-log row: a finished episode plus the stats of the update
/// that followed its rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub episode_reward: f64,
    pub episode_length: u64,
    pub termination: Termination,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.episode_reward,
            self.episode_length,
            self.termination,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || Error::Format(format!("bad training-log row {line:?}"));
        if f.len() != 8 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok(Self {
            step: f[0].parse().map_err(|_| bad())?,
            episode_reward: num(f[1])?,
            episode_length: f[2].parse().map_err(|_| bad())?,
            termination: f[3].parse().map_err(|_| bad())?,
            policy_loss: num(f[4])?,
            value_loss: num(f[5])?,
            entropy: num(f[6])?,
            clip_fraction: num(f[7])?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TrainerSnapshot {
    seed: u64,
    updates: u64,
    shuffle: ChaCha8Rng,
    workers: Vec<WorkerState>,
}

/// Owns the parameters, optimizer and workers of one training run.
pub struct Trainer {
    pub config: PpoConfig,
    pub params: PolicyParams,
    pub optimizer: OptimizerState,
    workers: Vec<Worker>,
    shuffle: ChaCha8Rng,
    seed: u64,
    steps: u64,
    updates: u64,
}

impl Trainer {
    /// Fresh run with parameters initialized from `seed`.
    pub fn new(
        config: PpoConfig,
        spec: NetworkSpec,
        envs: Vec<Box<dyn Environment>>,
        seed: u64,
    ) -> Result<Self> {
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::init(spec, &mut init)?;
        Self::with_params(config, params, envs, seed)
    }

    /// Fresh run (new optimizer, step 0) starting from existing parameters.
    pub fn with_params(
        config: PpoConfig,
        params: PolicyParams,
        envs: Vec<Box<dyn Environment>>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        check_envs(&config, &params, &envs)?;
        let mut optimizer = OptimizerState::new(params.len(), config.learning_rate);
        optimizer.max_grad_norm = config.max_grad_norm;
        let workers = envs
            .into_iter()
            .enumerate()
            .map(|(i, env)| Worker::new(env, seed, i))
            .collect::<Result<Vec<_>>>()?;
        let mut shuffle = ChaCha8Rng::seed_from_u64(seed);
        shuffle.set_stream(1);
        Ok(Self {
            config,
            params,
            optimizer,
            workers,
            shuffle,
            seed,
            steps: 0,
            updates: 0,
        })
    }

    /// Continues a run from a checkpoint written by [`Trainer::checkpoint`].
    /// `envs` must be freshly built with the same settings as the original run.
    pub fn resume(config: PpoConfig, ckpt: Checkpoint, envs: Vec<Box<dyn Environment>>) -> Result<Self> {
        config.validate()?;
        check_envs(&config, &ckpt.params, &envs)?;
        let state = ckpt
            .trainer_state
            .ok_or_else(|| Error::Checkpoint("checkpoint carries no trainer state".into()))?;
        let snap: TrainerSnapshot = serde_json::from_value(state)
            .map_err(|e| Error::Checkpoint(format!("trainer state: {e}")))?;
        if snap.workers.len() != envs.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} workers, config asks for {}",
                snap.workers.len(),
                envs.len()
            )));
        }
        let workers = envs
            .into_iter()
            .zip(snap.workers)
            .enumerate()
            .map(|(i, (env, st))| Worker::restore(env, i, st))
            .collect::<Result<Vec<_>>>()?;
        let mut optimizer = ckpt.optimizer;
        optimizer.learning_rate = config.learning_rate;
        optimizer.max_grad_norm = config.max_grad_norm;
        Ok(Self {
            config,
            params: ckpt.params,
            optimizer,
            workers,
            shuffle: snap.shuffle,
            seed: snap.seed,
            steps: ckpt.train_steps,
            updates: snap.updates,
        })
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let snap = TrainerSnapshot {
            seed: self.seed,
            updates: self.updates,
            shuffle: self.shuffle.clone(),
            workers: self.workers.iter().map(Worker::state).collect::<Result<_>>()?,
        };
        Ok(Checkpoint {
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            train_steps: self.steps,
            trainer_state: Some(
                serde_json::to_value(snap).map_err(|e| Error::Checkpoint(e.to_string()))?,
            ),
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn is_finished(&self) -> bool {
        self.steps >= self.config.total_steps
    }

    /// One rollout followed by one update.
    pub fn iterate(&mut self) -> Result<(Vec<LogRow>, UpdateStats, Vec<EpisodeRecord>)> {
        let rollout = collect_rollout(&mut self.workers, &self.params, self.config.horizon, self.steps)?;
        let batch = Batch::from_trajectories(&rollout.trajectories, &self.config)?;
        let stats = update(
            &mut self.params,
            &mut self.optimizer,
            &batch,
            &self.config,
            &mut self.shuffle,
        )?;
        self.steps += rollout.transitions() as u64;
        self.updates += 1;
        let rows = rollout
            .episodes
            .iter()
            .map(|e| LogRow {
                step: e.step,
                episode_reward: e.reward,
                episode_length: e.length,
                termination: e.termination,
                policy_loss: stats.policy_loss,
                value_loss: stats.value_loss,
                entropy: stats.entropy,
                clip_fraction: stats.clip_fraction,
            })
            .collect();
        Ok((rows, stats, rollout.episodes))
    }
}

fn check_envs(config: &PpoConfig, params: &PolicyParams, envs: &[Box<dyn Environment>]) -> Result<()> {
    if envs.len() != config.num_envs {
        return Err(Error::Config(format!(
            "{} environments supplied, num_envs is {}",
            envs.len(),
            config.num_envs
        )));
    }
    if let Some(e) = envs.iter().find(|e| e.observation_len() != params.spec.input_len) {
        return Err(Error::Shape(format!(
            "environment observation length {} but network input {}",
            e.observation_len(),
            params.spec.input_len
        )));
    }
    Ok(())
}

/// Where [`train`] writes its log and checkpoints.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub dir: PathBuf,
    /// Save a checkpoint each time the step count crosses a multiple of
    /// this; 0 saves only the final one.
    pub checkpoint_interval: u64,
}

impl TrainOutputs {
    pub fn log_path(&self) -> PathBuf {
        self.dir.join("train_log.csv")
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("final.ckpt")
    }

    pub fn checkpoint_at(&self, steps: u64) -> PathBuf {
        self.dir.join(format!("checkpoint-{steps:010}.ckpt"))
    }
}

/// Alternates rollouts and updates until the step budget is spent. The log
/// is appended to, so a resumed run continues the same file.
pub fn train(
    trainer: &mut Trainer,
    outputs: Option<&TrainOutputs>,
    mut progress: impl FnMut(&Trainer, &UpdateStats, &[LogRow]),
) -> Result<Vec<LogRow>> {
    let mut log = match outputs {
        Some(out) => {
            fs::create_dir_all(&out.dir).map_err(|e| Error::io(&out.dir, e))?;
            let path = out.log_path();
            let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            if fresh {
                writeln!(f, "{LOG_HEADER}").map_err(|e| Error::io(&path, e))?;
            }
            Some((f, path))
        }
        None => None,
    };
    let mut all = Vec::new();
    while !trainer.is_finished() {
        let before = trainer.steps();
        let (rows, stats, _) = trainer.iterate()?;
        if let Some((f, path)) = log.as_mut() {
            let mut text = String::new();
            for r in &rows {
                text.push_str(&r.to_csv());
                text.push('\n');
            }
            f.write_all(text.as_bytes()).map_err(|e| Error::io(path.as_path(), e))?;
            f.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        if let Some(out) = outputs {
            let k = out.checkpoint_interval;
            if k > 0 && before / k != trainer.steps() / k {
                save_checkpoint(out.checkpoint_at(trainer.steps()), &trainer.checkpoint()?)?;
            }
        }
        progress(trainer, &stats, &rows);
        all.extend(rows);
    }
    if let Some(out) = outputs {
        save_checkpoint(out.final_checkpoint(), &trainer.checkpoint()?)?;
    }
    Ok(all)
}

/// Reads a training log written by [`train`].
pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == LOG_HEADER => {}
        _ => return Err(Error::Format(format!("{} lacks the training-log header", path.display()))),
    }
    lines.filter(|l| !l.trim().is_empty()).map(LogRow::parse).collect()
}

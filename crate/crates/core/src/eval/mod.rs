//! The experiment grid: seeded evaluations, baselines, data ablation,
//! perturbations and cross-task transfer.

mod report;
mod scenario;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::ReverbKind;
use crate::env::{random_policy, EnvKind, Environment, Partition, Termination};
use crate::neural::{forward, load_checkpoint, PolicyParams};
use crate::ppo::{train, LogRow, TrainOutputs, Trainer};
use crate::session::SessionLog;
use crate::{Error, Result};

pub use report::{
    combine_seeds, read_report, render_table, render_table_with, spec_hash, summarize, write_report,
    EpisodeOutcome, ExperimentReport, ReportFiles, Summary,
};
pub use scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    Checkpoint(PathBuf),
    Random,
    HumanLog(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: EnvKind,
    pub policy: PolicySource,
    pub episodes: usize,
    pub partition: Partition,
    /// Evaluation-time perturbations.
    pub reverb: ReverbKind,
    pub pitch_shift: bool,
    /// Training-time cap the evaluated agent was trained with (echoed only).
    pub utterance_cap: Option<usize>,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(kind: EnvKind, policy: PolicySource, seed: u64) -> Self {
        Self {
            kind,
            policy,
            episodes: 100,
            partition: Partition::Test,
            reverb: ReverbKind::None,
            pitch_shift: false,
            utterance_cap: None,
            seed,
        }
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Self {
        (self.reverb, self.pitch_shift) = match p {
            Perturbation::None => (ReverbKind::None, false),
            Perturbation::Reverb(kind) => (kind, false),
            Perturbation::PitchShift => (ReverbKind::None, true),
        };
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    None,
    Reverb(ReverbKind),
    PitchShift,
}

/// Scene seeds of an evaluation; identical for every policy given the same
/// spec seed, so baselines and agents face the same episodes.
pub fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    (0..episodes).map(|_| rng.random()).collect()
}

enum Actor<'a> {
    Network(&'a PolicyParams),
    Random(ChaCha8Rng),
}

impl Actor<'_> {
    fn act(&mut self, obs: &[f64]) -> Result<[f64; 2]> {
        match self {
            Actor::Network(p) => {
                let (out, _) = forward(p, obs)?;
                Ok([out.mean[[0, 0]], out.mean[[0, 1]]])
            }
            Actor::Random(rng) => Ok(random_policy(rng)),
        }
    }
}

fn play(
    env: &mut dyn Environment,
    actor: &mut Actor,
    seed: u64,
    episode: usize,
    step_cap: u64,
) -> Result<EpisodeOutcome> {
    let mut obs = env.reset(seed)?;
    let mut reward = 0.0;
    let mut steps = 0;
    loop {
        let r = env.step(actor.act(&obs)?)?;
        reward += r.reward;
        steps += 1;
        if r.done || steps >= step_cap {
            let termination = if r.done { r.info } else { Termination::Timeout };
            return Ok(EpisodeOutcome {
                episode,
                seed,
                reward,
                steps,
                termination,
            });
        }
        obs = r.observation;
    }
}

fn eval_env(scenario: &Scenario, spec: &ExperimentSpec) -> Result<Box<dyn Environment>> {
    let bank = scenario.bank(spec.partition, None)?;
    scenario.eval_env(spec.kind, bank, &scenario.perturbed_audio(spec.reverb, spec.pitch_shift))
}

fn check_episodes(spec: &ExperimentSpec) -> Result<()> {
    if spec.episodes == 0 {
        return Err(Error::InvalidArgument("an evaluation needs at least one episode".into()));
    }
    Ok(())
}

/// Evaluates the spec's policy source. Network policies act with their mean
/// action; episodes longer than the scenario's step cap end as timeouts.
pub fn run_eval(scenario: &Scenario, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    check_episodes(spec)?;
    match &spec.policy {
        PolicySource::Checkpoint(path) => {
            let ckpt = load_checkpoint(path)?;
            evaluate_params(scenario, spec, &ckpt.params)
        }
        PolicySource::Random => {
            let mut env = eval_env(scenario, spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(8);
            let mut actor = Actor::Random(rng);
            let rows = episode_seeds(spec.seed, spec.episodes)
                .into_iter()
                .enumerate()
                .map(|(i, s)| play(env.as_mut(), &mut actor, s, i, scenario.eval_step_cap))
                .collect::<Result<Vec<_>>>()?;
            Ok(ExperimentReport::new(spec.clone(), "Random", rows))
        }
        PolicySource::HumanLog(path) => replay_session(scenario, spec, &SessionLog::load(path)?),
    }
}

/// Evaluates in-memory parameters under the spec's protocol.
pub fn evaluate_params(
    scenario: &Scenario,
    spec: &ExperimentSpec,
    params: &PolicyParams,
) -> Result<ExperimentReport> {
    check_episodes(spec)?;
    let mut env = eval_env(scenario, spec)?;
    if params.spec.input_len != env.observation_len() {
        return Err(Error::Shape(format!(
            "policy expects {} inputs, environment produces {}",
            params.spec.input_len,
            env.observation_len()
        )));
    }
    let mut actor = Actor::Network(params);
    let rows = episode_seeds(spec.seed, spec.episodes)
        .into_iter()
        .enumerate()
        .map(|(i, s)| play(env.as_mut(), &mut actor, s, i, scenario.eval_step_cap))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(spec.clone(), "PPO", rows))
}

/// Replays the complete episodes of a human session log (up to
/// `spec.episodes`) and scores them like any other policy.
pub fn replay_session(
    scenario: &Scenario,
    spec: &ExperimentSpec,
    log: &SessionLog,
) -> Result<ExperimentReport> {
    check_episodes(spec)?;
    if log.kind != spec.kind {
        return Err(Error::Session(format!(
            "session log is for {}, evaluation is for {}",
            log.kind, spec.kind
        )));
    }
    let mut env = eval_env(scenario, spec)?;
    let mut rows = Vec::new();
    for ep in log.episodes.iter().filter(|e| e.is_complete()).take(spec.episodes) {
        env.reset(ep.seed)?;
        let mut reward = 0.0;
        let mut last = None;
        for (i, a) in ep.actions.iter().enumerate() {
            let r = env.step(*a)?;
            reward += r.reward;
            if r.done {
                if i + 1 != ep.actions.len() {
                    return Err(Error::Session(format!(
                        "episode with seed {} ended after {} of {} logged actions",
                        ep.seed,
                        i + 1,
                        ep.actions.len()
                    )));
                }
                last = Some(r.info);
            }
        }
        let termination = last.ok_or_else(|| {
            Error::Session(format!("episode with seed {} does not end on replay", ep.seed))
        })?;
        rows.push(EpisodeOutcome {
            episode: rows.len(),
            seed: ep.seed,
            reward,
            steps: ep.actions.len() as u64,
            termination,
        });
    }
    if rows.is_empty() {
        return Err(Error::Session("session log holds no complete episode".into()));
    }
    Ok(ExperimentReport::new(spec.clone(), "Human", rows))
}

/// Trains an agent on `kind` from `init` (or fresh parameters) with the
/// scenario's learner settings.
pub fn train_agent(
    scenario: &Scenario,
    kind: EnvKind,
    cap: Option<usize>,
    seed: u64,
    init: Option<PolicyParams>,
    outputs: Option<&TrainOutputs>,
    progress: impl FnMut(&Trainer, &crate::ppo::UpdateStats, &[LogRow]),
) -> Result<(PolicyParams, Vec<LogRow>)> {
    if let Some(c) = cap {
        scenario.check_cap(c)?;
    }
    let envs = scenario.training_envs(kind, cap)?;
    let mut trainer = match init {
        Some(p) => {
            if p.spec != scenario.network {
                return Err(Error::Shape("initial parameters do not match the configured network".into()));
            }
            Trainer::with_params(scenario.ppo.clone(), p, envs, seed)?
        }
        None => Trainer::new(scenario.ppo.clone(), scenario.network.clone(), envs, seed)?,
    };
    let rows = train(&mut trainer, outputs, progress)?;
    Ok((trainer.params, rows))
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub cap: usize,
    pub params: PolicyParams,
    pub log: Vec<LogRow>,
    pub report: ExperimentReport,
}

/// One train-and-evaluate run per utterance cap, in the order given.
pub fn data_ablation(
    scenario: &Scenario,
    kind: EnvKind,
    caps: &[usize],
    seed: u64,
    eval: &ExperimentSpec,
) -> Result<Vec<AblationResult>> {
    for &c in caps {
        scenario.check_cap(c)?;
    }
    caps.iter()
        .map(|&cap| {
            let (params, log) = train_agent(scenario, kind, Some(cap), seed, None, None, |_, _, _| {})?;
            let spec = ExperimentSpec {
                kind,
                utterance_cap: Some(cap),
                ..eval.clone()
            };
            let report = evaluate_params(scenario, &spec, &params)?;
            Ok(AblationResult {
                cap,
                params,
                log,
                report,
            })
        })
        .collect()
}

/// Evaluates a trained agent under one test-time perturbation.
pub fn perturbation_eval(
    scenario: &Scenario,
    params: &PolicyParams,
    base: &ExperimentSpec,
    perturbation: Perturbation,
) -> Result<ExperimentReport> {
    evaluate_params(scenario, &base.clone().with_perturbation(perturbation), params)
}

/// Source agent evaluated directly on the other task.
pub fn zero_shot(
    scenario: &Scenario,
    source: &PolicyParams,
    target: EnvKind,
    base: &ExperimentSpec,
) -> Result<ExperimentReport> {
    let spec = ExperimentSpec {
        kind: target,
        ..base.clone()
    };
    let mut report = evaluate_params(scenario, &spec, source)?;
    report.label = "Transferred".into();
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct FineTuneOutcome {
    pub fine_tuned: PolicyParams,
    pub fine_tune_log: Vec<LogRow>,
    pub scratch: PolicyParams,
    pub scratch_log: Vec<LogRow>,
}

/// Continues training `source` on `target` next to a from-scratch reference
/// with the same seed (hence the same episode and action streams).
pub fn fine_tune(
    scenario: &Scenario,
    source: &PolicyParams,
    target: EnvKind,
    seed: u64,
) -> Result<FineTuneOutcome> {
    let (fine_tuned, fine_tune_log) =
        train_agent(scenario, target, None, seed, Some(source.clone()), None, |_, _, _| {})?;
    let (scratch, scratch_log) = train_agent(scenario, target, None, seed, None, None, |_, _, _| {})?;
    Ok(FineTuneOutcome {
        fine_tuned,
        fine_tune_log,
        scratch,
        scratch_log,
    })
}

/// Binned mean episode reward of two training curves over `[0, until)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveComparison {
    /// `(bin end step, mean reward a, mean reward b)`; bins without an
    /// episode in either curve are dropped.
    pub bins: Vec<(u64, f64, f64)>,
}

impl CurveComparison {
    pub fn new(a: &[LogRow], b: &[LogRow], until: u64, bins: usize) -> Self {
        let width = (until / bins.max(1) as u64).max(1);
        let mean = |rows: &[LogRow], lo: u64, hi: u64| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.step > lo && r.step <= hi)
                .map(|r| r.episode_reward)
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let out = (0..bins as u64)
            .filter_map(|k| {
                let (lo, hi) = (k * width, (k + 1) * width);
                Some((hi, mean(a, lo, hi)?, mean(b, lo, hi)?))
            })
            .collect();
        Self { bins: out }
    }

    /// True when curve a is at least curve b in every bin.
    pub fn a_dominates(&self) -> bool {
        !self.bins.is_empty() && self.bins.iter().all(|(_, a, b)| a >= b)
    }
}

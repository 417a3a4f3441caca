use std::sync::Arc;

use audionav::env::{
    AudioSettings, EnvKind, Environment, NavigationConfig, NavigationEnv, Partition, SpeakerBank,
    StepResult, Termination, ToneVoices,
};
use audionav::neural::{forward, load_checkpoint, NetworkSpec, OptimizerState, PolicyParams, Variant};
use audionav::ppo::{
    collect_rollout, compute_gae, loss_and_gradient, read_log, train, update, Bandit, Batch,
    Minibatch, PpoConfig, TrainOutputs, Trainer, Trajectory, Worker,
};
use audionav::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec(input_len: usize) -> NetworkSpec {
    NetworkSpec {
        variant: Variant::Dnn,
        input_len,
        hidden: vec![16, 16],
        conv: Vec::new(),
        action_dim: 2,
    }
}

/// Ends every episode after exactly three steps; the observation encodes
/// the episode seed and the step index.
struct Countdown {
    seed: u64,
    t: u64,
}

impl Environment for Countdown {
    fn kind(&self) -> Option<EnvKind> {
        None
    }
    fn observation_len(&self) -> usize {
        4
    }
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.seed = seed;
        self.t = 0;
        Ok(self.obs())
    }
    fn step(&mut self, action: [f64; 2]) -> Result<StepResult> {
        self.t += 1;
        Ok(StepResult {
            observation: self.obs(),
            reward: action[0],
            done: self.t == 3,
            info: if self.t == 3 { Termination::Timeout } else { Termination::Running },
        })
    }
    fn scene(&self) -> Option<&audionav::env::AudioScene> {
        None
    }
    fn snapshot(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!([self.seed, self.t]))
    }
    fn restore(&mut self, v: &serde_json::Value) -> Result<()> {
        self.seed = v[0].as_u64().unwrap();
        self.t = v[1].as_u64().unwrap();
        Ok(())
    }
}

impl Countdown {
    fn obs(&self) -> Vec<f64> {
        vec![(self.seed % 1000) as f64 / 1000.0, self.t as f64 / 3.0, 0.5, -0.5]
    }
}

fn countdown_workers(n: usize, seed: u64) -> Vec<Worker> {
    (0..n)
        .map(|i| Worker::new(Box::new(Countdown { seed: 0, t: 0 }), seed, i).unwrap())
        .collect()
}

#[test]
fn rollout_bookkeeping_and_auto_reset() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = PolicyParams::init(small_spec(4), &mut rng).unwrap();
    let mut workers = countdown_workers(2, 5);
    let r = collect_rollout(&mut workers, &params, 8, 100).unwrap();
    assert_eq!(r.transitions(), 16);
    for traj in &r.trajectories {
        traj.validate().unwrap();
        assert_eq!(traj.dones, [false, false, true, false, false, true, false, false]);
        // step index restarts at 0 after a terminal
        assert_eq!(traj.states[3 * 4 + 1], 0.0);
        assert_ne!(traj.states[0], traj.states[3 * 4]);
        assert!(traj.log_probs.iter().all(|l| l.is_finite()));
        assert!(traj.values.iter().all(|v| v.is_finite()));
    }
    assert_eq!(r.episodes.len(), 4);
    let steps: Vec<u64> = r.episodes.iter().map(|e| e.step).collect();
    assert_eq!(steps, [105, 106, 111, 112]);
    assert!(r.episodes.iter().all(|e| e.length == 3));

    let mut again = countdown_workers(2, 5);
    let r2 = collect_rollout(&mut again, &params, 8, 100).unwrap();
    assert_eq!(r.trajectories, r2.trajectories);
    let mut other = countdown_workers(2, 6);
    assert_ne!(collect_rollout(&mut other, &params, 8, 100).unwrap().trajectories, r.trajectories);
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = PolicyParams::init(small_spec(4), &mut rng).unwrap();
    let before = params.clone();
    let mut workers = countdown_workers(2, 3);
    let r = collect_rollout(&mut workers, &params, 64, 0).unwrap();
    let cfg = PpoConfig {
        horizon: 64,
        num_envs: 2,
        minibatch_size: 32,
        learning_rate: 0.0,
        ..Default::default()
    };
    let batch = Batch::from_trajectories(&r.trajectories, &cfg).unwrap();
    let mut opt = OptimizerState::new(params.len(), 0.0);
    let stats = update(&mut params, &mut opt, &batch, &cfg, &mut rng).unwrap();
    assert_eq!(params, before);
    assert_eq!(stats.minibatches, 3 * 4);
    assert_eq!(stats.first.mean_ratio, 1.0);
    assert_eq!(stats.first.clip_fraction, 0.0);
    assert_eq!(stats.clip_fraction, 0.0);
    assert!(stats.policy_loss.is_finite() && stats.value_loss.is_finite());
}

#[test]
fn batch_advantages_are_normalized_and_targets_unnormalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = PolicyParams::init(small_spec(4), &mut rng).unwrap();
    let mut workers = countdown_workers(3, 3);
    let r = collect_rollout(&mut workers, &params, 20, 0).unwrap();
    let cfg = PpoConfig::default();
    let batch = Batch::from_trajectories(&r.trajectories, &cfg).unwrap();
    let n = batch.len() as f64;
    let mean = batch.advantages.iter().sum::<f64>() / n;
    let std = (batch.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(mean.abs() < 1e-6 && (std - 1.0).abs() < 1e-6);
    let raw: Vec<f64> = r
        .trajectories
        .iter()
        .flat_map(|t| compute_gae(t, cfg.gamma, cfg.gae_lambda).unwrap().returns)
        .collect();
    assert_eq!(batch.returns, raw);
}

/// The full clipped objective's gradient, log-std included, against central
/// differences. Old log-probs are offset so every ratio sits away from the
/// clip boundaries.
#[test]
fn loss_gradient_matches_finite_differences() {
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = NetworkSpec {
            hidden: vec![5, 4],
            ..small_spec(6)
        };
        let mut params = PolicyParams::init(spec, &mut rng).unwrap();
        for v in params.values.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        params.set_log_std(&[-0.4, 0.3]);
        let n = 7;
        let states = Array2::from_shape_fn((n, 6), |_| rng.random_range(-1.0..1.0));
        let actions = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.2..1.2));
        let mut mb = Minibatch {
            states,
            actions,
            old_log_probs: vec![0.0; n],
            advantages: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            returns: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        // ratios of exp(-0.05), exp(0.05) (inside) or exp(+-0.6) (clipped)
        let cfg = PpoConfig::default();
        let (_, _) = loss_and_gradient(&params, &mb, &cfg).unwrap();
        for i in 0..n {
            let row = mb.states.row(i).to_vec();
            let (out, _) = forward(&params, &row).unwrap();
            let lp = audionav::neural::gaussian_log_prob(
                mb.actions.row(i).as_slice().unwrap(),
                out.mean.row(0).as_slice().unwrap(),
                params.log_std(),
            );
            let offset = [-0.05, 0.05, -0.6, 0.6][i % 4];
            mb.old_log_probs[i] = lp - offset;
        }
        let (_, grads) = loss_and_gradient(&params, &mb, &cfg).unwrap();
        let h = 1e-5;
        for k in 0..params.len() {
            let mut p = params.clone();
            p.values[k] += h;
            let up = loss_and_gradient(&p, &mb, &cfg).unwrap().0.total;
            p.values[k] -= 2.0 * h;
            let down = loss_and_gradient(&p, &mb, &cfg).unwrap().0.total;
            let fd = (up - down) / (2.0 * h);
            let rel = (grads[k] - fd).abs() / (grads[k].abs() + 1e-8);
            assert!(
                rel < 1e-4 || (grads[k] - fd).abs() < 1e-9,
                "seed {seed} param {k}: analytic {} fd {fd}",
                grads[k]
            );
        }
    }
}

fn bandit_envs(n: usize, optimum: [f64; 2]) -> Vec<Box<dyn Environment>> {
    (0..n)
        .map(|_| Box::new(Bandit::new(optimum, 8).unwrap()) as Box<dyn Environment>)
        .collect()
}

fn bandit_config() -> PpoConfig {
    PpoConfig {
        horizon: 64,
        num_envs: 4,
        epochs: 4,
        minibatch_size: 64,
        learning_rate: 1e-3,
        total_steps: 64 * 4 * 50,
        ..Default::default()
    }
}

#[test]
fn bandit_converges_to_the_optimum() {
    let optimum = [0.4, -0.3];
    for seed in 0..3 {
        let cfg = bandit_config();
        let spec = NetworkSpec {
            hidden: vec![32, 32],
            ..small_spec(8)
        };
        let mut trainer = Trainer::new(cfg, spec, bandit_envs(4, optimum), seed).unwrap();
        let obs = Bandit::new(optimum, 8).unwrap().observation().to_vec();
        for _ in 0..50 {
            trainer.iterate().unwrap();
        }
        assert!(trainer.is_finished());
        // judged where training stops, not on the way past the optimum
        let (out, _) = forward(&trainer.params, &obs).unwrap();
        let m = out.mean.row(0);
        let miss = (m[0] - optimum[0]).hypot(m[1] - optimum[1]);
        assert!(miss < 0.1, "seed {seed}: mean {m} is {miss:.3} from the optimum after 50 updates");
    }
}

#[test]
fn train_consumes_exactly_the_budget() {
    let cfg = PpoConfig {
        horizon: 2048,
        num_envs: 1,
        total_steps: 4096,
        epochs: 1,
        minibatch_size: 1024,
        ..Default::default()
    };
    let mut trainer = Trainer::new(cfg, small_spec(8), bandit_envs(1, [0.0, 0.0]), 4).unwrap();
    let mut updates = 0;
    let rows = train(&mut trainer, None, |_, _, _| updates += 1).unwrap();
    assert_eq!(updates, 2);
    assert_eq!(trainer.updates(), 2);
    assert_eq!(trainer.steps(), 4096);
    assert_eq!(rows.len(), 4096);
    assert!(rows.windows(2).all(|w| w[0].step < w[1].step));
    assert!(rows.iter().all(|r| r.episode_reward.is_finite()));
}

fn nav_envs(n: usize) -> Vec<Box<dyn Environment>> {
    let pools = ToneVoices {
        frequencies: vec![440.0, 880.0],
        train_per_speaker: 4,
        test_per_speaker: 1,
        seed: 3,
    }
    .pools()
    .unwrap();
    let bank = Arc::new(SpeakerBank::from_pools(&pools, Partition::Train, None).unwrap());
    let cfg = NavigationConfig {
        room: (6.0, 6.0),
        speakers: 2,
        target_speaker: "tone440".into(),
        time_limit: Some(40),
        ..Default::default()
    };
    (0..n)
        .map(|_| {
            Box::new(NavigationEnv::new(cfg.clone(), AudioSettings::default(), bank.clone()).unwrap())
                as Box<dyn Environment>
        })
        .collect()
}

/// Resuming from a mid-run checkpoint replays the rest of the run bit for bit.
#[test]
fn resume_replays_the_same_run() {
    let cfg = PpoConfig {
        horizon: 32,
        num_envs: 2,
        epochs: 2,
        minibatch_size: 16,
        total_steps: 32 * 2 * 4,
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let full = TrainOutputs {
        dir: dir.path().join("full"),
        checkpoint_interval: 128,
    };
    let mut a = Trainer::new(cfg.clone(), small_spec(2048), nav_envs(2), 9).unwrap();
    let rows_a = train(&mut a, Some(&full), |_, _, _| {}).unwrap();
    assert!(!rows_a.is_empty());

    let mid = load_checkpoint(full.checkpoint_at(128)).unwrap();
    assert_eq!(mid.train_steps, 128);
    let resumed = TrainOutputs {
        dir: dir.path().join("resumed"),
        checkpoint_interval: 0,
    };
    let mut b = Trainer::resume(cfg.clone(), mid, nav_envs(2)).unwrap();
    let rows_b = train(&mut b, Some(&resumed), |_, _, _| {}).unwrap();
    let tail: Vec<_> = rows_a.iter().filter(|r| r.step > 128).cloned().collect();
    assert_eq!(rows_b, tail);
    assert_eq!(a.params, b.params);
    assert_eq!(a.optimizer, b.optimizer);

    let logged = read_log(&full.log_path()).unwrap();
    assert_eq!(logged, rows_a);
    let fin = load_checkpoint(full.final_checkpoint()).unwrap();
    assert_eq!(fin.params, a.params);
    assert_eq!(fin.train_steps, 256);

    // a second identical run reproduces the log file byte for byte
    let again = TrainOutputs {
        dir: dir.path().join("again"),
        checkpoint_interval: 0,
    };
    let mut c = Trainer::new(cfg, small_spec(2048), nav_envs(2), 9).unwrap();
    train(&mut c, Some(&again), |_, _, _| {}).unwrap();
    assert_eq!(
        std::fs::read(full.log_path()).unwrap(),
        std::fs::read(again.log_path()).unwrap()
    );
}

#[test]
fn mismatched_environments_are_rejected() {
    let cfg = PpoConfig {
        num_envs: 2,
        ..Default::default()
    };
    assert!(Trainer::new(cfg.clone(), small_spec(8), bandit_envs(1, [0.0, 0.0]), 0).is_err());
    assert!(Trainer::new(cfg, small_spec(9), bandit_envs(2, [0.0, 0.0]), 0).is_err());
}

#[test]
fn trajectory_push_keeps_lengths_in_step() {
    let mut t = Trajectory::new(3, 2);
    t.push(&[0.0; 3], &[0.1, 0.2], -1.0, 0.5, 0.0, false);
    t.push(&[1.0; 3], &[0.3, 0.4], -1.1, 0.4, 1.0, true);
    t.validate().unwrap();
    assert_eq!(t.len(), 2);
}

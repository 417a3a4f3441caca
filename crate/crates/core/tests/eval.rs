use std::collections::HashSet;

use audionav::config::parse_config;
use audionav::dsp::ReverbKind;
use audionav::env::{EnvKind, Partition, Termination};
use audionav::eval::{
    combine_seeds, episode_seeds, evaluate_params, perturbation_eval, read_report, replay_session, run_eval,
    spec_hash, summarize, write_report, zero_shot, CurveComparison, ExperimentSpec, Perturbation,
    PolicySource, Scenario,
};
use audionav::neural::{save_checkpoint, Checkpoint, OptimizerState, PolicyParams};
use audionav::ppo::LogRow;
use audionav::session::{LoggedEpisode, SessionLog};
use audionav::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario() -> Scenario {
    let cfg = parse_config(
        "[environment]
room_width = 6
room_depth = 6
nav_speakers = 2
target_speaker = tone440
nav_time_limit = 60
loc_speakers_max = 3
loc_time_limit = 60
[audio]
tone_frequencies = 440,880,660
tone_train_clips = 6
tone_test_clips = 2
[network]
hidden = 8
[ppo]
horizon = 16
num_envs = 2
minibatch_size = 16
[run]
total_steps = 64
eval_step_cap = 40
",
    )
    .unwrap();
    Scenario::from_config(&cfg).unwrap()
}

fn params(s: &Scenario, seed: u64) -> PolicyParams {
    PolicyParams::init(s.network.clone(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn spec(kind: EnvKind, policy: PolicySource) -> ExperimentSpec {
    ExperimentSpec {
        episodes: 6,
        ..ExperimentSpec::new(kind, policy, 11)
    }
}

#[test]
fn zero_episodes_is_rejected() {
    let s = scenario();
    let sp = ExperimentSpec {
        episodes: 0,
        ..spec(EnvKind::Navigation, PolicySource::Random)
    };
    assert!(matches!(run_eval(&s, &sp), Err(Error::InvalidArgument(_))));
    assert!(evaluate_params(&s, &sp, &params(&s, 0)).is_err());
}

#[test]
fn reports_are_reproducible_and_recomputable() {
    let s = scenario();
    for kind in [EnvKind::Navigation, EnvKind::Localization] {
        let sp = spec(kind, PolicySource::Random);
        let a = run_eval(&s, &sp).unwrap();
        let b = run_eval(&s, &sp).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes.len(), 6);
        // independent re-aggregation
        let n = a.episodes.len() as f64;
        let mean = a.episodes.iter().map(|e| e.reward).sum::<f64>() / n;
        let var = a.episodes.iter().map(|e| (e.reward - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let wins = a.episodes.iter().filter(|e| e.termination.is_success()).count();
        assert!((a.summary.mean_reward - mean).abs() < 1e-12);
        assert!((a.summary.std_reward - var.sqrt()).abs() < 1e-12);
        assert_eq!(a.summary.success_rate, wins as f64 / n);
        assert_eq!(a.summary.causes.values().sum::<usize>(), 6);
        assert!(a.episodes.iter().all(|e| e.steps <= 40 && e.termination != Termination::Running));
        let seeds: Vec<u64> = a.episodes.iter().map(|e| e.seed).collect();
        assert_eq!(seeds, episode_seeds(11, 6));
    }
}

#[test]
fn network_policy_is_deterministic_and_perturbation_none_is_a_no_op() {
    let s = scenario();
    let p = params(&s, 3);
    let sp = spec(EnvKind::Navigation, PolicySource::Random);
    let plain = evaluate_params(&s, &sp, &p).unwrap();
    assert_eq!(plain, evaluate_params(&s, &sp, &p).unwrap());
    let none = perturbation_eval(&s, &p, &sp, Perturbation::None).unwrap();
    assert_eq!(none.episodes, plain.episodes);
    let reverb = perturbation_eval(&s, &p, &sp, Perturbation::Reverb(ReverbKind::Auditorium)).unwrap();
    assert_eq!(reverb.spec.reverb, ReverbKind::Auditorium);
    let pitch = perturbation_eval(&s, &p, &sp, Perturbation::PitchShift).unwrap();
    assert!(pitch.spec.pitch_shift);
}

#[test]
fn checkpoint_source_matches_in_memory_params() {
    let s = scenario();
    let p = params(&s, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.ckpt");
    save_checkpoint(
        &path,
        &Checkpoint {
            optimizer: OptimizerState::new(p.len(), 3e-4),
            params: p.clone(),
            train_steps: 0,
            trainer_state: None,
        },
    )
    .unwrap();
    let sp = spec(EnvKind::Localization, PolicySource::Checkpoint(path));
    let from_file = run_eval(&s, &sp).unwrap();
    let direct = evaluate_params(&s, &sp, &p).unwrap();
    assert_eq!(from_file.episodes, direct.episodes);

    let missing = spec(EnvKind::Localization, PolicySource::Checkpoint(dir.path().join("nope.ckpt")));
    assert!(matches!(run_eval(&s, &missing), Err(Error::Io { .. })));
}

#[test]
fn human_logs_replay_exactly() {
    let s = scenario();
    // the environment a session server hands to human players
    let bank = s.bank(Partition::Test, None).unwrap();
    let mut env = s.eval_env(EnvKind::Navigation, bank, &s.audio).unwrap();
    let mut log = SessionLog::new(EnvKind::Navigation);
    let mut expected = Vec::new();
    for (i, seed) in [5u64, 6, 7].into_iter().enumerate() {
        env.reset(seed).unwrap();
        let mut actions = Vec::new();
        let mut reward = 0.0;
        let term;
        // bang-bang "keys": up, then right
        loop {
            let a = if actions.len() % 2 == 0 { [0.0, 1.0] } else { [1.0, 0.0] };
            let r = env.step(a).unwrap();
            actions.push(a);
            reward += r.reward;
            if r.done {
                term = Some(r.info);
                break;
            }
        }
        if i == 1 {
            // an aborted episode is skipped on replay
            log.episodes.push(LoggedEpisode { seed, actions: actions[..3].to_vec(), reward: 0.0, termination: None });
        } else {
            expected.push((reward, term.unwrap()));
        }
        log.episodes.push(LoggedEpisode { seed, actions, reward, termination: term });
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("human.json");
    log.save(&path).unwrap();
    let report = run_eval(&s, &spec(EnvKind::Navigation, PolicySource::HumanLog(path))).unwrap();
    assert_eq!(report.label, "Human");
    assert_eq!(report.episodes.len(), 3);
    assert_eq!(report.episodes[0].reward, expected[0].0);
    assert_eq!(report.episodes[0].termination, expected[0].1);

    let wrong = spec(EnvKind::Localization, PolicySource::Random);
    assert!(replay_session(&s, &wrong, &log).is_err());
}

#[test]
fn partitions_are_disjoint_and_caps_behave() {
    let s = scenario();
    for pool in s.pools.iter() {
        let train: HashSet<&str> = pool.train_clips.iter().map(|c| c.id.as_str()).collect();
        assert!(pool.test_clips.iter().all(|c| !train.contains(c.id.as_str())));
    }
    assert!(s.check_cap(6).is_ok());
    assert!(s.check_cap(7).is_err());
    assert!(s.training_envs(EnvKind::Navigation, Some(7)).is_err());

    // cap 1: every episode of a speaker plays the same utterance
    let mut envs = s.training_envs(EnvKind::Navigation, Some(1)).unwrap();
    let mut seen = HashSet::new();
    for seed in 0..20 {
        envs[0].reset(seed).unwrap();
        for src in &envs[0].scene().unwrap().sources {
            seen.insert((src.speaker, src.playback.clip_index));
        }
    }
    assert!(seen.iter().all(|&(_, clip)| clip == 0));
}

#[test]
fn reports_land_in_named_files() {
    let s = scenario();
    let sp = spec(EnvKind::Navigation, PolicySource::Random);
    let report = run_eval(&s, &sp).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_report(dir.path(), &report).unwrap();
    let (csv, md) = (files.csv, files.markdown);
    assert_eq!(read_report(&files.json).unwrap(), report);
    let name = csv.file_name().unwrap().to_str().unwrap().to_string();
    assert!(name.contains(&spec_hash(&sp)) && name.ends_with("seed11.csv"), "{name}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    let summary = std::fs::read_to_string(&md).unwrap();
    assert!(summary.contains("| Random |"));

    let other = ExperimentSpec { seed: 12, ..sp.clone() };
    assert_ne!(spec_hash(&other), spec_hash(&sp));
    let r2 = run_eval(&s, &other).unwrap();
    let both = combine_seeds(&[report.clone(), r2.clone()]).unwrap();
    assert_eq!(both.episodes, 12);
    let m = [report.summary.mean_reward, r2.summary.mean_reward];
    let want = ((m[0] - m[1]).powi(2) / 2.0).sqrt();
    assert!((both.per_seed_std.unwrap() - want).abs() < 1e-12);
    assert_eq!(summarize(&report.episodes), report.summary);
}

#[test]
fn zero_shot_runs_on_the_other_task() {
    let s = scenario();
    let p = params(&s, 8);
    let r = zero_shot(&s, &p, EnvKind::Localization, &spec(EnvKind::Navigation, PolicySource::Random)).unwrap();
    assert_eq!(r.spec.kind, EnvKind::Localization);
    assert_eq!(r.label, "Transferred");
}

fn row(step: u64, reward: f64) -> LogRow {
    LogRow {
        step,
        episode_reward: reward,
        episode_length: 1,
        termination: Termination::Timeout,
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
    }
}

#[test]
fn curve_comparison_bins() {
    let a: Vec<LogRow> = (1..=100).map(|s| row(s, 1.0)).collect();
    let b: Vec<LogRow> = (1..=100).map(|s| row(s, s as f64 / 100.0)).collect();
    let c = CurveComparison::new(&a, &b, 40, 4);
    assert_eq!(c.bins.len(), 4);
    assert_eq!(c.bins[0].0, 10);
    assert!((c.bins[0].2 - 0.055).abs() < 1e-12);
    assert!(c.a_dominates());
    assert!(!CurveComparison::new(&b, &a, 40, 4).a_dominates());
}

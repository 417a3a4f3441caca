use std::collections::HashSet;
use std::path::Path;

use audionav::dataset::{load_pools, prepare_dataset, read_manifest, split_counts, MANIFEST_FILE};
use audionav::dsp::{write_wav, AudioClip, VadParams, SAMPLE_RATE};

/// `bursts` half-second tones separated by half-second near-silence.
fn recording(bursts: usize, freq: f64) -> AudioClip {
    let sr = SAMPLE_RATE as usize;
    let mut s = vec![0f32; sr / 2];
    for b in 0..bursts {
        for i in 0..sr / 2 {
            let t = i as f64 / sr as f64;
            s.push((0.5 * (2.0 * std::f64::consts::PI * freq * (1.0 + 0.05 * b as f64) * t).sin()) as f32);
        }
        s.extend((0..sr / 2).map(|i| 1e-4 * ((i % 7) as f32 - 3.0)));
    }
    AudioClip::new(s, SAMPLE_RATE, "raw").unwrap()
}

fn raw_corpus(root: &Path) {
    let alice = root.join("alice");
    std::fs::create_dir_all(&alice).unwrap();
    write_wav(alice.join("session.wav"), &recording(12, 300.0)).unwrap();
    let bob = root.join("bob");
    std::fs::create_dir_all(&bob).unwrap();
    for k in 0..3 {
        write_wav(bob.join(format!("take{k}.wav")), &recording(2, 500.0)).unwrap();
    }
    std::fs::write(bob.join("broken.wav"), b"not a wav").unwrap();
    std::fs::write(bob.join("notes.txt"), b"ignored").unwrap();
}

#[test]
fn twelve_utterances_split_ten_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (raw, out) = (tmp.path().join("raw"), tmp.path().join("out"));
    raw_corpus(&raw);
    let report = prepare_dataset(&raw, &out, 42, &VadParams::default()).unwrap();

    assert_eq!(report.skipped.len(), 1);
    assert!(report.skipped[0].0.ends_with("broken.wav"));

    let count = |spk: &str, part: &str| {
        report.rows.iter().filter(|r| r.speaker_id == spk && r.partition == part).count()
    };
    assert_eq!((count("alice", "train"), count("alice", "test")), (10, 2));
    assert_eq!((count("bob", "train"), count("bob", "test")), split_counts(6));
    for r in &report.rows {
        assert!((r.duration_s - 0.5).abs() < 0.1, "{r:?}");
        assert!(out.join(&r.path).is_file());
    }
    let ids: HashSet<&str> = report.rows.iter().map(|r| r.utterance_id.as_str()).collect();
    assert_eq!(ids.len(), report.rows.len());

    assert_eq!(read_manifest(out.join(MANIFEST_FILE)).unwrap(), report.rows);
    let pools = load_pools(&out).unwrap();
    assert_eq!(pools.len(), 2);
    assert_eq!(pools[0].speaker_id, "alice");
    assert_eq!((pools[0].train_clips.len(), pools[0].test_clips.len()), (10, 2));
    for p in &pools {
        let train: HashSet<&str> = p.train_clips.iter().map(|c| c.id.as_str()).collect();
        assert!(p.test_clips.iter().all(|c| !train.contains(c.id.as_str())));
    }
}

#[test]
fn split_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    raw_corpus(&raw);
    let vad = VadParams::default();
    let a = prepare_dataset(&raw, tmp.path().join("a"), 7, &vad).unwrap();
    let b = prepare_dataset(&raw, tmp.path().join("b"), 7, &vad).unwrap();
    assert_eq!(a.rows, b.rows);
    let test_set = |seed| -> HashSet<String> {
        let r = prepare_dataset(&raw, tmp.path().join(format!("s{seed}")), seed, &vad).unwrap();
        r.rows.into_iter().filter(|r| r.partition == "test").map(|r| r.utterance_id).collect()
    };
    let first = test_set(0);
    assert!((1..20).any(|s| test_set(s) != first));
}

#[test]
fn empty_or_missing_input_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let vad = VadParams::default();
    assert!(prepare_dataset(tmp.path().join("missing"), tmp.path().join("o"), 0, &vad).is_err());
    std::fs::create_dir_all(tmp.path().join("empty")).unwrap();
    assert!(prepare_dataset(tmp.path().join("empty"), tmp.path().join("o"), 0, &vad).is_err());
    assert!(load_pools(tmp.path().join("o")).is_err());
}

//! Turning raw per-speaker recordings into utterance pools on disk.
//!
//! Layout: `raw/<speaker>/*.wav` in, `out/<speaker>/<utterance>.wav` plus
//! `out/manifest.csv` out.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{load_wav, vad_segment, write_wav, AudioClip, UtterancePool, VadParams, SAMPLE_RATE};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
const MAX_TRAIN: usize = 500;
const MAX_TEST: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub speaker_id: String,
    pub utterance_id: String,
    pub duration_s: f64,
    /// `train`, `test`, or `unused` when a speaker has more than 600.
    pub partition: String,
    /// Relative to the manifest's directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareReport {
    pub rows: Vec<ManifestRow>,
    /// Files that could not be read, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Train and test sizes for `n` utterances: 500/100 when there are enough,
/// the same 5:1 proportion otherwise.
pub fn split_counts(n: usize) -> (usize, usize) {
    if n < 2 {
        return (n, 0);
    }
    let test = ((n as f64 / 6.0).round() as usize).clamp(1, MAX_TEST);
    ((n - test).min(MAX_TRAIN), test)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn is_wav(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn speaker_rng(seed: u64, speaker: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(speaker.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(bytes))
}

/// Segments every recording with the voice-activity detector and writes the
/// utterances with a seeded per-speaker train/test split.
pub fn prepare_dataset(
    raw_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    seed: u64,
    vad: &VadParams,
) -> Result<PrepareReport> {
    let (raw_dir, out_dir) = (raw_dir.as_ref(), out_dir.as_ref());
    let speakers: Vec<PathBuf> = sorted_entries(raw_dir)?.into_iter().filter(|p| p.is_dir()).collect();
    if speakers.is_empty() {
        return Err(Error::Config(format!("{} has no speaker directories", raw_dir.display())));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for dir in speakers {
        let speaker = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Config(format!("speaker directory {} is not UTF-8", dir.display())))?
            .to_string();
        let mut utterances: Vec<AudioClip> = Vec::new();
        for file in sorted_entries(&dir)?.into_iter().filter(|p| is_wav(p)) {
            let clip = match load_wav(&file) {
                Ok(c) => c,
                Err(e) => {
                    skipped.push((file, e.to_string()));
                    continue;
                }
            };
            let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("clip");
            let clip = AudioClip {
                id: format!("{speaker}-{stem}"),
                ..clip
            };
            utterances.extend(vad_segment(&clip, vad)?);
        }
        if utterances.is_empty() {
            return Err(Error::Config(format!("speaker {speaker} yielded no utterances")));
        }
        let (n_train, n_test) = split_counts(utterances.len());
        let mut order: Vec<usize> = (0..utterances.len()).collect();
        order.shuffle(&mut speaker_rng(seed, &speaker));
        let mut partition = vec!["unused"; utterances.len()];
        for (rank, &i) in order.iter().enumerate() {
            if rank < n_test {
                partition[i] = "test";
            } else if rank < n_test + n_train {
                partition[i] = "train";
            }
        }
        let speaker_out = out_dir.join(&speaker);
        fs::create_dir_all(&speaker_out).map_err(|e| Error::io(&speaker_out, e))?;
        for (clip, part) in utterances.iter().zip(partition) {
            let rel = format!("{speaker}/{}.wav", clip.id);
            write_wav(out_dir.join(&rel), clip)?;
            rows.push(ManifestRow {
                speaker_id: speaker.clone(),
                utterance_id: clip.id.clone(),
                duration_s: clip.samples.len() as f64 / SAMPLE_RATE as f64,
                partition: part.to_string(),
                path: rel,
            });
        }
    }
    write_manifest(out_dir.join(MANIFEST_FILE), &rows)?;
    Ok(PrepareReport { rows, skipped })
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    })?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

/// Loads a prepared dataset into one pool per speaker, in manifest order.
pub fn load_pools(dataset_dir: impl AsRef<Path>) -> Result<Vec<UtterancePool>> {
    let dir = dataset_dir.as_ref();
    let rows = read_manifest(dir.join(MANIFEST_FILE))?;
    let mut pools: Vec<UtterancePool> = Vec::new();
    for row in rows {
        let idx = match pools.iter().position(|p| p.speaker_id == row.speaker_id) {
            Some(i) => i,
            None => {
                pools.push(UtterancePool {
                    speaker_id: row.speaker_id.clone(),
                    ..Default::default()
                });
                pools.len() - 1
            }
        };
        let target = match row.partition.as_str() {
            "train" => &mut pools[idx].train_clips,
            "test" => &mut pools[idx].test_clips,
            "unused" => continue,
            other => return Err(Error::Format(format!("unknown partition {other:?}"))),
        };
        let clip = load_wav(dir.join(&row.path))?;
        target.push(AudioClip {
            id: row.utterance_id,
            ..clip
        });
    }
    for p in &pools {
        p.validate()?;
    }
    Ok(pools)
}

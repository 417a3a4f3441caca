use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{synth_tone, AudioClip, UtterancePool};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

/// One speaker's active utterances.
#[derive(Debug, Clone)]
pub struct Speaker {
    pub id: String,
    pub clips: Arc<Vec<AudioClip>>,
}

/// The utterances environments draw from, one partition of every speaker.
#[derive(Debug, Clone)]
pub struct SpeakerBank {
    pub speakers: Vec<Speaker>,
    pub partition: Partition,
}

impl SpeakerBank {
    /// Selects one partition from each pool, optionally keeping only the
    /// first `cap` training utterances per speaker.
    pub fn from_pools(pools: &[UtterancePool], partition: Partition, cap: Option<usize>) -> Result<Self> {
        if pools.is_empty() {
            return Err(Error::Config("no speakers in the dataset".into()));
        }
        let speakers = pools
            .iter()
            .map(|pool| {
                pool.validate()?;
                let mut pool = pool.clone();
                if let (Some(c), Partition::Train) = (cap, partition) {
                    pool.cap_train(c)?;
                }
                let clips = match partition {
                    Partition::Train => pool.train_clips,
                    Partition::Test => pool.test_clips,
                };
                if clips.is_empty() {
                    return Err(Error::Config(format!(
                        "speaker {} has no {partition:?} utterances",
                        pool.speaker_id
                    )));
                }
                Ok(Speaker {
                    id: pool.speaker_id,
                    clips: Arc::new(clips),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            speakers,
            partition,
        })
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.speakers.iter().position(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }
}

/// Synthetic stand-in for recorded speech: each "speaker" is a base
/// frequency, each utterance a sine within ±2% of it lasting 0.5 to 1.5 s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneVoices {
    pub frequencies: Vec<f64>,
    pub train_per_speaker: usize,
    pub test_per_speaker: usize,
    pub seed: u64,
}

impl ToneVoices {
    pub fn pools(&self) -> Result<Vec<UtterancePool>> {
        self.frequencies
            .iter()
            .enumerate()
            .map(|(s, &f0)| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((s as u64 + 1) << 32));
                let speaker_id = format!("tone{:.0}", f0);
                let mut make = |tag: &str, i: usize| -> Result<AudioClip> {
                    let freq = f0 * (1.0 + rng.random_range(-0.02..=0.02));
                    let duration = rng.random_range(0.5..=1.5);
                    let amplitude = rng.random_range(0.6..=0.99);
                    let mut clip = synth_tone(freq, duration, amplitude)?;
                    clip.id = format!("{speaker_id}-{tag}{i:04}");
                    Ok(clip)
                };
                let train_clips = (0..self.train_per_speaker)
                    .map(|i| make("train", i))
                    .collect::<Result<_>>()?;
                let test_clips = (0..self.test_per_speaker)
                    .map(|i| make("test", i))
                    .collect::<Result<_>>()?;
                Ok(UtterancePool {
                    speaker_id,
                    train_clips,
                    test_clips,
                })
            })
            .collect()
    }
}

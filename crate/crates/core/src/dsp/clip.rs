use std::collections::HashSet;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Canonical sample rate of every clip and every rendered frame.
pub const SAMPLE_RATE: u32 = 48_000;

/// Peak level clips are normalized to at load time.
pub const PEAK_LEVEL: f32 = 0.99;

/// A mono clip of audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32, id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::EmptyClip(id));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument(format!("clip {id}: sample rate must be > 0")));
        }
        if let Some(bad) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "clip {id}: sample {bad} is {} (must be finite and within [-1, 1])",
                samples[bad]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            id,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Pure sine at 48 kHz: sample `n` is `amplitude * sin(2π f n / 48000)`.
pub fn synth_tone(freq: f64, duration: f64, amplitude: f64) -> Result<AudioClip> {
    if !(20.0..=20_000.0).contains(&freq) {
        return Err(Error::InvalidArgument(format!(
            "tone frequency {freq} Hz outside [20, 20000]"
        )));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!("tone duration {duration} must be > 0")));
    }
    if !(0.0..=1.0).contains(&amplitude) {
        return Err(Error::InvalidArgument(format!("tone amplitude {amplitude} outside [0, 1]")));
    }
    let rate = f64::from(SAMPLE_RATE);
    let len = ((duration * rate).round() as usize).max(1);
    let samples = (0..len)
        .map(|n| (amplitude * (2.0 * PI * freq * n as f64 / rate).sin()) as f32)
        .collect();
    AudioClip::new(samples, SAMPLE_RATE, format!("tone-{freq}Hz"))
}

/// Linear-interpolation resampler. Output length is `round(len * to / from)`.
pub fn resample_linear(samples: &[f32], from_rate: u32, to_rate: u32) -> Vec<f32> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = f64::from(from_rate) / f64::from(to_rate);
    let out_len = ((samples.len() as f64) / ratio).round().max(1.0) as usize;
    (0..out_len)
        .map(|n| interpolate(samples, n as f64 * ratio))
        .collect()
}

/// Linear interpolation of `samples` at fractional `position`, holding the
/// last sample past the end.
pub(crate) fn interpolate(samples: &[f32], position: f64) -> f32 {
    let last = samples.len() - 1;
    let base = position.floor();
    let idx = base as usize;
    if idx >= last {
        return samples[last];
    }
    let frac = position - base;
    if frac == 0.0 {
        return samples[idx];
    }
    let a = f64::from(samples[idx]);
    let b = f64::from(samples[idx + 1]);
    (a + (b - a) * frac) as f32
}

/// Scales `samples` so the largest magnitude equals `peak`. All-zero input is
/// left untouched.
pub fn peak_normalize(samples: &mut [f32], peak: f32) {
    let max = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
    if max > 0.0 {
        let scale = f64::from(peak) / f64::from(max);
        for s in samples.iter_mut() {
            *s = (f64::from(*s) * scale) as f32;
        }
    }
}

/// The train and test utterances of one speaker.
#[derive(Debug, Clone, Default)]
pub struct UtterancePool {
    pub speaker_id: String,
    pub train_clips: Vec<AudioClip>,
    pub test_clips: Vec<AudioClip>,
}

impl UtterancePool {
    pub fn validate(&self) -> Result<()> {
        let train: HashSet<&str> = self.train_clips.iter().map(|c| c.id.as_str()).collect();
        if let Some(dup) = self.test_clips.iter().find(|c| train.contains(c.id.as_str())) {
            return Err(Error::Config(format!(
                "speaker {}: clip {} is in both train and test partitions",
                self.speaker_id, dup.id
            )));
        }
        Ok(())
    }

    /// Keeps only the first `cap` training utterances.
    pub fn cap_train(&mut self, cap: usize) -> Result<()> {
        if cap == 0 || cap > self.train_clips.len() {
            return Err(Error::Config(format!(
                "speaker {}: utterance cap {cap} exceeds pool of {}",
                self.speaker_id,
                self.train_clips.len()
            )));
        }
        self.train_clips.truncate(cap);
        Ok(())
    }
}

//! Schroeder reverberator: four parallel feedback combs into two series
//! all-pass stages.

use serde::{Deserialize, Serialize};

use super::clip::SAMPLE_RATE;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReverbKind {
    None,
    Room,
    Auditorium,
}

impl std::str::FromStr for ReverbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ReverbKind::None),
            "room" => Ok(ReverbKind::Room),
            "auditorium" => Ok(ReverbKind::Auditorium),
            other => Err(Error::InvalidArgument(format!(
                "unknown reverb preset {other:?} (expected none, room or auditorium)"
            ))),
        }
    }
}

impl std::fmt::Display for ReverbKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReverbKind::None => "none",
            ReverbKind::Room => "room",
            ReverbKind::Auditorium => "auditorium",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReverbPreset {
    pub name: ReverbKind,
    pub comb_delays: [usize; 4],
    pub comb_feedbacks: [f64; 4],
    pub allpass_delays: [usize; 2],
    pub allpass_gain: f64,
    pub wet_mix: f64,
}

// Freeverb tunings rescaled from 44.1 kHz to 48 kHz.
const COMB_DELAYS: [usize; 4] = [1695, 1760, 1623, 1548];
const ALLPASS_DELAYS: [usize; 2] = [605, 245];
const ALLPASS_GAIN: f64 = 0.7;

impl ReverbPreset {
    /// Comb feedback gains are set so each comb decays by 60 dB in `rt60`
    /// seconds.
    pub fn from_rt60(name: ReverbKind, rt60: f64, wet_mix: f64) -> Self {
        let feedbacks = COMB_DELAYS.map(|d| {
            10f64.powf(-3.0 * d as f64 / (rt60 * f64::from(SAMPLE_RATE)))
        });
        Self {
            name,
            comb_delays: COMB_DELAYS,
            comb_feedbacks: feedbacks,
            allpass_delays: ALLPASS_DELAYS,
            allpass_gain: ALLPASS_GAIN,
            wet_mix,
        }
    }

    pub fn for_kind(kind: ReverbKind) -> Self {
        match kind {
            ReverbKind::None => Self {
                wet_mix: 0.0,
                ..Self::from_rt60(ReverbKind::None, 0.4, 0.0)
            },
            ReverbKind::Room => Self::from_rt60(ReverbKind::Room, 0.4, 0.3),
            ReverbKind::Auditorium => Self::from_rt60(ReverbKind::Auditorium, 1.5, 0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.comb_feedbacks.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return bad(format!("comb feedbacks {:?} must lie in (0, 1)", self.comb_feedbacks));
        }
        if self.comb_delays.iter().chain(&self.allpass_delays).any(|&d| d == 0) {
            return bad("reverb delays must be at least one sample".into());
        }
        if !(self.allpass_gain.abs() < 1.0) {
            return bad(format!("all-pass gain {} must satisfy |g| < 1", self.allpass_gain));
        }
        if !(0.0..=1.0).contains(&self.wet_mix) {
            return bad(format!("wet mix {} outside [0, 1]", self.wet_mix));
        }
        if (self.wet_mix == 0.0) != (self.name == ReverbKind::None) {
            return bad("wet mix must be zero exactly for the 'none' preset".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DelayLine {
    buf: Vec<f64>,
    pos: usize,
}

impl DelayLine {
    fn new(len: usize) -> Self {
        Self {
            buf: vec![0.0; len],
            pos: 0,
        }
    }

    /// Value written `len` samples ago.
    fn read(&self) -> f64 {
        self.buf[self.pos]
    }

    fn write_advance(&mut self, v: f64) {
        self.buf[self.pos] = v;
        self.pos = (self.pos + 1) % self.buf.len();
    }
}

/// Filter memory carried between successive frames of one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverbState {
    combs: Vec<DelayLine>,
    allpasses: Vec<DelayLine>,
}

impl ReverbState {
    pub fn new(preset: &ReverbPreset) -> Self {
        Self {
            combs: preset.comb_delays.iter().map(|&d| DelayLine::new(d)).collect(),
            allpasses: preset.allpass_delays.iter().map(|&d| DelayLine::new(d)).collect(),
        }
    }
}

/// Processes one block, updating `state` in place.
///
/// Each comb output is scaled by `sqrt(1 - g^2)` so broadband input keeps
/// roughly its level after reverberation.
pub fn reverb_apply(input: &[f64], preset: &ReverbPreset, state: &mut ReverbState) -> Vec<f64> {
    if preset.name == ReverbKind::None {
        return input.to_vec();
    }
    let comb_norm: [f64; 4] = preset.comb_feedbacks.map(|g| (1.0 - g * g).sqrt() / 4.0);
    let mix = preset.wet_mix;
    input
        .iter()
        .map(|&x| {
            let mut wet = 0.0;
            for ((line, &g), &norm) in state
                .combs
                .iter_mut()
                .zip(&preset.comb_feedbacks)
                .zip(&comb_norm)
            {
                let y = x + g * line.read();
                line.write_advance(y);
                wet += norm * y;
            }
            let ga = preset.allpass_gain;
            for line in state.allpasses.iter_mut() {
                let delayed = line.read();
                let v = wet + ga * delayed;
                line.write_advance(v);
                wet = delayed - ga * v;
            }
            (1.0 - mix) * x + mix * wet
        })
        .collect()
}

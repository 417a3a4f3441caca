use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::SpeakerBank;
use super::FRAME_LEN;
use crate::dsp::{
    pitch_shift, render_binaural_frame, reverb_apply, AudioClip, BinauralGeometry, Listener,
    RenderOptions, ReverbKind, ReverbPreset, ReverbState, SourceFeed, StereoFrame, ITD_HISTORY,
};
use crate::{Error, Result};

/// Rendering and perturbation settings shared by both environments.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSettings {
    pub geometry: BinauralGeometry,
    pub render: RenderOptions,
    /// Samples per channel in each observation.
    pub buffer_len: usize,
    pub reverb: ReverbKind,
    /// Shift every speaker's pitch by 4-8% (random sign) per episode.
    pub pitch_shift: bool,
}

impl Default for AudioSettings {
    fn default() -> Self {
        Self {
            geometry: BinauralGeometry::default(),
            render: RenderOptions::default(),
            buffer_len: FRAME_LEN,
            reverb: ReverbKind::None,
            pitch_shift: false,
        }
    }
}

pub const BUFFER_LENGTHS: [usize; 5] = [256, 512, 1024, 2048, 4096];

impl AudioSettings {
    pub fn validate(&self, room_diagonal: f64) -> Result<()> {
        self.geometry.validate(room_diagonal)?;
        if !BUFFER_LENGTHS.contains(&self.buffer_len) {
            return Err(Error::Config(format!(
                "buffer length {} not in {BUFFER_LENGTHS:?}",
                self.buffer_len
            )));
        }
        ReverbPreset::for_kind(self.reverb).validate()
    }

    pub fn observation_len(&self) -> usize {
        2 * self.buffer_len
    }
}

/// Playback stream of one source: the utterance being played, its cursor,
/// and the filter memory of the per-source effects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Playback {
    pub clip_index: usize,
    pub cursor: usize,
    pub pitch_factor: f64,
    /// Samples consumed since the episode started.
    pub consumed: u64,
    reverb: Option<ReverbState>,
    history: Vec<f64>,
    #[serde(skip)]
    shifted: Option<Arc<AudioClip>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceState {
    pub position: [f64; 3],
    pub speaker: usize,
    pub speaker_id: String,
    pub is_target: bool,
    pub detected: bool,
    pub playback: Playback,
}

/// Orientation state of the gimbal-mounted microphone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gimbal {
    pub azimuth: f64,
    pub elevation: f64,
    pub azimuth_rate: f64,
    pub elevation_rate: f64,
}

/// Everything that defines one episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AudioScene {
    /// Width (x) and depth (y) in meters.
    pub room: (f64, f64),
    pub sources: Vec<SourceState>,
    pub listener_position: [f64; 3],
    /// Present in localization scenes only.
    pub gimbal: Option<Gimbal>,
    pub frame_index: u64,
    pub rng_seed: u64,
    pub rng: ChaCha8Rng,
    pub done: bool,
}

impl AudioScene {
    pub fn listener(&self) -> Listener {
        match self.gimbal {
            Some(g) => Listener {
                position: self.listener_position,
                azimuth: g.azimuth,
                elevation: g.elevation,
                directional_exponent: Some(crate::dsp::DIRECTIONAL_EXPONENT),
            },
            None => Listener {
                position: self.listener_position,
                azimuth: 0.0,
                elevation: 0.0,
                directional_exponent: None,
            },
        }
    }

    pub fn inside_room(&self, x: f64, y: f64) -> bool {
        (0.0..=self.room.0).contains(&x) && (0.0..=self.room.1).contains(&y)
    }
}

impl Playback {
    /// Starts a stream on a random utterance of `speaker`.
    pub fn start(
        bank: &SpeakerBank,
        speaker: usize,
        settings: &AudioSettings,
        pitch_factor: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let clips = &bank.speakers[speaker].clips;
        let mut p = Self {
            clip_index: rng.random_range(0..clips.len()),
            cursor: 0,
            pitch_factor,
            consumed: 0,
            reverb: (settings.reverb != ReverbKind::None)
                .then(|| ReverbState::new(&ReverbPreset::for_kind(settings.reverb))),
            history: vec![0.0; ITD_HISTORY],
            shifted: None,
        };
        p.refresh(bank, speaker)?;
        Ok(p)
    }

    /// Rebuilds the derived (pitch-shifted) clip after a clip change or a
    /// restore from a snapshot.
    fn refresh(&mut self, bank: &SpeakerBank, speaker: usize) -> Result<()> {
        let clips = &bank.speakers[speaker].clips;
        let clip = clips.get(self.clip_index).ok_or_else(|| {
            Error::Contract(format!("clip index {} out of range", self.clip_index))
        })?;
        self.shifted = if self.pitch_factor == 1.0 {
            None
        } else {
            Some(Arc::new(pitch_shift(clip, self.pitch_factor)?))
        };
        Ok(())
    }

    fn current<'a>(&'a self, bank: &'a SpeakerBank, speaker: usize) -> &'a AudioClip {
        match &self.shifted {
            Some(c) => c,
            None => &bank.speakers[speaker].clips[self.clip_index],
        }
    }

    /// The next `n` dry samples; exhausted utterances roll over to a newly
    /// drawn one.
    fn pull(&mut self, bank: &SpeakerBank, speaker: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        if self.shifted.is_none() && self.pitch_factor != 1.0 {
            self.refresh(bank, speaker)?;
        }
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let cursor = self.cursor;
            let clip = self.current(bank, speaker);
            let clip_len = clip.len();
            let take = (n - out.len()).min(clip_len - cursor);
            out.extend(
                clip.samples[cursor..cursor + take]
                    .iter()
                    .map(|&s| f64::from(s)),
            );
            self.cursor += take;
            if self.cursor == clip_len {
                let count = bank.speakers[speaker].clips.len();
                self.clip_index = rng.random_range(0..count);
                self.cursor = 0;
                self.refresh(bank, speaker)?;
            }
        }
        self.consumed += n as u64;
        Ok(out)
    }
}

/// Advances every source by one frame and renders it at the listener.
pub fn render_next_frame(
    scene: &mut AudioScene,
    bank: &SpeakerBank,
    settings: &AudioSettings,
) -> Result<StereoFrame> {
    let preset = ReverbPreset::for_kind(settings.reverb);
    let mut signals = Vec::with_capacity(scene.sources.len());
    for src in scene.sources.iter_mut() {
        let dry = src
            .playback
            .pull(bank, src.speaker, FRAME_LEN, &mut scene.rng)?;
        let wet = match src.playback.reverb.as_mut() {
            Some(state) => reverb_apply(&dry, &preset, state),
            None => dry,
        };
        let mut signal = std::mem::take(&mut src.playback.history);
        signal.extend_from_slice(&wet);
        src.playback.history = signal[signal.len() - ITD_HISTORY..].to_vec();
        signals.push(signal);
    }
    let feeds: Vec<SourceFeed<'_>> = scene
        .sources
        .iter()
        .zip(&signals)
        .map(|(s, sig)| SourceFeed {
            position: s.position,
            signal: sig,
        })
        .collect();
    let frame = render_binaural_frame(
        &scene.listener(),
        &settings.geometry,
        &settings.render,
        &feeds,
        FRAME_LEN,
    )?;
    scene.frame_index += 1;
    Ok(frame)
}

/// Restores derived playback data after deserializing a scene.
pub fn rehydrate(scene: &mut AudioScene, bank: &SpeakerBank) -> Result<()> {
    for s in scene.sources.iter_mut() {
        if s.speaker >= bank.len() {
            return Err(Error::Contract(format!("speaker index {} not in bank", s.speaker)));
        }
        s.playback.refresh(bank, s.speaker)?;
    }
    Ok(())
}

/// Draws a per-episode pitch factor `1 ± U[0.04, 0.08]`.
pub fn draw_pitch_factor(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.04..=0.08);
    if rng.random_bool(0.5) {
        1.0 + magnitude
    } else {
        1.0 - magnitude
    }
}

/// Rolling per-channel observation window of `buffer_len` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationWindow {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl ObservationWindow {
    pub fn new(buffer_len: usize) -> Self {
        Self {
            left: vec![0.0; buffer_len],
            right: vec![0.0; buffer_len],
        }
    }

    pub fn push(&mut self, frame: &StereoFrame) -> Vec<f64> {
        for (buf, chan) in [(&mut self.left, &frame.left), (&mut self.right, &frame.right)] {
            let n = buf.len();
            if chan.len() >= n {
                buf.copy_from_slice(&chan[chan.len() - n..]);
            } else {
                buf.copy_within(chan.len().., 0);
                buf[n - chan.len()..].copy_from_slice(chan);
            }
        }
        let mut obs = Vec::with_capacity(2 * self.left.len());
        obs.extend_from_slice(&self.left);
        obs.extend_from_slice(&self.right);
        obs
    }
}

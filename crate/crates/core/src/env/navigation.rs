use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::SpeakerBank;
use super::scene::{
    draw_pitch_factor, rehydrate, render_next_frame, AudioScene, AudioSettings, ObservationWindow,
    Playback, SourceState,
};
use super::{EnvKind, Environment, StepResult, Termination, STEP_PENALTY, STEP_SECONDS};
use crate::{Error, Result};

const PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationConfig {
    /// Width (x) and depth (y) in meters.
    pub room: (f64, f64),
    /// Number of speakers, target included.
    pub speakers: usize,
    pub target_speaker: String,
    pub contact_radius: f64,
    pub max_speed: f64,
    pub ear_height: f64,
    pub source_height: (f64, f64),
    pub min_source_separation: f64,
    pub min_start_clearance: f64,
    /// Optional step limit; episodes hitting it end as `timeout`.
    pub time_limit: Option<u64>,
}

impl Default for NavigationConfig {
    fn default() -> Self {
        Self {
            room: (10.0, 10.0),
            speakers: 3,
            target_speaker: String::new(),
            contact_radius: 0.5,
            max_speed: 2.0,
            ear_height: 1.7,
            source_height: (1.5, 1.9),
            min_source_separation: 1.0,
            min_start_clearance: 1.5,
            time_limit: None,
        }
    }
}

impl NavigationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.speakers) {
            return Err(Error::Config(format!(
                "navigation needs 1 to 5 speakers, got {}",
                self.speakers
            )));
        }
        if !(self.room.0 > 0.0 && self.room.1 > 0.0) {
            return Err(Error::Config(format!("room {:?} must have positive size", self.room)));
        }
        if !(self.contact_radius > 0.0 && self.max_speed > 0.0) {
            return Err(Error::Config("contact radius and speed must be positive".into()));
        }
        Ok(())
    }

    pub fn diagonal(&self) -> f64 {
        self.room.0.hypot(self.room.1)
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    scene: Option<AudioScene>,
    window: ObservationWindow,
}

/// An agent on the lower edge of the room moves in the plane until it
/// reaches the target speaker, bumps into another speaker or leaves the room.
pub struct NavigationEnv {
    config: NavigationConfig,
    audio: AudioSettings,
    bank: Arc<SpeakerBank>,
    target: usize,
    scene: Option<AudioScene>,
    window: ObservationWindow,
}

impl NavigationEnv {
    pub fn new(config: NavigationConfig, audio: AudioSettings, bank: Arc<SpeakerBank>) -> Result<Self> {
        config.validate()?;
        audio.validate(config.diagonal())?;
        let target = if config.target_speaker.is_empty() {
            0
        } else {
            bank.index_of(&config.target_speaker).ok_or_else(|| {
                Error::Config(format!("target speaker {:?} not in dataset", config.target_speaker))
            })?
        };
        if config.speakers > 1 && bank.len() < 2 {
            return Err(Error::Config(
                "navigation with distractors needs at least two speakers in the dataset".into(),
            ));
        }
        let window = ObservationWindow::new(audio.buffer_len);
        Ok(Self {
            config,
            audio,
            bank,
            target,
            scene: None,
            window,
        })
    }

    pub fn config(&self) -> &NavigationConfig {
        &self.config
    }

    /// Places the agent and speakers; the scene is returned before any audio
    /// is rendered.
    pub fn sample_scene(&self, seed: u64) -> Result<AudioScene> {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, d) = cfg.room;
        let agent = [rng.random_range(0.0..=w), 0.0, cfg.ear_height];

        let mut others: Vec<usize> = (0..self.bank.len()).filter(|&i| i != self.target).collect();
        others.shuffle(&mut rng);
        let mut speakers = vec![self.target];
        for i in 0..cfg.speakers - 1 {
            speakers.push(others[i % others.len()]);
        }

        let mut positions: Vec<[f64; 3]> = Vec::with_capacity(speakers.len());
        for _ in &speakers {
            let mut placed = None;
            for _ in 0..PLACEMENT_TRIES {
                let p = [
                    rng.random_range(0.0..=w),
                    rng.random_range(0.0..=d),
                    rng.random_range(cfg.source_height.0..=cfg.source_height.1),
                ];
                let clear_of_agent = (p[0] - agent[0]).hypot(p[1] - agent[1]) >= cfg.min_start_clearance;
                let separated = positions
                    .iter()
                    .all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= cfg.min_source_separation);
                if clear_of_agent && separated {
                    placed = Some(p);
                    break;
                }
            }
            positions.push(placed.ok_or_else(|| {
                Error::Config(format!(
                    "could not place {} speakers in a {w} x {d} m room after {PLACEMENT_TRIES} tries",
                    cfg.speakers
                ))
            })?);
        }

        let mut pitch = vec![1.0; self.bank.len()];
        if self.audio.pitch_shift {
            pitch.iter_mut().for_each(|f| *f = draw_pitch_factor(&mut rng));
        }
        let sources = speakers
            .iter()
            .zip(&positions)
            .enumerate()
            .map(|(i, (&spk, &position))| {
                Ok(SourceState {
                    position,
                    speaker: spk,
                    speaker_id: self.bank.speakers[spk].id.clone(),
                    is_target: i == 0,
                    detected: false,
                    playback: Playback::start(&self.bank, spk, &self.audio, pitch[spk], &mut rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AudioScene {
            room: cfg.room,
            sources,
            listener_position: agent,
            gimbal: None,
            frame_index: 0,
            rng_seed: seed,
            rng,
            done: false,
        })
    }

    /// Starts an episode from an explicit scene (tests and replays).
    pub fn reset_with_scene(&mut self, mut scene: AudioScene) -> Result<Vec<f64>> {
        self.window = ObservationWindow::new(self.audio.buffer_len);
        let frame = render_next_frame(&mut scene, &self.bank, &self.audio)?;
        self.scene = Some(scene);
        Ok(self.window.push(&frame))
    }
}

impl Environment for NavigationEnv {
    fn kind(&self) -> Option<EnvKind> {
        Some(EnvKind::Navigation)
    }

    fn observation_len(&self) -> usize {
        self.audio.observation_len()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let scene = self.sample_scene(seed)?;
        self.reset_with_scene(scene)
    }

    fn step(&mut self, action: [f64; 2]) -> Result<StepResult> {
        let cfg = &self.config;
        let scene = self
            .scene
            .as_mut()
            .ok_or_else(|| Error::Contract("step called before reset".into()))?;
        if scene.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        let vx = action[0].clamp(-1.0, 1.0);
        let vy = action[1].clamp(-1.0, 1.0);
        let pos = &mut scene.listener_position;
        pos[0] += vx * cfg.max_speed * STEP_SECONDS;
        pos[1] += vy * cfg.max_speed * STEP_SECONDS;
        let (x, y) = (pos[0], pos[1]);

        let near = |s: &SourceState| (s.position[0] - x).hypot(s.position[1] - y) < cfg.contact_radius;
        let info = if scene.sources.iter().any(|s| s.is_target && near(s)) {
            Termination::ReachedTarget
        } else if scene.sources.iter().any(|s| !s.is_target && near(s)) {
            Termination::HitOther
        } else if !scene.inside_room(x, y) {
            Termination::OutOfBounds
        } else if cfg.time_limit.is_some_and(|l| scene.frame_index >= l) {
            Termination::Timeout
        } else {
            Termination::Running
        };
        let reward = STEP_PENALTY
            + match info {
                Termination::ReachedTarget => 1.0,
                Termination::HitOther | Termination::OutOfBounds => -1.0,
                _ => 0.0,
            };
        let done = info != Termination::Running;
        scene.done = done;
        let frame = render_next_frame(scene, &self.bank, &self.audio)?;
        Ok(StepResult {
            observation: self.window.push(&frame),
            reward,
            done,
            info,
        })
    }

    fn scene(&self) -> Option<&AudioScene> {
        self.scene.as_ref()
    }

    fn snapshot(&self) -> Result<serde_json::Value> {
        serde_json::to_value(Snapshot {
            scene: self.scene.clone(),
            window: self.window.clone(),
        })
        .map_err(|e| Error::Contract(format!("snapshot: {e}")))
    }

    fn restore(&mut self, snapshot: &serde_json::Value) -> Result<()> {
        let snap: Snapshot = serde_json::from_value(snapshot.clone())
            .map_err(|e| Error::Contract(format!("restore: {e}")))?;
        let mut scene = snap.scene;
        if let Some(s) = scene.as_mut() {
            rehydrate(s, &self.bank)?;
        }
        self.scene = scene;
        self.window = snap.window;
        Ok(())
    }
}

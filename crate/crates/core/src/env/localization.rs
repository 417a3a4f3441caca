use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::SpeakerBank;
use super::scene::{
    draw_pitch_factor, rehydrate, render_next_frame, AudioScene, AudioSettings, Gimbal,
    ObservationWindow, Playback, SourceState,
};
use super::{EnvKind, Environment, StepResult, Termination, STEP_PENALTY, STEP_SECONDS};
use crate::{Error, Result};

const PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationConfig {
    pub room: (f64, f64),
    pub speakers_min: usize,
    pub speakers_max: usize,
    pub time_limit: u64,
    pub mic_height: f64,
    /// Source distance range from the microphone, meters.
    pub distance: (f64, f64),
    /// Largest source elevation magnitude relative to the microphone, radians.
    pub max_elevation: f64,
    pub min_angular_separation: f64,
    pub detection_threshold: f64,
    /// Angular acceleration at full torque, rad/s^2.
    pub max_torque: f64,
    pub damping: f64,
    pub inertia: f64,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            room: (10.0, 10.0),
            speakers_min: 1,
            speakers_max: 5,
            time_limit: 2000,
            mic_height: 1.5,
            distance: (2.0, 5.0),
            max_elevation: 30f64.to_radians(),
            min_angular_separation: 10f64.to_radians(),
            detection_threshold: 5f64.to_radians(),
            max_torque: 10.0,
            damping: 2.0,
            inertia: 1.0,
        }
    }
}

impl LocalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.speakers_min && self.speakers_min <= self.speakers_max && self.speakers_max <= 5) {
            return Err(Error::Config(format!(
                "localization speaker range {}..={} must lie within 1..=5",
                self.speakers_min, self.speakers_max
            )));
        }
        if self.time_limit == 0 {
            return Err(Error::Config("localization time limit must be positive".into()));
        }
        let (w, d) = self.room;
        if !(self.distance.0 > 0.0 && self.distance.0 <= self.distance.1) {
            return Err(Error::Config(format!("bad source distance range {:?}", self.distance)));
        }
        if self.distance.1 > 0.5 * w.min(d) {
            return Err(Error::Config(format!(
                "sources up to {} m away do not fit a {w} x {d} m room around a centred microphone",
                self.distance.1
            )));
        }
        if !(self.inertia > 0.0 && self.damping >= 0.0 && self.max_torque > 0.0) {
            return Err(Error::Config("gimbal constants must be positive".into()));
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

/// A directional microphone at the centre of the room, rotated by torque
/// about azimuth and elevation, must point at every speaker once.
pub struct LocalizationEnv {
    config: LocalizationConfig,
    audio: AudioSettings,
    bank: Arc<SpeakerBank>,
    scene: Option<AudioScene>,
    window: ObservationWindow,
}

/// Unit vector for azimuth (from +y toward +x) and elevation.
pub(crate) fn direction(azimuth: f64, elevation: f64) -> [f64; 3] {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    [sa * ce, ca * ce, se]
}

fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

impl LocalizationEnv {
    pub fn new(config: LocalizationConfig, audio: AudioSettings, bank: Arc<SpeakerBank>) -> Result<Self> {
        config.validate()?;
        audio.validate(config.diagonal())?;
        let window = ObservationWindow::new(audio.buffer_len);
        Ok(Self {
            config,
            audio,
            bank,
            scene: None,
            window,
        })
    }

    pub fn config(&self) -> &LocalizationConfig {
        &self.config
    }

    pub fn mic_position(&self) -> [f64; 3] {
        [0.5 * self.config.room.0, 0.5 * self.config.room.1, self.config.mic_height]
    }

    /// Angle between the boresight and the direction of `source`.
    pub fn boresight_error(scene: &AudioScene, source: &SourceState) -> f64 {
        let g = scene.gimbal.expect("localization scene has a gimbal");
        let p = scene.listener_position;
        let rel = [
            source.position[0] - p[0],
            source.position[1] - p[1],
            source.position[2] - p[2],
        ];
        angle_between(direction(g.azimuth, g.elevation), rel)
    }

    pub fn sample_scene(&self, seed: u64) -> Result<AudioScene> {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(cfg.speakers_min..=cfg.speakers_max);
        let mic = self.mic_position();
        let mut dirs: Vec<[f64; 3]> = Vec::with_capacity(k);
        let mut positions = Vec::with_capacity(k);
        for _ in 0..k {
            let mut placed = None;
            for _ in 0..PLACEMENT_TRIES {
                let az = rng.random_range(0.0..TAU);
                let el = rng.random_range(-cfg.max_elevation..=cfg.max_elevation);
                let dist = rng.random_range(cfg.distance.0..=cfg.distance.1);
                let dir = direction(az, el);
                if dirs.iter().all(|&q| angle_between(dir, q) >= cfg.min_angular_separation) {
                    placed = Some((dir, dist));
                    break;
                }
            }
            let (dir, dist) = placed.ok_or_else(|| {
                Error::Config(format!(
                    "could not separate {k} speakers by {:.1} degrees after {PLACEMENT_TRIES} tries",
                    cfg.min_angular_separation.to_degrees()
                ))
            })?;
            dirs.push(dir);
            positions.push([
                mic[0] + dist * dir[0],
                mic[1] + dist * dir[1],
                mic[2] + dist * dir[2],
            ]);
        }
        let speakers: Vec<usize> = (0..k).map(|_| rng.random_range(0..self.bank.len())).collect();
        let mut pitch = vec![1.0; self.bank.len()];
        if self.audio.pitch_shift {
            pitch.iter_mut().for_each(|f| *f = draw_pitch_factor(&mut rng));
        }
        let sources = speakers
            .iter()
            .zip(positions)
            .map(|(&spk, position)| {
                Ok(SourceState {
                    position,
                    speaker: spk,
                    speaker_id: self.bank.speakers[spk].id.clone(),
                    is_target: false,
                    detected: false,
                    playback: Playback::start(&self.bank, spk, &self.audio, pitch[spk], &mut rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AudioScene {
            room: cfg.room,
            sources,
            listener_position: mic,
            gimbal: Some(Gimbal {
                azimuth: 0.0,
                elevation: 0.0,
                azimuth_rate: 0.0,
                elevation_rate: 0.0,
            }),
            frame_index: 0,
            rng_seed: seed,
            rng,
            done: false,
        })
    }

    pub fn reset_with_scene(&mut self, mut scene: AudioScene) -> Result<Vec<f64>> {
        if scene.gimbal.is_none() {
            return Err(Error::Contract("localization scene without a gimbal".into()));
        }
        self.window = ObservationWindow::new(self.audio.buffer_len);
        let frame = render_next_frame(&mut scene, &self.bank, &self.audio)?;
        self.scene = Some(scene);
        Ok(self.window.push(&frame))
    }
}

/// One explicit-Euler step of `I w' = T Tmax - b w` for a single axis.
/// Returns the new (angle, rate).
fn integrate_axis(angle: f64, rate: f64, torque: f64, cfg: &LocalizationConfig) -> (f64, f64) {
    let accel = (torque * cfg.max_torque - cfg.damping * rate) / cfg.inertia;
    (angle + STEP_SECONDS * rate, rate + STEP_SECONDS * accel)
}

impl Environment for LocalizationEnv {
    fn kind(&self) -> Option<EnvKind> {
        Some(EnvKind::Localization)
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
        let t_az = action[0].clamp(-1.0, 1.0);
        let t_el = action[1].clamp(-1.0, 1.0);
        let mut g = scene.gimbal.expect("localization scene has a gimbal");
        let (az, az_rate) = integrate_axis(g.azimuth, g.azimuth_rate, t_az, cfg);
        let (el, el_rate) = integrate_axis(g.elevation, g.elevation_rate, t_el, cfg);
        g.azimuth = az.rem_euclid(TAU);
        g.azimuth_rate = az_rate;
        g.elevation = el.clamp(-FRAC_PI_2, FRAC_PI_2);
        // the mount stops hard at the poles
        g.elevation_rate = if g.elevation != el { 0.0 } else { el_rate };
        scene.gimbal = Some(g);

        let mut newly_completed = false;
        let mut remaining = 0;
        for i in 0..scene.sources.len() {
            if scene.sources[i].detected {
                continue;
            }
            if Self::boresight_error(scene, &scene.sources[i]) < cfg.detection_threshold {
                scene.sources[i].detected = true;
                newly_completed = true;
            } else {
                remaining += 1;
            }
        }
        let info = if newly_completed && remaining == 0 {
            Termination::AllDetected
        } else if scene.frame_index >= cfg.time_limit {
            Termination::Timeout
        } else {
            Termination::Running
        };
        let reward = STEP_PENALTY + if info == Termination::AllDetected { 1.0 } else { 0.0 };
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

//! The two audio MDPs: moving toward a target speaker, and pointing a
//! gimbal-mounted directional microphone at every speaker in the room.

mod bank;
mod localization;
mod navigation;
mod scene;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bank::{Partition, Speaker, SpeakerBank, ToneVoices};
pub use localization::{LocalizationConfig, LocalizationEnv};
pub use navigation::{NavigationConfig, NavigationEnv};
pub use scene::{
    draw_pitch_factor, AudioScene, AudioSettings, Gimbal, ObservationWindow, Playback,
    SourceState, BUFFER_LENGTHS,
};

use crate::Result;

/// Samples rendered per environment step.
pub const FRAME_LEN: usize = 1024;

/// Simulated time per step: one audio frame at 48 kHz.
pub const STEP_SECONDS: f64 = FRAME_LEN as f64 / crate::dsp::SAMPLE_RATE as f64;

/// Reward added on every step.
pub const STEP_PENALTY: f64 = -0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Navigation,
    Localization,
}

impl std::str::FromStr for EnvKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "navigation" => Ok(EnvKind::Navigation),
            "localization" => Ok(EnvKind::Localization),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown environment {other:?} (expected navigation or localization)"
            ))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnvKind::Navigation => "navigation",
            EnvKind::Localization => "localization",
        })
    }
}

/// Why an episode ended, or `Running`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTarget,
    HitOther,
    OutOfBounds,
    AllDetected,
    Timeout,
    Running,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(self, Termination::ReachedTarget | Termination::AllDetected)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ReachedTarget => "reached_target",
            Termination::HitOther => "hit_other",
            Termination::OutOfBounds => "out_of_bounds",
            Termination::AllDetected => "all_detected",
            Termination::Timeout => "timeout",
            Termination::Running => "running",
        }
    }
}

impl std::str::FromStr for Termination {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Termination::ReachedTarget,
            Termination::HitOther,
            Termination::OutOfBounds,
            Termination::AllDetected,
            Termination::Timeout,
            Termination::Running,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| crate::Error::InvalidArgument(format!("unknown termination cause {s:?}")))
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: Termination,
}

/// Reset/step interface shared by both environments.
pub trait Environment: Send {
    /// `None` for synthetic sanity environments.
    fn kind(&self) -> Option<EnvKind>;

    fn observation_len(&self) -> usize;

    /// Starts a new episode determined entirely by `seed`.
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: [f64; 2]) -> Result<StepResult>;

    fn scene(&self) -> Option<&AudioScene>;

    /// Steps taken in the current episode.
    fn episode_steps(&self) -> u64 {
        self.scene().map_or(0, |s| s.frame_index.saturating_sub(1))
    }

    /// Serializable copy of the episode state.
    fn snapshot(&self) -> Result<serde_json::Value>;

    fn restore(&mut self, snapshot: &serde_json::Value) -> Result<()>;
}

/// Uniform action in [-1, 1]^2.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}

/// Builds an environment of the requested kind.
pub fn make_env(
    kind: EnvKind,
    navigation: &NavigationConfig,
    localization: &LocalizationConfig,
    audio: &AudioSettings,
    bank: std::sync::Arc<SpeakerBank>,
) -> Result<Box<dyn Environment>> {
    Ok(match kind {
        EnvKind::Navigation => Box::new(NavigationEnv::new(navigation.clone(), audio.clone(), bank)?),
        EnvKind::Localization => {
            Box::new(LocalizationEnv::new(localization.clone(), audio.clone(), bank)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_policy_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sum = [0.0; 2];
        let n = 1_000_000;
        for _ in 0..n {
            let a = random_policy(&mut rng);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
            sum[0] += a[0];
            sum[1] += a[1];
        }
        assert!((sum[0] / n as f64).abs() < 0.005);
        assert!((sum[1] / n as f64).abs() < 0.005);

        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            assert_eq!(random_policy(&mut r1), random_policy(&mut r2));
        }
    }

    #[test]
    fn termination_names_round_trip() {
        for t in [Termination::ReachedTarget, Termination::Timeout, Termination::Running] {
            assert_eq!(t.as_str().parse::<Termination>().unwrap(), t);
        }
        assert!(Termination::AllDetected.is_success());
        assert!(!Termination::HitOther.is_success());
    }
}

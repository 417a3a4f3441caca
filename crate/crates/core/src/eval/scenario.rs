use std::sync::Arc;

use crate::config::RunConfig;
use crate::dataset::load_pools;
use crate::dsp::{ReverbKind, UtterancePool};
use crate::env::{
    make_env, AudioSettings, EnvKind, Environment, LocalizationConfig, NavigationConfig,
    Partition, SpeakerBank, ToneVoices,
};
use crate::neural::NetworkSpec;
use crate::ppo::PpoConfig;
use crate::{Error, Result};

/// Everything needed to build environments and learners for an experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub navigation: NavigationConfig,
    pub localization: LocalizationConfig,
    /// Clean (training-time) audio settings.
    pub audio: AudioSettings,
    pub pools: Arc<Vec<UtterancePool>>,
    pub network: NetworkSpec,
    pub ppo: PpoConfig,
    pub eval_step_cap: u64,
}

impl Scenario {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let pools = match &cfg.audio.dataset {
            Some(dir) => load_pools(dir)?,
            None => ToneVoices {
                frequencies: cfg.audio.tone_frequencies.clone(),
                train_per_speaker: cfg.audio.tone_train_clips,
                test_per_speaker: cfg.audio.tone_test_clips,
                seed: cfg.run.seed,
            }
            .pools()?,
        };
        Ok(Self {
            navigation: cfg.navigation(),
            localization: cfg.localization(),
            audio: cfg.audio_settings(),
            pools: Arc::new(pools),
            network: cfg.network_spec(),
            ppo: cfg.ppo.clone(),
            eval_step_cap: cfg.run.eval_step_cap,
        })
    }

    pub fn bank(&self, partition: Partition, cap: Option<usize>) -> Result<Arc<SpeakerBank>> {
        Ok(Arc::new(SpeakerBank::from_pools(&self.pools, partition, cap)?))
    }

    /// Audio settings with evaluation-time perturbations applied.
    pub fn perturbed_audio(&self, reverb: ReverbKind, pitch_shift: bool) -> AudioSettings {
        AudioSettings {
            reverb,
            pitch_shift,
            ..self.audio.clone()
        }
    }

    pub fn env(
        &self,
        kind: EnvKind,
        bank: Arc<SpeakerBank>,
        audio: &AudioSettings,
    ) -> Result<Box<dyn Environment>> {
        make_env(kind, &self.navigation, &self.localization, audio, bank)
    }

    /// Environment for evaluation and human play. The navigation training
    /// truncation is replaced by the step cap, so capped episodes end as
    /// timeouts inside the environment and replay identically.
    pub fn eval_env(
        &self,
        kind: EnvKind,
        bank: Arc<SpeakerBank>,
        audio: &AudioSettings,
    ) -> Result<Box<dyn Environment>> {
        let navigation = NavigationConfig {
            time_limit: Some(self.eval_step_cap),
            ..self.navigation.clone()
        };
        make_env(kind, &navigation, &self.localization, audio, bank)
    }

    /// `ppo.num_envs` clean environments on the (capped) training partition.
    pub fn training_envs(&self, kind: EnvKind, cap: Option<usize>) -> Result<Vec<Box<dyn Environment>>> {
        let bank = self.bank(Partition::Train, cap)?;
        (0..self.ppo.num_envs)
            .map(|_| self.env(kind, bank.clone(), &self.audio))
            .collect()
    }

    /// Smallest training pool, the largest cap the dataset supports.
    pub fn max_cap(&self) -> usize {
        self.pools.iter().map(|p| p.train_clips.len()).min().unwrap_or(0)
    }

    pub fn check_cap(&self, cap: usize) -> Result<()> {
        if cap == 0 || cap > self.max_cap() {
            return Err(Error::Config(format!(
                "utterance cap {cap} exceeds the smallest training pool ({})",
                self.max_cap()
            )));
        }
        Ok(())
    }
}

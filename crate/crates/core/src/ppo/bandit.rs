use crate::env::{EnvKind, Environment, StepResult, Termination};
use crate::{Error, Result};

/// Single-state, single-step sanity task with reward `-|a - a*|^2`.
/// The optimal mean action is `a*` by construction.
#[derive(Debug, Clone)]
pub struct Bandit {
    optimum: [f64; 2],
    observation: Vec<f64>,
}

impl Bandit {
    pub fn new(optimum: [f64; 2], observation_len: usize) -> Result<Self> {
        if optimum.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!("optimum {optimum:?} outside [-1, 1]^2")));
        }
        if observation_len == 0 {
            return Err(Error::InvalidArgument("observation length 0".into()));
        }
        let observation = (0..observation_len).map(|i| (0.7 * i as f64 + 0.3).sin()).collect();
        Ok(Self {
            optimum,
            observation,
        })
    }

    pub fn optimum(&self) -> [f64; 2] {
        self.optimum
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }
}

impl Environment for Bandit {
    fn kind(&self) -> Option<EnvKind> {
        None
    }

    fn observation_len(&self) -> usize {
        self.observation.len()
    }

    fn reset(&mut self, _seed: u64) -> Result<Vec<f64>> {
        Ok(self.observation.clone())
    }

    fn step(&mut self, action: [f64; 2]) -> Result<StepResult> {
        let d0 = action[0] - self.optimum[0];
        let d1 = action[1] - self.optimum[1];
        Ok(StepResult {
            observation: self.observation.clone(),
            reward: -(d0 * d0 + d1 * d1),
            done: true,
            info: Termination::Timeout,
        })
    }

    fn scene(&self) -> Option<&crate::env::AudioScene> {
        None
    }

    fn snapshot(&self) -> Result<serde_json::Value> {
        Ok(serde_json::Value::Null)
    }

    fn restore(&mut self, _snapshot: &serde_json::Value) -> Result<()> {
        Ok(())
    }
}

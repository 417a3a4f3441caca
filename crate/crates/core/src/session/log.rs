use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, Termination};
use crate::{Error, Result};

pub const SESSION_LOG_MAGIC: &str = "audionav-session";
pub const SESSION_LOG_VERSION: u32 = 1;

/// One played episode: its scene seed and every action applied, enough to
/// replay it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEpisode {
    pub seed: u64,
    pub actions: Vec<[f64; 2]>,
    pub reward: f64,
    /// `None` when the session ended mid-episode.
    pub termination: Option<Termination>,
}

impl LoggedEpisode {
    pub fn is_complete(&self) -> bool {
        self.termination.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub magic: String,
    pub version: u32,
    pub kind: EnvKind,
    pub episodes: Vec<LoggedEpisode>,
    /// False when the client disconnected or aborted.
    pub completed: bool,
}

impl SessionLog {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            magic: SESSION_LOG_MAGIC.into(),
            version: SESSION_LOG_VERSION,
            kind,
            episodes: Vec::new(),
            completed: false,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Session(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let log: SessionLog = serde_json::from_str(&text)
            .map_err(|e| Error::Session(format!("{}: {e}", path.display())))?;
        if log.magic != SESSION_LOG_MAGIC || log.version != SESSION_LOG_VERSION {
            return Err(Error::Session(format!(
                "{}: not a version {SESSION_LOG_VERSION} session log",
                path.display()
            )));
        }
        Ok(log)
    }
}

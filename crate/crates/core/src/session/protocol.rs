//! Wire format between the session server and play clients.
//!
//! Audio travels as binary frames: `ANAU`, a little-endian `u16` version, a
//! `u64` sequence number, a `u32` frame count, then `frames × 2` interleaved
//! `i16` samples (left, right). Everything else is a JSON text frame tagged
//! by `"type"`.

use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, Termination, FRAME_LEN};
use crate::{Error, Result};

pub const PROTOCOL_MAGIC: &str = "audionav";
pub const PROTOCOL_VERSION: u32 = 1;
pub const AUDIO_MAGIC: [u8; 4] = *b"ANAU";
pub const AUDIO_HEADER_LEN: usize = 18;

/// One rendered frame of binaural audio, the only thing a client hears.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioChunk {
    pub seq: u64,
    /// Interleaved left/right samples.
    pub samples: Vec<i16>,
}

fn to_pcm(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * f64::from(i16::MAX)).round() as i16
}

impl AudioChunk {
    /// Takes the newest `FRAME_LEN` samples of each half of an observation
    /// (left block, then right block).
    pub fn from_observation(seq: u64, obs: &[f64]) -> Result<Self> {
        let half = obs.len() / 2;
        if obs.len() % 2 != 0 || half < FRAME_LEN {
            return Err(Error::Session(format!(
                "observation of {} samples holds no full {FRAME_LEN}-sample stereo frame",
                obs.len()
            )));
        }
        let (left, right) = obs.split_at(half);
        let samples = left[half - FRAME_LEN..]
            .iter()
            .zip(&right[half - FRAME_LEN..])
            .flat_map(|(&l, &r)| [to_pcm(l), to_pcm(r)])
            .collect();
        Ok(Self { seq, samples })
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / 2
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(AUDIO_HEADER_LEN + 2 * self.samples.len());
        out.extend_from_slice(&AUDIO_MAGIC);
        out.extend_from_slice(&(PROTOCOL_VERSION as u16).to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&(self.frames() as u32).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Err(Error::Session(format!("audio frame: {m}")));
        if bytes.len() < AUDIO_HEADER_LEN || bytes[..4] != AUDIO_MAGIC {
            return bad("missing header".into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if u32::from(version) != PROTOCOL_VERSION {
            return bad(format!("version {version}, expected {PROTOCOL_VERSION}"));
        }
        let seq = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        let frames = u32::from_le_bytes(bytes[14..18].try_into().expect("4 bytes")) as usize;
        let body = &bytes[AUDIO_HEADER_LEN..];
        if body.len() != 4 * frames {
            return bad(format!("{} payload bytes for {frames} frames", body.len()));
        }
        let samples = body
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]))
            .collect();
        Ok(Self { seq, samples })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCommand {
    Start,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello { magic: String, version: u32 },
    Action { seq: u64, action: [f64; 2] },
    Control { command: ControlCommand },
}

/// Server to client control traffic. Deliberately carries no pose or scene
/// information: the client plays by ear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        magic: String,
        version: u32,
        kind: EnvKind,
        episodes: usize,
        sample_rate: u32,
        chunk_frames: usize,
    },
    EpisodeStart { episode: usize },
    EpisodeEnd { episode: usize, termination: Termination, reward: f64 },
    Complete { episodes: usize },
    Error { message: String },
}

impl ServerMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

impl ClientMessage {
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Session(format!("bad client message {text:?}: {e}")))
    }
}

/// Arrow-key state to an action: up/down drive the second axis, right/left
/// the first; opposite keys cancel.
pub fn keys_to_action(up: bool, down: bool, left: bool, right: bool) -> [f64; 2] {
    let axis = |pos: bool, neg: bool| f64::from(u8::from(pos)) - f64::from(u8::from(neg));
    [axis(right, left), axis(up, down)]
}

/// Keys that would reveal where things are.
const SPATIAL_KEYS: [&str; 9] = [
    "position", "pose", "x", "y", "z", "azimuth", "elevation", "distance", "sources",
];

fn has_spatial_key(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Object(m) => m
            .iter()
            .any(|(k, v)| SPATIAL_KEYS.contains(&k.as_str()) || has_spatial_key(v)),
        serde_json::Value::Array(a) => a.iter().any(has_spatial_key),
        _ => false,
    }
}

/// Checks one captured server text frame against the schema: it must parse
/// as a `ServerMessage`, carry no extra fields and no spatial keys.
pub fn check_server_text(text: &str) -> Result<ServerMessage> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Session(format!("not JSON: {e}")))?;
    let msg: ServerMessage = serde_json::from_value(raw.clone())
        .map_err(|e| Error::Session(format!("unknown server message {text}: {e}")))?;
    if serde_json::to_value(&msg).ok().as_ref() != Some(&raw) {
        return Err(Error::Session(format!("server message carries extra fields: {text}")));
    }
    if has_spatial_key(&raw) {
        return Err(Error::Session(format!("server message leaks spatial data: {text}")));
    }
    Ok(msg)
}

/// Checks a captured binary frame: a well-formed audio chunk of exactly one
/// stereo frame, nothing else.
pub fn check_server_binary(bytes: &[u8]) -> Result<AudioChunk> {
    let chunk = AudioChunk::decode(bytes)?;
    if chunk.frames() != FRAME_LEN {
        return Err(Error::Session(format!("audio chunk of {} frames", chunk.frames())));
    }
    Ok(chunk)
}

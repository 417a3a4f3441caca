//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "ANAVCKPT"            8-byte magic
//! u32                   format version
//! u32                   header length in bytes
//! header                UTF-8 JSON: network spec, parameter count, optimizer
//!                       hyperparameters and step, training-step counter and
//!                       optional trainer state
//! f64 x n               parameters, in layout order
//! f64 x n               optimizer first moments
//! f64 x n               optimizer second moments
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::OptimizerState;
use super::params::{NetworkSpec, PolicyParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ANAVCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub optimizer: OptimizerState,
    /// Environment steps consumed by training so far.
    pub train_steps: u64,
    /// Opaque trainer snapshot (environment and RNG state) for exact resume.
    pub trainer_state: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    param_count: usize,
    optimizer_step: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    max_grad_norm: f64,
    train_steps: u64,
    trainer_state: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = self.params.len();
        if self.optimizer.first_moment.len() != n || self.optimizer.second_moment.len() != n {
            return Err(Error::Checkpoint("optimizer state does not match parameters".into()));
        }
        let header = Header {
            spec: self.params.spec.clone(),
            param_count: n,
            optimizer_step: self.optimizer.step,
            learning_rate: self.optimizer.learning_rate,
            beta1: self.optimizer.beta1,
            beta2: self.optimizer.beta2,
            epsilon: self.optimizer.epsilon,
            max_grad_norm: self.optimizer.max_grad_norm,
            train_steps: self.train_steps,
            trainer_state: self.trainer_state.clone(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(16 + header.len() + 24 * n);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for block in [
            &self.params.values,
            &self.optimizer.first_moment,
            &self.optimizer.second_moment,
        ] {
            for v in block.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let body = bytes
            .get(16..16 + header_len)
            .ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let n = header.param_count;
        if header.spec.param_count() != n {
            return Err(Error::Checkpoint(format!(
                "header declares {n} parameters but the network spec needs {}",
                header.spec.param_count()
            )));
        }
        let data = &bytes[16 + header_len..];
        if data.len() != 24 * n {
            return Err(Error::Checkpoint(format!(
                "payload is {} bytes, expected {}",
                data.len(),
                24 * n
            )));
        }
        let mut blocks = data
            .chunks_exact(8 * n.max(1))
            .map(|c| {
                c.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect::<Vec<f64>>()
            });
        let values = blocks.next().unwrap_or_default();
        let first_moment = blocks.next().unwrap_or_default();
        let second_moment = blocks.next().unwrap_or_default();
        let params = PolicyParams::from_values(header.spec, values)?;
        Ok(Self {
            params,
            optimizer: OptimizerState {
                first_moment,
                second_moment,
                step: header.optimizer_step,
                learning_rate: header.learning_rate,
                beta1: header.beta1,
                beta2: header.beta2,
                epsilon: header.epsilon,
                max_grad_norm: header.max_grad_norm,
            },
            train_steps: header.train_steps,
            trainer_state: header.trainer_state,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let bytes = ckpt.to_bytes()?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

pub mod config;
pub mod dataset;
pub mod dsp;
pub mod env;
pub mod eval;
mod error;
pub mod neural;
pub mod ppo;
pub mod session;

pub use error::{Error, Result};

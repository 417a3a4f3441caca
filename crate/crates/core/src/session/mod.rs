//! Lockstep play sessions for the human baseline.

mod client;
mod log;
mod protocol;
mod server;

pub use client::{ServerEvent, SessionClient};
pub use log::{LoggedEpisode, SessionLog, SESSION_LOG_MAGIC, SESSION_LOG_VERSION};
pub use protocol::{
    check_server_binary, check_server_text, keys_to_action, AudioChunk, ClientMessage, ControlCommand, ServerMessage,
    AUDIO_HEADER_LEN, AUDIO_MAGIC, PROTOCOL_MAGIC, PROTOCOL_VERSION,
};
pub use server::{run_session, serve, SessionOutcome, SessionSettings, CHUNK_PERIOD};

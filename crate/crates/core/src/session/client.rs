use std::net::TcpStream;

use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::protocol::{
    check_server_binary, check_server_text, AudioChunk, ClientMessage, ControlCommand, ServerMessage,
    PROTOCOL_MAGIC, PROTOCOL_VERSION,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ServerEvent {
    Audio(AudioChunk),
    Message(ServerMessage),
    Closed,
}

/// Minimal scripted client; every server frame is schema-checked on receipt.
pub struct SessionClient {
    ws: WebSocket<MaybeTlsStream<TcpStream>>,
    pub hello: ServerMessage,
}

fn ws_err(e: tungstenite::Error) -> Error {
    Error::Session(e.to_string())
}

impl SessionClient {
    pub fn connect(url: &str) -> Result<Self> {
        Self::connect_as(url, PROTOCOL_VERSION)
    }

    /// Connects announcing `version`; a mismatch fails with the server's
    /// message, which names both versions.
    pub fn connect_as(url: &str, version: u32) -> Result<Self> {
        let (ws, _) = tungstenite::connect(url).map_err(ws_err)?;
        let mut client = Self {
            ws,
            hello: ServerMessage::Complete { episodes: 0 },
        };
        client.send(&ClientMessage::Hello {
            magic: PROTOCOL_MAGIC.into(),
            version,
        })?;
        match client.recv()? {
            ServerEvent::Message(m @ ServerMessage::Hello { .. }) => client.hello = m,
            ServerEvent::Message(ServerMessage::Error { message }) => return Err(Error::Session(message)),
            other => return Err(Error::Session(format!("expected hello, got {other:?}"))),
        }
        Ok(client)
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<()> {
        self.ws.send(Message::Text(msg.to_text())).map_err(ws_err)
    }

    pub fn start(&mut self) -> Result<()> {
        self.send(&ClientMessage::Control { command: ControlCommand::Start })
    }

    pub fn abort(&mut self) -> Result<()> {
        self.send(&ClientMessage::Control { command: ControlCommand::Abort })
    }

    pub fn act(&mut self, seq: u64, action: [f64; 2]) -> Result<()> {
        self.send(&ClientMessage::Action { seq, action })
    }

    pub fn recv(&mut self) -> Result<ServerEvent> {
        loop {
            match self.ws.read() {
                Ok(Message::Binary(b)) => return check_server_binary(&b).map(ServerEvent::Audio),
                Ok(Message::Text(t)) => return check_server_text(&t).map(ServerEvent::Message),
                Ok(Message::Close(_))
                | Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                    return Ok(ServerEvent::Closed)
                }
                Ok(_) => continue,
                Err(e) => return Err(ws_err(e)),
            }
        }
    }

    /// Drops the connection without a close handshake.
    pub fn disconnect(self) {
        drop(self.ws);
    }
}

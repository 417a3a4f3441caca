use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use tungstenite::error::ProtocolError;
use tungstenite::{Message, WebSocket};

use super::log::{LoggedEpisode, SessionLog};
use super::protocol::{
    AudioChunk, ClientMessage, ControlCommand, ServerMessage, PROTOCOL_MAGIC, PROTOCOL_VERSION,
};
use crate::dsp::SAMPLE_RATE;
use crate::env::{EnvKind, Environment, FRAME_LEN};
use crate::eval::episode_seeds;
use crate::{Error, Result};

/// Wall-clock length of one audio chunk.
pub const CHUNK_PERIOD: Duration = Duration::from_micros(1_000_000 * FRAME_LEN as u64 / SAMPLE_RATE as u64);

#[derive(Debug, Clone)]
pub struct SessionSettings {
    pub kind: EnvKind,
    pub episodes: usize,
    /// Episode scenes come from the same seed stream evaluation uses, so a
    /// human plays the scenes an agent is scored on.
    pub seed: u64,
    /// How long to wait for an action before repeating the previous one;
    /// `None` blocks until the client answers.
    pub action_timeout: Option<Duration>,
    /// Pace chunks at one per `CHUNK_PERIOD` instead of as fast as the
    /// client answers.
    pub realtime: bool,
    /// Where `session-<kind>-<n>.json` logs go; `None` keeps them in memory.
    pub log_dir: Option<PathBuf>,
    pub handshake_timeout: Duration,
}

impl SessionSettings {
    pub fn new(kind: EnvKind, episodes: usize, seed: u64) -> Self {
        Self {
            kind,
            episodes,
            seed,
            action_timeout: Some(Duration::from_millis(250)),
            realtime: false,
            log_dir: None,
            handshake_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub log: SessionLog,
    pub chunks_sent: u64,
    pub actions_applied: u64,
    /// Chunks answered by repeating the previous action.
    pub timeouts: u64,
}

fn ws_err(e: tungstenite::Error) -> Error {
    Error::Session(e.to_string())
}

enum Incoming {
    Message(ClientMessage),
    TimedOut,
    Closed,
}

fn receive(ws: &mut WebSocket<TcpStream>, deadline: Option<Instant>) -> Result<Incoming> {
    loop {
        let left = match deadline {
            Some(d) => {
                let left = d.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    return Ok(Incoming::TimedOut);
                }
                Some(left)
            }
            None => None,
        };
        ws.get_ref()
            .set_read_timeout(left)
            .map_err(|e| Error::Session(e.to_string()))?;
        match ws.read() {
            Ok(Message::Text(t)) => return ClientMessage::parse(&t).map(Incoming::Message),
            Ok(Message::Close(_)) => return Ok(Incoming::Closed),
            Ok(_) => continue,
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                return Ok(Incoming::TimedOut)
            }
            Err(
                tungstenite::Error::ConnectionClosed
                | tungstenite::Error::AlreadyClosed
                | tungstenite::Error::Protocol(ProtocolError::ResetWithoutClosingHandshake),
            ) => return Ok(Incoming::Closed),
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::ConnectionReset | ErrorKind::BrokenPipe | ErrorKind::UnexpectedEof) =>
            {
                return Ok(Incoming::Closed)
            }
            Err(e) => return Err(ws_err(e)),
        }
    }
}

fn send_text(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> Result<()> {
    ws.send(Message::Text(msg.to_text())).map_err(ws_err)
}

/// Handshake, then lockstep play: every chunk sent is answered by exactly one
/// applied action (the client's, or the previous one on timeout). A client
/// abort or disconnect ends the session with an incomplete log.
pub fn run_session(
    ws: &mut WebSocket<TcpStream>,
    env: &mut dyn Environment,
    settings: &SessionSettings,
) -> Result<SessionOutcome> {
    if env.kind() != Some(settings.kind) {
        return Err(Error::Session("environment does not match the session kind".into()));
    }
    let hs_deadline = Some(Instant::now() + settings.handshake_timeout);
    match receive(ws, hs_deadline)? {
        Incoming::Message(ClientMessage::Hello { magic, version }) => {
            if magic != PROTOCOL_MAGIC || version != PROTOCOL_VERSION {
                let message = format!(
                    "protocol version mismatch: server {PROTOCOL_MAGIC} v{PROTOCOL_VERSION}, client {magic} v{version}"
                );
                let _ = send_text(ws, &ServerMessage::Error { message: message.clone() });
                let _ = ws.close(None);
                return Err(Error::Session(message));
            }
        }
        Incoming::Message(other) => return Err(Error::Session(format!("expected hello, got {other:?}"))),
        Incoming::TimedOut => return Err(Error::Session("no hello before the handshake timeout".into())),
        Incoming::Closed => return Err(Error::Session("client left during the handshake".into())),
    }
    send_text(
        ws,
        &ServerMessage::Hello {
            magic: PROTOCOL_MAGIC.into(),
            version: PROTOCOL_VERSION,
            kind: settings.kind,
            episodes: settings.episodes,
            sample_rate: SAMPLE_RATE,
            chunk_frames: FRAME_LEN,
        },
    )?;

    let mut out = SessionOutcome {
        log: SessionLog::new(settings.kind),
        chunks_sent: 0,
        actions_applied: 0,
        timeouts: 0,
    };
    match receive(ws, hs_deadline)? {
        Incoming::Message(ClientMessage::Control { command: ControlCommand::Start }) => {}
        Incoming::Message(ClientMessage::Control { command: ControlCommand::Abort }) | Incoming::Closed => {
            return Ok(out)
        }
        Incoming::Message(other) => return Err(Error::Session(format!("expected start, got {other:?}"))),
        Incoming::TimedOut => return Err(Error::Session("no start before the handshake timeout".into())),
    }

    let mut seq = 0u64;
    let mut next_send = Instant::now();
    for (episode, seed) in episode_seeds(settings.seed, settings.episodes).into_iter().enumerate() {
        send_text(ws, &ServerMessage::EpisodeStart { episode })?;
        let mut obs = env.reset(seed)?;
        out.log.episodes.push(LoggedEpisode {
            seed,
            actions: Vec::new(),
            reward: 0.0,
            termination: None,
        });
        let mut previous = [0.0, 0.0];
        loop {
            if settings.realtime {
                std::thread::sleep(next_send.saturating_duration_since(Instant::now()));
                next_send += CHUNK_PERIOD;
            }
            let chunk = AudioChunk::from_observation(seq, &obs)?;
            if ws.send(Message::Binary(chunk.encode())).is_err() {
                return Ok(out);
            }
            out.chunks_sent += 1;

            let deadline = settings.action_timeout.map(|t| Instant::now() + t);
            let action = loop {
                match receive(ws, deadline)? {
                    Incoming::Message(ClientMessage::Action { seq: s, action }) if s == seq => {
                        break action.map(|v| if v.is_finite() { v.clamp(-1.0, 1.0) } else { 0.0 });
                    }
                    // late answer to a chunk that already timed out
                    Incoming::Message(ClientMessage::Action { seq: s, .. }) if s < seq => continue,
                    Incoming::Message(ClientMessage::Action { seq: s, .. }) => {
                        return Err(Error::Session(format!("action for chunk {s} before chunk {seq} was sent")))
                    }
                    Incoming::Message(ClientMessage::Control { command: ControlCommand::Abort }) | Incoming::Closed => {
                        let _ = ws.close(None);
                        return Ok(out);
                    }
                    Incoming::Message(other) => {
                        return Err(Error::Session(format!("unexpected message mid-episode: {other:?}")))
                    }
                    Incoming::TimedOut => {
                        out.timeouts += 1;
                        break previous;
                    }
                }
            };
            seq += 1;
            previous = action;
            let step = env.step(action)?;
            out.actions_applied += 1;
            let logged = out.log.episodes.last_mut().expect("episode pushed above");
            logged.actions.push(action);
            logged.reward += step.reward;
            if step.done {
                logged.termination = Some(step.info);
                let end = ServerMessage::EpisodeEnd {
                    episode,
                    termination: step.info,
                    reward: logged.reward,
                };
                if send_text(ws, &end).is_err() {
                    return Ok(out);
                }
                break;
            }
            obs = step.observation;
        }
    }
    out.log.completed = true;
    let _ = send_text(ws, &ServerMessage::Complete { episodes: settings.episodes });
    let _ = ws.close(None);
    // drain until the client acknowledges the close
    let _ = receive(ws, Some(Instant::now() + Duration::from_secs(1)));
    Ok(out)
}

/// Accepts connections and runs one independent session per client on its
/// own thread. Stops accepting after `max_sessions` when given, then waits
/// for the running sessions.
pub fn serve<F>(
    listener: TcpListener,
    make_env: F,
    settings: SessionSettings,
    max_sessions: Option<usize>,
    mut on_done: impl FnMut(usize, Result<SessionOutcome>) + Send,
) -> Result<()>
where
    F: Fn() -> Result<Box<dyn Environment>> + Send + Sync + 'static,
{
    let make_env = Arc::new(make_env);
    let counter = Arc::new(AtomicUsize::new(0));
    let (tx, rx) = std::sync::mpsc::channel();
    let mut handles = Vec::new();
    for stream in listener.incoming() {
        let stream = stream.map_err(|e| Error::Session(e.to_string()))?;
        let index = counter.fetch_add(1, Ordering::SeqCst);
        let (make_env, settings, tx) = (make_env.clone(), settings.clone(), tx.clone());
        handles.push(std::thread::spawn(move || {
            let result = handle_connection(stream, index, &*make_env, &settings);
            let _ = tx.send((index, result));
        }));
        while let Ok((i, r)) = rx.try_recv() {
            on_done(i, r);
        }
        if max_sessions.is_some_and(|m| index + 1 >= m) {
            break;
        }
    }
    drop(tx);
    for h in handles {
        let _ = h.join();
    }
    for (i, r) in rx {
        on_done(i, r);
    }
    Ok(())
}

fn handle_connection(
    stream: TcpStream,
    index: usize,
    make_env: &dyn Fn() -> Result<Box<dyn Environment>>,
    settings: &SessionSettings,
) -> Result<SessionOutcome> {
    stream.set_nodelay(true).map_err(|e| Error::Session(e.to_string()))?;
    let mut ws = tungstenite::accept(stream).map_err(|e| Error::Session(e.to_string()))?;
    let mut env = make_env()?;
    let outcome = run_session(&mut ws, env.as_mut(), settings)?;
    if let Some(dir) = &settings.log_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        outcome
            .log
            .save(dir.join(format!("session-{}-{index:04}.json", settings.kind)))?;
    }
    Ok(outcome)
}

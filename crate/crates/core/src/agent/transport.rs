//! How the agent reaches a simulator: in-process or over a WebSocket.

use std::net::TcpStream;

use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use super::AgentError;
use crate::engine::Engine;
use crate::protocol::{CommandEnvelope, ResultEnvelope};

/// One request, one reply.
pub trait Transport {
    fn send(&mut self, env: &CommandEnvelope) -> Result<ResultEnvelope, AgentError>;
}

/// Drives an engine in the same process.
pub struct LocalTransport {
    pub engine: Engine,
}

impl LocalTransport {
    pub fn new(engine: Engine) -> Self {
        LocalTransport { engine }
    }
}

impl Transport for LocalTransport {
    fn send(&mut self, env: &CommandEnvelope) -> Result<ResultEnvelope, AgentError> {
        Ok(self.engine.handle(env))
    }
}

impl Transport for &mut Engine {
    fn send(&mut self, env: &CommandEnvelope) -> Result<ResultEnvelope, AgentError> {
        Ok(self.handle(env))
    }
}

/// Blocking WebSocket client. Server event frames are skipped.
pub struct WsTransport {
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
}

impl WsTransport {
    pub fn connect(url: &str) -> Result<Self, AgentError> {
        let (socket, _) = tungstenite::connect(url).map_err(|e| AgentError::Transport(e.to_string()))?;
        Ok(WsTransport { socket })
    }

    pub fn close(mut self) {
        let _ = self.socket.close(None);
        // Drain until the server acknowledges the close.
        while self.socket.read().is_ok() {}
    }
}

impl Transport for WsTransport {
    fn send(&mut self, env: &CommandEnvelope) -> Result<ResultEnvelope, AgentError> {
        let text = serde_json::to_string(env).expect("envelope serializes");
        self.socket
            .send(Message::Text(text))
            .map_err(|e| AgentError::Transport(e.to_string()))?;
        loop {
            let msg = self.socket.read().map_err(|e| AgentError::Transport(e.to_string()))?;
            let text = match msg {
                Message::Text(t) => t,
                Message::Close(_) => return Err(AgentError::Transport("server closed the connection".into())),
                _ => continue,
            };
            if crate::server::as_event(&text).is_some() {
                continue;
            }
            let reply: ResultEnvelope =
                serde_json::from_str(&text).map_err(|e| AgentError::Transport(format!("bad reply: {e}")))?;
            if reply.id != Some(env.id) {
                return Err(AgentError::Transport(format!(
                    "reply id {:?} does not match request {}",
                    reply.id, env.id
                )));
            }
            return Ok(reply);
        }
    }
}

//! WebSocket front end for an [`Engine`].
//!
//! Every connection sends one JSON [`CommandEnvelope`] per text frame and
//! receives one [`ResultEnvelope`] per request, in request order. All requests
//! from all connections are funneled through a single simulation thread that
//! owns the engine, so mutations are applied one at a time in arrival order.
//!
//! Sessions: at most one connection is the controller. A connection becomes
//! controller by sending `{"fn":"Session","args":{"role":"controller"}}`, or
//! implicitly by sending a mutating command while nobody controls the world.
//! Everyone else is an observer: queries are served, mutating commands get a
//! `read_only` error, and after every applied mutation observers receive an
//! event frame `{"event":"state", ...}` carrying the new environment info.
//! When the controller disconnects its running episode is aborted.
//!
//! With a UI directory configured, plain HTTP GET requests on the same port
//! are answered with static files from that directory.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::mpsc as std_mpsc;
use std::thread::JoinHandle;

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio_tungstenite::tungstenite::Message;

use crate::engine::Engine;
use crate::observe::env_info;
use crate::protocol::{Command, CommandEnvelope, ErrorCode, ResultEnvelope, Role};

pub type ConnId = u64;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("port {0} is busy")]
    PortBusy(u16),
    #[error("server i/o error: {0}")]
    Io(#[from] std::io::Error),
}

enum SimMsg {
    Connect { conn: ConnId, out: mpsc::UnboundedSender<String> },
    Request { conn: ConnId, text: String },
    Disconnect { conn: ConnId },
    Shutdown { done: std::sync::mpsc::Sender<Engine> },
}

/// Session bookkeeping plus the engine; lives on the simulation thread.
struct Sim {
    engine: Engine,
    controller: Option<ConnId>,
    outputs: BTreeMap<ConnId, mpsc::UnboundedSender<String>>,
}

impl Sim {
    fn send(&self, conn: ConnId, text: String) {
        if let Some(out) = self.outputs.get(&conn) {
            // A closed channel means the connection is going away; its
            // Disconnect message follows.
            let _ = out.send(text);
        }
    }

    fn error(&self, id: Option<i64>, code: ErrorCode, message: impl Into<String>) -> String {
        let r = ResultEnvelope::error(id, code, message, self.engine.world().time());
        serde_json::to_string(&r).expect("result serializes")
    }

    fn request(&mut self, conn: ConnId, text: &str) {
        let reply = match serde_json::from_str::<CommandEnvelope>(text) {
            // Malformed envelopes are reported by the engine itself.
            Err(_) => self.engine.handle_text(text),
            Ok(env) => self.envelope(conn, &env),
        };
        self.send(conn, reply);
    }

    fn envelope(&mut self, conn: ConnId, env: &CommandEnvelope) -> String {
        let cmd = match Command::parse(&env.function, &env.args) {
            Ok(c) => c,
            Err(e) => return self.error(Some(env.id), e.code, e.message),
        };
        match cmd {
            Command::Session(role) => self.session(conn, env.id, role),
            cmd if cmd.is_mutating() => {
                if self.controller.is_none() {
                    log::info!("connection {conn} implicitly became controller");
                    self.controller = Some(conn);
                }
                if self.controller != Some(conn) {
                    return self.error(Some(env.id), ErrorCode::ReadOnly, "observers cannot mutate the world");
                }
                let result = self.engine.handle(env);
                if result.is_ok() {
                    self.broadcast(conn, env);
                }
                serde_json::to_string(&result).expect("result serializes")
            }
            _ => serde_json::to_string(&self.engine.handle(env)).expect("result serializes"),
        }
    }

    fn session(&mut self, conn: ConnId, id: i64, role: Role) -> String {
        match role {
            Role::Controller => match self.controller {
                Some(c) if c != conn => {
                    return self.error(Some(id), ErrorCode::ControllerTaken, format!("connection {c} is the controller"))
                }
                _ => self.controller = Some(conn),
            },
            Role::Observer => {
                if self.controller == Some(conn) {
                    self.controller = None;
                }
            }
        }
        let r = ResultEnvelope::ok(id, json!({ "role": role, "connection": conn }), self.engine.world().time());
        serde_json::to_string(&r).expect("result serializes")
    }

    fn broadcast(&self, from: ConnId, env: &CommandEnvelope) {
        if self.outputs.len() < 2 {
            return;
        }
        let world = self.engine.world();
        let event = json!({
            "event": "state",
            "tick": world.time(),
            "fn": env.function,
            "env": env_info(world),
            "task": self.engine.task_status(),
        })
        .to_string();
        for (&conn, out) in &self.outputs {
            if conn != from {
                let _ = out.send(event.clone());
            }
        }
    }

    fn disconnect(&mut self, conn: ConnId) {
        self.outputs.remove(&conn);
        if self.controller == Some(conn) {
            log::info!("controller {conn} disconnected; aborting any running episode");
            self.controller = None;
            self.engine.abort_episode();
        }
    }
}

fn sim_loop(engine: Engine, rx: std_mpsc::Receiver<SimMsg>) {
    let mut sim = Sim {
        engine,
        controller: None,
        outputs: BTreeMap::new(),
    };
    while let Ok(msg) = rx.recv() {
        match msg {
            SimMsg::Connect { conn, out } => {
                sim.outputs.insert(conn, out);
            }
            SimMsg::Request { conn, text } => sim.request(conn, &text),
            SimMsg::Disconnect { conn } => sim.disconnect(conn),
            SimMsg::Shutdown { done } => {
                sim.engine.abort_episode();
                let _ = done.send(sim.engine);
                return;
            }
        }
    }
}

/// A bound, not yet running server.
pub struct Server {
    listener: TcpListener,
    engine: Engine,
    ui_dir: Option<PathBuf>,
}

impl Server {
    /// Binds `addr`; an address already in use is reported as
    /// [`ServerError::PortBusy`].
    pub async fn bind(addr: SocketAddr, engine: Engine) -> Result<Server, ServerError> {
        let listener = TcpListener::bind(addr).await.map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => ServerError::PortBusy(addr.port()),
            _ => ServerError::Io(e),
        })?;
        Ok(Server {
            listener,
            engine,
            ui_dir: None,
        })
    }

    /// Serves static files from `dir` to non-WebSocket HTTP requests.
    pub fn with_ui_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.ui_dir = dir;
        self
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Accepts connections until `shutdown` resolves, then returns the engine.
    pub async fn run_until(self, shutdown: impl std::future::Future<Output = ()>) -> Engine {
        let (tx, rx) = std_mpsc::channel::<SimMsg>();
        let sim: JoinHandle<()> = std::thread::spawn(move || sim_loop(self.engine, rx));
        let ui_dir = self.ui_dir.map(std::sync::Arc::new);
        let mut next_conn: ConnId = 1;
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let conn = next_conn;
                        next_conn += 1;
                        let tx = tx.clone();
                        let ui_dir = ui_dir.clone();
                        tokio::spawn(async move {
                            if let Err(e) = serve_connection(stream, conn, tx, ui_dir.as_deref().map(PathBuf::as_path)).await {
                                log::debug!("connection {conn} from {peer} ended: {e}");
                            }
                        });
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                }
            }
        }
        let (done_tx, done_rx) = std_mpsc::channel();
        let _ = tx.send(SimMsg::Shutdown { done: done_tx });
        let engine = tokio::task::spawn_blocking(move || done_rx.recv().expect("simulation thread returns the engine"))
            .await
            .expect("join simulation shutdown");
        sim.join().expect("simulation thread exits cleanly");
        engine
    }

    /// Accepts connections forever.
    pub async fn run(self) {
        self.run_until(std::future::pending()).await;
    }
}

async fn serve_connection(
    stream: TcpStream,
    conn: ConnId,
    sim: std_mpsc::Sender<SimMsg>,
    ui_dir: Option<&Path>,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    if let Some(dir) = ui_dir {
        if !is_websocket_upgrade(&stream).await? {
            return serve_static(stream, dir).await;
        }
    }
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    sim.send(SimMsg::Connect { conn, out: out_tx })?;
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let mut result = Ok(());
    while let Some(msg) = source.next().await {
        match msg {
            Ok(Message::Text(text)) => {
                if sim.send(SimMsg::Request { conn, text }).is_err() {
                    break;
                }
            }
            Ok(Message::Binary(bytes)) => match String::from_utf8(bytes) {
                Ok(text) => {
                    if sim.send(SimMsg::Request { conn, text }).is_err() {
                        break;
                    }
                }
                Err(_) => log::debug!("connection {conn}: ignoring non-UTF-8 binary frame"),
            },
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(e) => {
                result = Err(e.into());
                break;
            }
        }
    }
    let _ = sim.send(SimMsg::Disconnect { conn });
    // Dropping our side of the output channel happens in the sim thread on
    // Disconnect; the writer then drains and exits.
    let _ = writer.await;
    result
}

/// Peeks at the request head without consuming it.
async fn is_websocket_upgrade(stream: &TcpStream) -> std::io::Result<bool> {
    let mut buf = vec![0u8; 8192];
    for _ in 0..100 {
        let n = stream.peek(&mut buf).await?;
        if n == 0 {
            return Ok(false);
        }
        let head = String::from_utf8_lossy(&buf[..n]).to_ascii_lowercase();
        if head.contains("\r\n\r\n") || n == buf.len() {
            return Ok(head.contains("upgrade: websocket"));
        }
        tokio::time::sleep(std::time::Duration::from_millis(5)).await;
    }
    Ok(false)
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

/// Resolves a request path inside `root`, refusing anything that escapes it.
pub fn resolve_static(root: &Path, request_path: &str) -> Option<PathBuf> {
    let clean = request_path.split(['?', '#']).next().unwrap_or("/");
    let mut path = root.to_path_buf();
    for part in clean.split('/') {
        match part {
            "" | "." => {}
            ".." => return None,
            p => path.push(p),
        }
    }
    if path.is_dir() {
        path.push("index.html");
    }
    path.is_file().then_some(path)
}

async fn serve_static(mut stream: TcpStream, root: &Path) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let mut buf = vec![0u8; 8192];
    let n = stream.peek(&mut buf).await?;
    let head = String::from_utf8_lossy(&buf[..n]).into_owned();
    let mut parts = head.split_whitespace();
    let method = parts.next().unwrap_or("");
    let target = parts.next().unwrap_or("/");
    let (status, ctype, body) = match (method, resolve_static(root, target)) {
        ("GET", Some(path)) => ("200 OK", content_type(&path), tokio::fs::read(&path).await?),
        ("GET", None) => ("404 Not Found", "text/plain", b"not found".to_vec()),
        _ => ("405 Method Not Allowed", "text/plain", b"method not allowed".to_vec()),
    };
    let header = format!(
        "HTTP/1.1 {status}\r\nContent-Type: {ctype}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    stream.write_all(header.as_bytes()).await?;
    stream.write_all(&body).await?;
    stream.shutdown().await?;
    Ok(())
}

/// A server running on a background runtime; used by tests, examples and the
/// benchmark's external-agent mode.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<Engine>>,
}

impl ServerHandle {
    /// Binds `addr` (port 0 picks a free port) and serves on a new thread.
    pub fn spawn(addr: SocketAddr, engine: Engine) -> Result<ServerHandle, ServerError> {
        ServerHandle::spawn_with_ui(addr, engine, None)
    }

    /// Like [`ServerHandle::spawn`], also serving static files from `ui_dir`.
    pub fn spawn_with_ui(addr: SocketAddr, engine: Engine, ui_dir: Option<PathBuf>) -> Result<ServerHandle, ServerError> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let server = runtime.block_on(Server::bind(addr, engine))?.with_ui_dir(ui_dir);
        let addr = server.local_addr();
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(server.run_until(async {
                let _ = rx.await;
            }))
        });
        Ok(ServerHandle {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    /// Spawns on 127.0.0.1 with an OS-assigned port.
    pub fn spawn_local(engine: Engine) -> Result<ServerHandle, ServerError> {
        ServerHandle::spawn(SocketAddr::from(([127, 0, 0, 1], 0)), engine)
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    /// Stops accepting, aborts any running episode and returns the engine.
    pub fn stop(mut self) -> Engine {
        self.stop_inner().expect("server thread returns the engine")
    }

    fn stop_inner(&mut self) -> Option<Engine> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.thread.take().map(|t| t.join().expect("server thread exits cleanly"))
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_inner();
    }
}

/// Parses a server event frame, returning `None` for ordinary results.
pub fn as_event(text: &str) -> Option<Value> {
    let v: Value = serde_json::from_str(text).ok()?;
    v.get("event").is_some().then_some(v)
}

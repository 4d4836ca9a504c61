//! WebSocket server behavior: session roles, broadcasts, ordering, static
//! files and binding errors.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use sari_sim::bench::reference_tasks;
use sari_sim::geometry::Vec3;
use sari_sim::protocol::{build, ErrorCode, ResultEnvelope, Role};
use sari_sim::server::{as_event, ServerError, ServerHandle};
use sari_sim::Engine;
use serde_json::Value;
use tungstenite::Message;

type Ws = tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>;

fn connect(url: &str) -> Ws {
    let (ws, _) = tungstenite::connect(url).expect("connect");
    ws
}

fn send<T: serde::Serialize>(ws: &mut Ws, env: &T) {
    ws.send(Message::Text(serde_json::to_string(env).unwrap())).unwrap();
}

/// Next frame as either a result or an event.
fn next(ws: &mut Ws) -> Result<ResultEnvelope, Value> {
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            return match as_event(&t) {
                Some(ev) => Err(ev),
                None => Ok(serde_json::from_str(&t).unwrap()),
            };
        }
    }
}

fn reply(ws: &mut Ws) -> ResultEnvelope {
    loop {
        if let Ok(r) = next(ws) {
            return r;
        }
    }
}

fn forward(id: i64) -> sari_sim::protocol::CommandEnvelope {
    build::transform_agent(id, Vec3::new(0.0, 0.0, 0.1), Vec3::ZERO)
}

#[test]
fn second_controller_is_refused_and_observers_are_read_only() {
    let server = ServerHandle::spawn_local(Engine::reference(1, 0).unwrap()).unwrap();
    let mut a = connect(&server.url());
    let mut b = connect(&server.url());
    send(&mut a, &build::session(1, Role::Controller));
    assert!(reply(&mut a).is_ok());
    send(&mut b, &build::session(1, Role::Controller));
    assert_eq!(reply(&mut b).error_code(), Some(ErrorCode::ControllerTaken));
    send(&mut b, &forward(2));
    let r = reply(&mut b);
    assert_eq!(r.error_code(), Some(ErrorCode::ReadOnly));
    assert_eq!(r.id, Some(2));
    // Observers may still query.
    send(&mut b, &build::simple(3, "GetEnvInfo"));
    assert!(reply(&mut b).is_ok());
    // Controller mutates; observer sees a state event, never a stray result.
    send(&mut a, &forward(4));
    assert!(reply(&mut a).is_ok());
    let ev = next(&mut b).expect_err("observer receives an event");
    assert_eq!(ev["event"], "state");
    assert_eq!(ev["fn"], "TransformAgent");
    assert!(ev["env"]["avatar"].is_object());
    // Releasing control lets the other connection take it.
    send(&mut a, &build::session(5, Role::Observer));
    assert!(reply(&mut a).is_ok());
    send(&mut b, &build::session(6, Role::Controller));
    assert!(reply(&mut b).is_ok());
}

#[test]
fn first_mutation_claims_control_implicitly() {
    let server = ServerHandle::spawn_local(Engine::reference(2, 0).unwrap()).unwrap();
    let mut a = connect(&server.url());
    let mut b = connect(&server.url());
    send(&mut a, &forward(1));
    assert!(reply(&mut a).is_ok());
    send(&mut b, &forward(1));
    assert_eq!(reply(&mut b).error_code(), Some(ErrorCode::ReadOnly));
    send(&mut b, &build::session(2, Role::Controller));
    assert_eq!(reply(&mut b).error_code(), Some(ErrorCode::ControllerTaken));
}

#[test]
fn pipelined_requests_get_replies_in_order() {
    let server = ServerHandle::spawn_local(Engine::reference(1, 0).unwrap()).unwrap();
    let mut ws = connect(&server.url());
    let n = 1000;
    for id in 0..n {
        let env = match id % 4 {
            0 => forward(id),
            1 => build::simple(id, "GetEnvInfo"),
            2 => build::transform_agent(id, Vec3::ZERO, Vec3::new(0.0, 2.5, 0.0)),
            _ => sari_sim::protocol::CommandEnvelope::new(id, "NoSuchFunction", serde_json::json!({})),
        };
        send(&mut ws, &env);
    }
    let ids: Vec<i64> = (0..n).map(|_| reply(&mut ws).id.unwrap()).collect();
    assert_eq!(ids, (0..n).collect::<Vec<_>>());
    let engine = server.stop();
    assert_eq!(engine.world().steps, 500);
}

#[test]
fn controller_disconnect_aborts_the_episode() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::reference(1, 0)
        .unwrap()
        .with_tasks(reference_tasks())
        .with_log_dir(Some(dir.path().to_path_buf()));
    let server = ServerHandle::spawn_local(engine).unwrap();
    let mut ws = connect(&server.url());
    send(&mut ws, &build::reset(1, 1, 100, Some(Value::String("L1-E1".into()))));
    assert!(reply(&mut ws).is_ok());
    for id in 2..10 {
        send(&mut ws, &forward(id));
        assert!(reply(&mut ws).is_ok());
    }
    ws.close(None).unwrap();
    let _ = ws.read();
    // The abort is asynchronous to the client; poll for the log file.
    let mut logs = Vec::new();
    for _ in 0..200 {
        logs = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
        if !logs.is_empty() {
            break;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    assert_eq!(logs.len(), 1);
    let log = sari_sim::bench::EpisodeLog::load(&logs[0]).unwrap();
    assert_eq!(log.outcome.unwrap().reason, sari_sim::bench::OutcomeReason::Aborted);
}

#[test]
fn busy_port_is_reported() {
    let first = ServerHandle::spawn_local(Engine::reference(1, 0).unwrap()).unwrap();
    match ServerHandle::spawn(first.addr(), Engine::reference(1, 0).unwrap()) {
        Err(ServerError::PortBusy(p)) => assert_eq!(p, first.addr().port()),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("second bind on the same port succeeded"),
    }
}

fn http_get(addr: SocketAddr, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut text = String::new();
    s.read_to_string(&mut text).unwrap();
    let status = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[test]
fn ui_dir_is_served_beside_the_websocket() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>teleop</html>").unwrap();
    std::fs::create_dir(dir.path().join("js")).unwrap();
    std::fs::write(dir.path().join("js/app.js"), "console.log(1)").unwrap();
    let server = ServerHandle::spawn_with_ui(
        SocketAddr::from(([127, 0, 0, 1], 0)),
        Engine::reference(1, 0).unwrap(),
        Some(dir.path().to_path_buf()),
    )
    .unwrap();
    assert_eq!(http_get(server.addr(), "/"), (200, "<html>teleop</html>".into()));
    assert_eq!(http_get(server.addr(), "/js/app.js"), (200, "console.log(1)".into()));
    assert_eq!(http_get(server.addr(), "/missing.css").0, 404);
    assert_eq!(http_get(server.addr(), "/../Cargo.toml").0, 404);
    // The WebSocket endpoint still works on the same port.
    let mut ws = connect(&server.url());
    send(&mut ws, &build::simple(1, "GetEnvInfo"));
    assert!(reply(&mut ws).is_ok());
}

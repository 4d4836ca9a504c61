//! Starts the simulation server on a free local port and drives it over a
//! WebSocket: a controller issues commands while an observer receives state
//! events, and protocol errors come back as structured results.
//!
//! ```text
//! cargo run --example websocket_session
//! ```

use sari_sim::geometry::Vec3;
use sari_sim::protocol::{build, CommandEnvelope, ResultEnvelope, Role};
use sari_sim::server::{as_event, ServerHandle};
use sari_sim::Engine;
use tungstenite::Message;

type Ws = tungstenite::WebSocket<tungstenite::stream::MaybeTlsStream<std::net::TcpStream>>;

/// Sends one command and waits for its result, printing any state events
/// that arrive first.
fn call(ws: &mut Ws, env: &CommandEnvelope) -> ResultEnvelope {
    ws.send(Message::Text(serde_json::to_string(env).unwrap())).unwrap();
    loop {
        if let Message::Text(t) = ws.read().unwrap() {
            match as_event(&t) {
                Some(ev) => println!("    (event: {} applied, t={})", ev["fn"], ev["tick"]),
                None => return serde_json::from_str(&t).unwrap(),
            }
        }
    }
}

fn brief(r: &ResultEnvelope) -> String {
    match &r.error {
        Some(e) => format!("id {:?} error {:?}: {}", r.id, e.code, e.message),
        None => format!("id {:?} ok t={:.2}", r.id, r.tick),
    }
}

fn main() {
    let server = ServerHandle::spawn_local(Engine::reference(1, 0).expect("engine")).expect("bind");
    println!("serving on {}", server.url());
    let (mut controller, _) = tungstenite::connect(server.url()).expect("connect");
    let (mut observer, _) = tungstenite::connect(server.url()).expect("connect");

    println!("controller Session -> {}", brief(&call(&mut controller, &build::session(1, Role::Controller))));
    println!("observer   Session -> {}", brief(&call(&mut observer, &build::session(1, Role::Controller))));
    println!("controller Reset   -> {}", brief(&call(&mut controller, &build::reset(2, 2, 7, None))));
    let fwd = build::transform_agent(3, Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.0, 2.5, 0.0));
    println!("controller forward -> {}", brief(&call(&mut controller, &fwd)));
    println!("observer   forward -> {}", brief(&call(&mut observer, &fwd)));
    println!("controller Fly     -> {}", brief(&call(&mut controller, &CommandEnvelope::new(4, "Fly", serde_json::json!({})))));
    let info = call(&mut controller, &build::simple(5, "GetEnvInfo"));
    println!("controller GetEnvInfo -> avatar {}", info.payload["avatar"]);

    // Events queued for the observer arrive ahead of its next reply.
    println!("observer GetEnvInfo (flushes queued events):");
    let seen = call(&mut observer, &build::simple(2, "GetEnvInfo"));
    println!("observer sees avatar {}", seen.payload["avatar"]);
    drop(controller);
    drop(observer);
    let engine = server.stop();
    println!("final state hash {}", engine.world().state_hash());
}

//! Runs the scripted agent on shipped tasks in-process and verifies each log.
//!
//! ```text
//! cargo run --example scripted_episode -- L1-E1 L1-A1
//! ```
//!
//! With no arguments it runs the first easy task of layout 1.

use std::sync::Arc;

use sari_sim::agent::{LocalTransport, ScriptedAgent, DEFAULT_BUDGET};
use sari_sim::bench::{reference_tasks, replay_verify};
use sari_sim::Engine;

fn main() {
    let ids: Vec<String> = std::env::args().skip(1).collect();
    let ids = if ids.is_empty() { vec!["L1-E1".to_string()] } else { ids };
    let tasks = reference_tasks();
    let engine = Engine::reference(1, 0).expect("reference engine");
    let catalog = Arc::clone(engine.catalog());
    let layouts = engine.layouts().to_vec();
    let mut agent = ScriptedAgent::new(LocalTransport::new(engine), layouts.clone(), Some(Arc::clone(&catalog)));
    for id in ids {
        let task = tasks.iter().find(|t| t.id == id).unwrap_or_else(|| panic!("no task {id}"));
        println!("{}: {}", task.id, task.instruction);
        let report = agent.run_task(task, DEFAULT_BUDGET);
        println!("  {}", serde_json::to_string(&report).unwrap());
        let log = agent
            .client
            .transport_mut()
            .engine
            .current_log()
            .cloned()
            .expect("episode log");
        let ok = replay_verify(&log, &catalog, &layouts).expect("replayable");
        println!("  ticks {}, commands logged {}, replay_verify {ok}", log.ticks.len(), log.commands.len());
    }
}

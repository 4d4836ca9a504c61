//! Request dispatch over a single world: the simulation's single writer.
//!
//! [`Engine::handle`] turns one [`CommandEnvelope`] into exactly one
//! [`ResultEnvelope`]. Mutating commands advance the clock by one tick,
//! resolve poke contacts, evaluate the scanner and feed the episode recorder.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::avatar::{resolve_contacts, toggle_grip, toggle_poke, transform_agent, transform_hands};
use crate::bench::{EpisodeLog, EpisodeRecorder, TaskSpec};
use crate::catalog::Catalog;
use crate::checkout::scan_attempt;
use crate::config::SimConfig;
use crate::observe::{env_info, render_screenshot, semantic_frame};
use crate::protocol::{Command, CommandEnvelope, ErrorCode, ResetArgs, ResultEnvelope};
use crate::store::layout::{reference_layouts, Layout};
use crate::store::{reset_world, StoreError};
use crate::world::WorldState;

/// Environment variable naming the directory for finished episode logs.
pub const LOG_DIR_ENV: &str = "SARI_SIM_LOG_DIR";

pub struct Engine {
    catalog: Arc<Catalog>,
    catalog_hash: String,
    layouts: Vec<Arc<Layout>>,
    config: Arc<SimConfig>,
    tasks: BTreeMap<String, TaskSpec>,
    world: WorldState,
    recorder: Option<EpisodeRecorder>,
    /// Whether the current recorder's finished log was already collected.
    collected: bool,
    finished: Vec<EpisodeLog>,
    log_dir: Option<PathBuf>,
    written: Vec<PathBuf>,
    /// Where the current episode's log was written, once it was.
    episode_path: Option<PathBuf>,
}

type Reply = Result<Value, (ErrorCode, String)>;

impl Engine {
    pub fn new(
        catalog: Arc<Catalog>,
        layouts: Vec<Arc<Layout>>,
        config: Arc<SimConfig>,
        layout: u32,
        seed: u64,
    ) -> Result<Engine, StoreError> {
        let world = reset_world(&catalog, &layouts, &config, layout, seed)?;
        let catalog_hash = hex::encode(Sha256::digest(catalog.to_json().as_bytes()));
        Ok(Engine {
            catalog,
            catalog_hash,
            layouts,
            config,
            tasks: BTreeMap::new(),
            world,
            recorder: None,
            collected: false,
            finished: Vec::new(),
            log_dir: None,
            written: Vec::new(),
            episode_path: None,
        })
    }

    /// Engine over the shipped catalog, layouts and default config.
    pub fn reference(layout: u32, seed: u64) -> Result<Engine, StoreError> {
        Engine::new(
            Arc::new(crate::reference_catalog()),
            reference_layouts().into_iter().map(Arc::new).collect(),
            Arc::new(SimConfig::default()),
            layout,
            seed,
        )
    }

    /// Makes tasks addressable by id in `Reset{task: "<id>"}`.
    pub fn with_tasks(mut self, tasks: impl IntoIterator<Item = TaskSpec>) -> Self {
        self.tasks.extend(tasks.into_iter().map(|t| (t.id.clone(), t)));
        self
    }

    /// Writes finished episode logs into `dir`.
    pub fn with_log_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.log_dir = dir;
        self
    }

    /// Uses `SARI_SIM_LOG_DIR` when set.
    pub fn with_log_dir_from_env(self) -> Self {
        let dir = std::env::var_os(LOG_DIR_ENV).map(PathBuf::from);
        self.with_log_dir(dir)
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn layouts(&self) -> &[Arc<Layout>] {
        &self.layouts
    }

    pub fn config(&self) -> &Arc<SimConfig> {
        &self.config
    }

    pub fn catalog_hash(&self) -> &str {
        &self.catalog_hash
    }

    pub fn current_log(&self) -> Option<&EpisodeLog> {
        self.recorder.as_ref().map(|r| &r.log)
    }

    /// Status of the current episode; once its log is written the path is
    /// reported under `"log"`.
    pub fn task_status(&self) -> Option<Value> {
        let r = self.recorder.as_ref()?;
        let mut status = r.status();
        if let (true, Some(path)) = (r.is_done() && self.collected, &self.episode_path) {
            status["log"] = json!(path.display().to_string());
        }
        Some(status)
    }

    /// Finished episodes not yet collected.
    pub fn take_finished(&mut self) -> Vec<EpisodeLog> {
        std::mem::take(&mut self.finished)
    }

    /// Paths of logs written to the log directory so far.
    pub fn written_logs(&self) -> &[PathBuf] {
        &self.written
    }

    /// Ends the running episode (if any) with an aborted outcome.
    pub fn abort_episode(&mut self) {
        if let Some(r) = self.recorder.as_mut() {
            r.abort(&self.world);
        }
        self.collect_finished();
    }

    fn collect_finished(&mut self) {
        let Some(r) = self.recorder.as_ref() else {
            return;
        };
        if !r.is_done() || self.collected {
            return;
        }
        self.collected = true;
        let log = r.log.clone();
        if let Some(dir) = &self.log_dir {
            match log.write_to_dir(dir) {
                Ok(p) => {
                    log::info!("episode log written to {}", p.display());
                    self.episode_path = Some(p.clone());
                    self.written.push(p);
                }
                Err(e) => log::error!("cannot write episode log: {e}"),
            }
        }
        self.finished.push(log);
    }

    pub fn handle_text(&mut self, text: &str) -> String {
        let reply = match serde_json::from_str::<CommandEnvelope>(text) {
            Ok(env) => self.handle(&env),
            Err(e) => {
                let id = serde_json::from_str::<Value>(text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_i64));
                ResultEnvelope::error(id, ErrorCode::BadRequest, e.to_string(), self.world.time())
            }
        };
        serde_json::to_string(&reply).expect("result serializes")
    }

    pub fn handle(&mut self, env: &CommandEnvelope) -> ResultEnvelope {
        let cmd = match Command::parse(&env.function, &env.args) {
            Ok(c) => c,
            Err(e) => return ResultEnvelope::error(Some(env.id), e.code, e.message, self.world.time()),
        };
        let ext = cmd.is_extension();
        let reply = self.apply(env, cmd);
        let mut r = match reply {
            Ok(payload) => ResultEnvelope::ok(env.id, payload, self.world.time()),
            Err((code, msg)) => ResultEnvelope::error(Some(env.id), code, msg, self.world.time()),
        };
        r.ext = ext;
        r
    }

    fn apply(&mut self, env: &CommandEnvelope, cmd: Command) -> Reply {
        match cmd {
            Command::Reset(args) => self.reset(args),
            Command::Session(role) => Ok(json!({ "role": role })),
            Command::RequestScreenshot => {
                let shot = render_screenshot(&self.world);
                Ok(json!({
                    "width": shot.width,
                    "height": shot.height,
                    "format": "png",
                    "encoding": "base64",
                    "data": shot.to_base64_png(),
                }))
            }
            Command::GetEnvInfo => {
                let mut info = env_info(&self.world);
                info.task = self.task_status();
                Ok(serde_json::to_value(info).expect("env info serializes"))
            }
            Command::GetSemanticFrame => {
                Ok(serde_json::to_value(semantic_frame(&self.world)).expect("frame serializes"))
            }
            mutating => Ok(self.step(env, mutating)),
        }
    }

    /// Applies one clock-advancing command.
    fn step(&mut self, env: &CommandEnvelope, cmd: Command) -> Value {
        let w = &mut self.world;
        let mut payload = match cmd {
            Command::TransformAgent { t, r } => {
                transform_agent(w, t, r);
                json!({"position": w.avatar.position, "rotation": w.avatar.rotation})
            }
            Command::TransformHands {
                left_t,
                left_r,
                right_t,
                right_r,
            } => {
                transform_hands(w, left_t, left_r, right_t, right_r);
                json!({
                    "left": {"position": w.hand_position(crate::Side::Left), "rotation": w.hand_rotation(crate::Side::Left)},
                    "right": {"position": w.hand_position(crate::Side::Right), "rotation": w.hand_rotation(crate::Side::Right)},
                })
            }
            Command::ToggleGrip(side) => {
                let ev = toggle_grip(w, side);
                serde_json::to_value(ev).expect("grip event serializes")
            }
            Command::TogglePoke(side) => {
                toggle_poke(w, side);
                json!({"side": side, "poke": w.hand(side).poke})
            }
            other => unreachable!("not a stepping command: {other:?}"),
        };
        w.steps += 1;
        let contacts = resolve_contacts(w);
        let scan = scan_attempt(w);
        let obj = payload.as_object_mut().expect("payload is an object");
        if !contacts.presses.is_empty() {
            obj.insert("presses".into(), serde_json::to_value(&contacts.presses).expect("serializes"));
        }
        if !contacts.doors.is_empty() {
            obj.insert("doors".into(), serde_json::to_value(&contacts.doors).expect("serializes"));
        }
        if let Some(s) = scan {
            obj.insert("scan".into(), serde_json::to_value(s).expect("serializes"));
        }
        if let Some(r) = self.recorder.as_mut() {
            r.after_command(env, &self.world);
        }
        self.collect_finished();
        if let Some(status) = self.task_status() {
            payload["task"] = status;
        }
        payload
    }

    fn resolve_task(&self, spec: &Value) -> Result<TaskSpec, (ErrorCode, String)> {
        let task = match spec {
            Value::String(id) => self
                .tasks
                .get(id)
                .cloned()
                .ok_or_else(|| (ErrorCode::BadArgs, format!("Reset: unknown task id {id:?}")))?,
            other => serde_json::from_value::<TaskSpec>(other.clone())
                .map_err(|e| (ErrorCode::BadArgs, format!("Reset: bad task: {e}")))?,
        };
        task.validate(&self.catalog)
            .map_err(|e| (ErrorCode::BadArgs, format!("Reset: {e}")))?;
        Ok(task)
    }

    fn reset(&mut self, args: ResetArgs) -> Reply {
        let task = args.task.as_ref().map(|t| self.resolve_task(t)).transpose()?;
        let layout = args
            .layout
            .or(task.as_ref().map(|t| t.layout))
            .unwrap_or(self.world.layout.id);
        let seed = args.seed.or(task.as_ref().map(|t| t.seed)).unwrap_or(self.world.seed);
        if let Some(t) = &task {
            if t.layout != layout {
                return Err((
                    ErrorCode::BadArgs,
                    format!("Reset: task {} is for layout {}, not {layout}", t.id, t.layout),
                ));
            }
        }
        let world = reset_world(&self.catalog, &self.layouts, &self.config, layout, seed)
            .map_err(|e| (ErrorCode::BadArgs, format!("Reset: {e}")))?;
        self.abort_episode();
        self.world = world;
        self.collected = false;
        self.episode_path = None;
        self.recorder = task.map(|t| {
            let mut rec = EpisodeRecorder::new(t.clone(), &self.world, &self.catalog_hash);
            // The log keeps a self-contained reset so it replays without the task pack.
            let inline = crate::protocol::build::reset(
                0,
                layout,
                seed,
                Some(serde_json::to_value(&t).expect("task serializes")),
            );
            rec.log.commands.push(inline);
            rec
        });
        let mut payload = json!({"layout": layout, "seed": seed});
        if let Some(r) = &self.recorder {
            payload["task"] = json!(r.task().id);
        }
        Ok(payload)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::build;
    use crate::geometry::Vec3;

    #[test]
    fn reset_echoes_layout_and_seed() {
        let mut e = Engine::reference(1, 0).unwrap();
        let r = e.handle(&build::reset(1, 2, 42, None));
        assert!(r.is_ok());
        assert_eq!(r.payload, json!({"layout": 2, "seed": 42}));
        let r = e.handle(&build::reset(2, 4, 42, None));
        assert_eq!(r.error_code(), Some(ErrorCode::BadArgs));
    }

    #[test]
    fn forward_step_then_env_info() {
        let mut e = Engine::reference(1, 42).unwrap();
        let z0 = e.world().avatar.position.z;
        let r = e.handle(&build::transform_agent(2, Vec3::new(0.0, 0.0, 0.1), Vec3::ZERO));
        assert!(r.is_ok());
        assert!((r.tick - 0.05).abs() < 1e-12);
        let info = e.handle(&build::simple(3, "GetEnvInfo"));
        assert!(info.ext);
        let z1 = info.payload["avatar"]["position"][2].as_f64().unwrap();
        assert!((z1 - z0 - 0.1).abs() < 1e-9);
    }

    #[test]
    fn unknown_function_then_next_request_served() {
        let mut e = Engine::reference(1, 42).unwrap();
        let r: Value = serde_json::from_str(&e.handle_text(r#"{"id":3,"fn":"Fly"}"#)).unwrap();
        assert_eq!(r["error"]["code"], "unknown_function");
        assert_eq!(r["id"], 3);
        let r: Value = serde_json::from_str(&e.handle_text(r#"{"id":4,"fn":"GetEnvInfo"}"#)).unwrap();
        assert_eq!(r["status"], "ok");
        let r: Value = serde_json::from_str(&e.handle_text("not json")).unwrap();
        assert_eq!(r["error"]["code"], "bad_request");
    }
}

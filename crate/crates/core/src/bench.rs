//! Benchmark tasks, success evaluation, 10 Hz episode logging and replay.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{Catalog, Category, ProductSpec};
use crate::checkout::{Phase, Receipt};
use crate::config::SimConfig;
use crate::engine::Engine;
use crate::geometry::{EulerRot, Vec3};
use crate::protocol::CommandEnvelope;
use crate::store::layout::Layout;
use crate::world::{Grip, Side, WorldState};

pub const TASK_VERSION: u32 = 1;
pub const LOG_VERSION: u32 = 1;
/// Logging period in simulated seconds (10 Hz).
pub const TICK_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Average,
    Difficult,
}

/// Product selector; every present field must match.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sku: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_contains: Option<String>,
}

impl ProductMatch {
    pub fn matches(&self, p: &ProductSpec) -> bool {
        self.sku.as_ref().is_none_or(|s| *s == p.sku)
            && self.category.is_none_or(|c| c == p.category)
            && self
                .name_contains
                .as_ref()
                .is_none_or(|n| p.name.to_lowercase().contains(&n.to_lowercase()))
    }

    pub fn is_empty(&self) -> bool {
        self.sku.is_none() && self.category.is_none() && self.name_contains.is_none()
    }

    pub fn matching<'a>(&self, catalog: &'a Catalog) -> Vec<&'a ProductSpec> {
        catalog.products().iter().filter(|p| self.matches(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Goal {
    Hold {
        #[serde(rename = "match")]
        target: ProductMatch,
    },
    Scanned {
        #[serde(rename = "match")]
        target: ProductMatch,
    },
    AnswerScan {
        attribute: String,
        candidates: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub difficulty: Difficulty,
    pub layout: u32,
    #[serde(default)]
    pub seed: u64,
    pub instruction: String,
    pub goal: Goal,
    pub time_limit_s: f64,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read task file: {0}")]
    Io(#[from] std::io::Error),
    #[error("task file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported task_version {0}")]
    Version(u32),
    #[error("task {id}: {reason}")]
    Invalid { id: String, reason: String },
}

impl TaskSpec {
    /// Checks the goal against the catalog: selectors must match at least one
    /// product; answer tasks need two or more candidates carrying the attribute.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), TaskError> {
        let invalid = |reason: String| TaskError::Invalid {
            id: self.id.clone(),
            reason,
        };
        if !(self.time_limit_s > 0.0 && self.time_limit_s.is_finite()) {
            return Err(invalid("time_limit_s must be positive".into()));
        }
        match &self.goal {
            Goal::Hold { target } | Goal::Scanned { target } => {
                if target.is_empty() || target.matching(catalog).is_empty() {
                    return Err(invalid(format!("match {target:?} selects no catalog product")));
                }
            }
            Goal::AnswerScan { attribute, candidates } => {
                catalog
                    .attribute_argmin(candidates, attribute)
                    .map_err(|e| invalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Products that satisfy the goal's selector (for answer tasks, the answer).
    pub fn targets<'a>(&self, catalog: &'a Catalog) -> Vec<&'a ProductSpec> {
        match &self.goal {
            Goal::Hold { target } | Goal::Scanned { target } => target.matching(catalog),
            Goal::AnswerScan { attribute, candidates } => catalog
                .attribute_argmin(candidates, attribute)
                .ok()
                .and_then(|s| catalog.by_sku(&s).ok())
                .into_iter()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub task_version: u32,
    pub tasks: Vec<TaskSpec>,
}

pub fn tasks_from_json(text: &str) -> Result<Vec<TaskSpec>, TaskError> {
    let file: TaskFile = serde_json::from_str(text)?;
    if file.task_version != TASK_VERSION {
        return Err(TaskError::Version(file.task_version));
    }
    Ok(file.tasks)
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<TaskSpec>, TaskError> {
    tasks_from_json(&std::fs::read_to_string(path)?)
}

/// The shipped task pack: nine tasks per layout.
pub fn reference_tasks() -> Vec<TaskSpec> {
    tasks_from_json(include_str!("../data/tasks.json")).expect("shipped task pack is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeReason {
    Goal,
    TimeLimit,
    /// Paid for a receipt that does not satisfy the goal.
    WrongReceipt,
    /// The episode ended (reset, disconnect) before a verdict.
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pending,
    Success { t: f64 },
    Failure { t: f64, reason: OutcomeReason },
}

fn receipt_has(world: &WorldState, receipt: &Receipt, target: &ProductMatch) -> bool {
    receipt
        .lines
        .iter()
        .any(|l| world.catalog.by_sku(&l.sku).is_ok_and(|p| target.matches(p)))
}

/// Grades the world against a task. Success is checked before the time limit,
/// and a failed payment ends the episode since a paid cart cannot change.
pub fn evaluate(task: &TaskSpec, world: &WorldState) -> Verdict {
    let t = world.time();
    let paid = world.cart.phase == Phase::Paid;
    let success = match &task.goal {
        Goal::Hold { target } => Side::BOTH.iter().any(|&s| {
            world
                .hand(s)
                .held
                .is_some_and(|id| world.catalog.by_sku(&world.placement(id).sku).is_ok_and(|p| target.matches(p)))
        }),
        Goal::Scanned { target } => world.receipt.as_ref().is_some_and(|r| receipt_has(world, r, target)),
        Goal::AnswerScan { attribute, candidates } => {
            let answer = world.catalog.attribute_argmin(candidates, attribute).ok();
            world
                .receipt
                .as_ref()
                .is_some_and(|r| r.lines.len() == 1 && Some(&r.lines[0].sku) == answer.as_ref())
        }
    };
    if success {
        Verdict::Success { t }
    } else if paid && !matches!(task.goal, Goal::Hold { .. }) {
        Verdict::Failure {
            t,
            reason: OutcomeReason::WrongReceipt,
        }
    } else if t > task.time_limit_s + 1e-9 {
        Verdict::Failure {
            t: task.time_limit_s,
            reason: OutcomeReason::TimeLimit,
        }
    } else {
        Verdict::Pending
    }
}

/// A float that serializes with exactly six decimals.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct F6(pub f64);

impl Serialize for F6 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = if self.0 == 0.0 { 0.0 } else { self.0 };
        let raw = RawValue::from_string(format!("{v:.6}")).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

fn f6v(v: Vec3) -> [F6; 3] {
    [F6(v.x), F6(v.y), F6(v.z)]
}

fn f6r(r: EulerRot) -> [F6; 3] {
    [F6(r.pitch), F6(r.yaw), F6(r.roll)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub position: [F6; 3],
    pub rotation: [F6; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandRecord {
    pub position: [F6; 3],
    pub rotation: [F6; 3],
    pub grip: Grip,
    pub hovered: Option<u32>,
    pub held: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: F6,
    pub head: PoseRecord,
    pub left: HandRecord,
    pub right: HandRecord,
}

impl TickRecord {
    pub fn capture(world: &WorldState, t: f64) -> Self {
        let hand = |s: Side| HandRecord {
            position: f6v(world.hand_position(s)),
            rotation: f6r(world.hand_rotation(s)),
            grip: world.hand(s).grip,
            hovered: world.hand(s).hovered,
            held: world.hand(s).held,
        };
        TickRecord {
            t: F6(t),
            head: PoseRecord {
                position: f6v(world.camera_position()),
                rotation: f6r(world.avatar.rotation),
            },
            left: hand(Side::Left),
            right: hand(Side::Right),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub log_version: u32,
    pub task: TaskSpec,
    pub layout: u32,
    pub seed: u64,
    pub config_hash: String,
    pub catalog_hash: String,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub reason: OutcomeReason,
    pub t_end: F6,
    pub steps: u64,
    pub receipt: Option<Receipt>,
}

/// One recorded episode: header, 10 Hz ticks, the ordered state-changing
/// commands and the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
    pub commands: Vec<CommandEnvelope>,
    pub outcome: Option<Outcome>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(LogHeader),
    Tick(TickRecord),
    Command(CommandEnvelope),
    Outcome(Outcome),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a LogHeader),
    Tick(&'a TickRecord),
    Command(&'a CommandEnvelope),
    Outcome(&'a Outcome),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("cannot read log: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

impl EpisodeLog {
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let mut push = |l: LineRef<'_>| {
            let _ = writeln!(out, "{}", serde_json::to_string(&l).expect("log line serializes"));
        };
        push(LineRef::Header(&self.header));
        for t in &self.ticks {
            push(LineRef::Tick(t));
        }
        for c in &self.commands {
            push(LineRef::Command(c));
        }
        if let Some(o) = &self.outcome {
            push(LineRef::Outcome(o));
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<EpisodeLog, LogError> {
        let mut header = None;
        let mut ticks = Vec::new();
        let mut commands = Vec::new();
        let mut outcome = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| LogError::Corrupt { line: i + 1, reason };
            let line: Line = serde_json::from_str(raw).map_err(|e| corrupt(e.to_string()))?;
            match line {
                Line::Header(h) if i == 0 => header = Some(h),
                Line::Header(_) => return Err(corrupt("header must be the first line".into())),
                _ if header.is_none() => return Err(corrupt("missing header".into())),
                Line::Tick(t) => ticks.push(t),
                Line::Command(c) => commands.push(c),
                Line::Outcome(_) if outcome.is_some() => return Err(corrupt("second outcome".into())),
                Line::Outcome(o) => outcome = Some(o),
            }
        }
        let header = header.ok_or(LogError::Corrupt {
            line: 1,
            reason: "empty log".into(),
        })?;
        Ok(EpisodeLog {
            header,
            ticks,
            commands,
            outcome,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<EpisodeLog, LogError> {
        EpisodeLog::from_ndjson(&std::fs::read_to_string(path)?)
    }

    /// Short content hash used for file names.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_ndjson().as_bytes()))
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}-L{}-s{}-{}.ndjson",
            self.header.task.id,
            self.header.layout,
            self.header.seed,
            &self.digest()[..12]
        )
    }

    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir.as_ref())?;
        let path = dir.as_ref().join(self.file_name());
        std::fs::write(&path, self.to_ndjson())?;
        Ok(path)
    }

    pub fn t_end(&self) -> Option<f64> {
        self.outcome.as_ref().map(|o| o.t_end.0)
    }
}

/// Appends one tick per 0.1 s boundary in `(last logged, up_to]`.
pub fn log_tick(world: &WorldState, log: &mut EpisodeLog, up_to: f64) {
    loop {
        let k = log.ticks.len() as u64 + 1;
        let t = k as f64 * TICK_PERIOD;
        if t > up_to + 1e-9 {
            break;
        }
        log.ticks.push(TickRecord::capture(world, t));
    }
}

/// Live recorder for one task episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecorder {
    pub log: EpisodeLog,
}

impl EpisodeRecorder {
    pub fn new(task: TaskSpec, world: &WorldState, catalog_hash: &str) -> Self {
        EpisodeRecorder {
            log: EpisodeLog {
                header: LogHeader {
                    log_version: LOG_VERSION,
                    layout: world.layout.id,
                    seed: world.seed,
                    config_hash: world.config.hash(),
                    catalog_hash: catalog_hash.to_string(),
                    config: (*world.config).clone(),
                    task,
                },
                ticks: Vec::new(),
                commands: Vec::new(),
                outcome: None,
            },
        }
    }

    pub fn is_done(&self) -> bool {
        self.log.outcome.is_some()
    }

    pub fn task(&self) -> &TaskSpec {
        &self.log.header.task
    }

    /// Records a state-changing command that has just been applied, logs the
    /// ticks it crossed and grades the episode.
    pub fn after_command(&mut self, env: &CommandEnvelope, world: &WorldState) {
        if self.is_done() {
            return;
        }
        self.log.commands.push(env.clone());
        match evaluate(self.task(), world) {
            Verdict::Pending => log_tick(world, &mut self.log, world.time()),
            Verdict::Success { t } => self.finish(world, true, OutcomeReason::Goal, t),
            Verdict::Failure { t, reason } => self.finish(world, false, reason, t),
        }
    }

    /// Ends the episode without a verdict.
    pub fn abort(&mut self, world: &WorldState) {
        if !self.is_done() {
            self.finish(world, false, OutcomeReason::Aborted, world.time());
        }
    }

    fn finish(&mut self, world: &WorldState, success: bool, reason: OutcomeReason, t_end: f64) {
        log_tick(world, &mut self.log, t_end);
        self.log.outcome = Some(Outcome {
            success,
            reason,
            t_end: F6(t_end),
            steps: world.steps,
            receipt: world.receipt.clone(),
        });
    }

    pub fn status(&self) -> Value {
        let task = self.task();
        match &self.log.outcome {
            None => serde_json::json!({"id": task.id, "status": "running"}),
            Some(o) => serde_json::json!({
                "id": task.id,
                "status": if o.success { "success" } else { "failure" },
                "reason": o.reason,
                "t_end": o.t_end.0,
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("log was recorded with a different config (hash {0})")]
    ConfigMismatch(String),
    #[error("log was recorded with a different catalog (hash {0})")]
    CatalogMismatch(String),
    #[error("log has no commands")]
    Empty,
}

/// Re-runs a log's commands through a fresh engine and checks that every
/// regenerated line (ticks, commands, outcome) matches byte for byte.
pub fn replay_verify(log: &EpisodeLog, catalog: &Arc<Catalog>, layouts: &[Arc<Layout>]) -> Result<bool, ReplayError> {
    let regenerated = replay(log, catalog, layouts)?;
    Ok(regenerated.to_ndjson() == log.to_ndjson())
}

/// Regenerates an episode log from a log's header and commands.
pub fn replay(log: &EpisodeLog, catalog: &Arc<Catalog>, layouts: &[Arc<Layout>]) -> Result<EpisodeLog, ReplayError> {
    let config = log.header.config.clone();
    if config.hash() != log.header.config_hash {
        return Err(ReplayError::ConfigMismatch(log.header.config_hash.clone()));
    }
    if log.commands.is_empty() {
        return Err(ReplayError::Empty);
    }
    let mut engine = Engine::new(
        Arc::clone(catalog),
        layouts.to_vec(),
        Arc::new(config),
        log.header.layout,
        log.header.seed,
    )
    .map_err(|_| ReplayError::Empty)?;
    if engine.catalog_hash() != log.header.catalog_hash {
        return Err(ReplayError::CatalogMismatch(log.header.catalog_hash.clone()));
    }
    for c in &log.commands {
        engine.handle(c);
    }
    let aborted = log.outcome.as_ref().is_some_and(|o| o.reason == OutcomeReason::Aborted);
    if aborted {
        engine.abort_episode();
    }
    let mut logs = engine.take_finished();
    let mut current = engine.current_log().cloned();
    Ok(match (logs.len(), current.take()) {
        (0, Some(l)) => l,
        _ => logs.remove(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::tests::product;

    #[test]
    fn f6_formats_six_decimals() {
        let s = serde_json::to_string(&[F6(0.1), F6(-0.0), F6(1.0 / 3.0), F6(-2.5)]).unwrap();
        assert_eq!(s, "[0.100000,0.000000,0.333333,-2.500000]");
        let back: Vec<F6> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[0].0, 0.1);
    }

    #[test]
    fn match_is_conjunctive_and_case_insensitive() {
        let p = product("B1", Category::Biscuit, 100, 1.0);
        let m = ProductMatch {
            category: Some(Category::Biscuit),
            name_contains: Some("test".into()),
            ..Default::default()
        };
        assert!(m.matches(&p));
        let m2 = ProductMatch {
            category: Some(Category::Chips),
            ..m.clone()
        };
        assert!(!m2.matches(&p));
    }

    #[test]
    fn task_validation_rejects_empty_selectors() {
        let cat = Catalog::new(vec![product("B1", Category::Biscuit, 100, 1.0)]).unwrap();
        let mut t = TaskSpec {
            id: "t".into(),
            difficulty: Difficulty::Easy,
            layout: 1,
            seed: 0,
            instruction: String::new(),
            goal: Goal::Hold {
                target: ProductMatch {
                    category: Some(Category::Chips),
                    ..Default::default()
                },
            },
            time_limit_s: 300.0,
        };
        assert!(t.validate(&cat).is_err());
        t.goal = Goal::Hold {
            target: ProductMatch {
                sku: Some("B1".into()),
                ..Default::default()
            },
        };
        assert!(t.validate(&cat).is_ok());
        t.goal = Goal::AnswerScan {
            attribute: "sugar_g".into(),
            candidates: vec!["B1".into()],
        };
        assert!(t.validate(&cat).is_err());
    }

    #[test]
    fn goal_json_shape() {
        let g: Goal = serde_json::from_str(r#"{"type":"hold","match":{"category":"Chips"}}"#).unwrap();
        assert_eq!(
            g,
            Goal::Hold {
                target: ProductMatch {
                    category: Some(Category::Chips),
                    ..Default::default()
                }
            }
        );
        let g: Goal = serde_json::from_str(r#"{"type":"answer_scan","attribute":"sugar_g","candidates":["a","b"]}"#).unwrap();
        assert!(matches!(g, Goal::AnswerScan { .. }));
    }
}

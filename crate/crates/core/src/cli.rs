//! Command-line front ends shared by the `sari-sim` and `sari-agent` binaries.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agent::{AgentReport, LocalTransport, ScriptedAgent, WsTransport, DEFAULT_BUDGET};
use crate::bench::{load_tasks, reference_tasks, replay_verify, Difficulty, EpisodeLog, TaskSpec};
use crate::catalog::Catalog;
use crate::config::SimConfig;
use crate::engine::{Engine, LOG_DIR_ENV};
use crate::protocol::Role;
use crate::server::Server;
use crate::store::layout::{reference_layouts, Layout};

type CliResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Debug, Parser)]
#[command(name = "sari-sim", version, about = "Headless convenience-store simulator")]
pub struct SimCli {
    #[command(subcommand)]
    pub command: SimCommand,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Serve the JSON/WebSocket control protocol.
    Serve(ServeArgs),
    /// Run a task pack with the scripted agent, or wait for an external one.
    Bench(BenchArgs),
    /// Re-run an episode log and check it reproduces byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 1)]
    pub layout: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Product catalog JSON; the shipped catalog when omitted.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Simulator config JSON; defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Task pack that `Reset{task: "<id>"}` can refer to; the shipped pack when omitted.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Static files (e.g. a browser client) served over plain HTTP on the same port.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    Scripted,
    External,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AgentKind::Scripted)]
    pub agent: AgentKind,
    /// Episode log directory; `SARI_SIM_LOG_DIR` or `./episodes` when omitted.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Command budget per task for the scripted agent.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// Port for `--agent external`.
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "sari-agent", version, about = "Scripted agent client for a running sari-sim server")]
pub struct AgentCli {
    /// Server address, e.g. ws://127.0.0.1:8765
    #[arg(long)]
    pub url: String,
    /// Task file: a task pack or a single task object.
    #[arg(long)]
    pub task: PathBuf,
    /// Run only this task id from the file.
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
}

fn load_catalog(path: Option<&Path>) -> Result<Arc<Catalog>, Box<dyn std::error::Error>> {
    Ok(Arc::new(match path {
        Some(p) => Catalog::load(p)?,
        None => crate::reference_catalog(),
    }))
}

fn load_config(path: Option<&Path>) -> Result<Arc<SimConfig>, Box<dyn std::error::Error>> {
    Ok(Arc::new(match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    }))
}

fn layouts() -> Vec<Arc<Layout>> {
    reference_layouts().into_iter().map(Arc::new).collect()
}

fn task_pack(path: Option<&Path>) -> Result<Vec<TaskSpec>, Box<dyn std::error::Error>> {
    Ok(match path {
        Some(p) => read_task_file(p)?,
        None => reference_tasks(),
    })
}

/// Reads a task pack, or a file holding one bare task object.
pub fn read_task_file(path: &Path) -> Result<Vec<TaskSpec>, Box<dyn std::error::Error>> {
    match load_tasks(path) {
        Ok(t) => Ok(t),
        Err(pack_err) => {
            let text = std::fs::read_to_string(path)?;
            match serde_json::from_str::<TaskSpec>(&text) {
                Ok(t) => Ok(vec![t]),
                Err(_) => Err(pack_err.into()),
            }
        }
    }
}

fn log_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(LOG_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("episodes"))
}

pub fn sim_main() -> CliResult {
    init_logging();
    match SimCli::parse().command {
        SimCommand::Serve(a) => serve(a),
        SimCommand::Bench(a) => bench(a),
        SimCommand::Replay(a) => replay(a),
    }
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
}

pub fn serve(a: ServeArgs) -> CliResult {
    let catalog = load_catalog(a.catalog.as_deref())?;
    let config = load_config(a.config.as_deref())?;
    let tasks = task_pack(a.tasks.as_deref())?;
    let engine = Engine::new(catalog, layouts(), config, a.layout, a.seed)?
        .with_tasks(tasks)
        .with_log_dir_from_env();
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse()?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let server = Server::bind(addr, engine).await?.with_ui_dir(a.ui_dir);
        log::info!("listening on ws://{}", server.local_addr());
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await;
        Ok::<(), Box<dyn std::error::Error>>(())
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DifficultySummary {
    pub tasks: usize,
    pub successes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub reports: Vec<AgentReport>,
    pub by_difficulty: BTreeMap<String, DifficultySummary>,
}

pub fn summarize(tasks: &[TaskSpec], reports: Vec<AgentReport>) -> BenchSummary {
    let mut by_difficulty: BTreeMap<String, DifficultySummary> = BTreeMap::new();
    for (t, r) in tasks.iter().zip(&reports) {
        let key = match t.difficulty {
            Difficulty::Easy => "easy",
            Difficulty::Average => "average",
            Difficulty::Difficult => "difficult",
        };
        let s = by_difficulty.entry(key.to_string()).or_default();
        s.tasks += 1;
        s.successes += r.success as usize;
    }
    BenchSummary { reports, by_difficulty }
}

/// Runs every task with the in-process scripted agent.
pub fn run_scripted_bench(
    tasks: &[TaskSpec],
    catalog: Arc<Catalog>,
    config: Arc<SimConfig>,
    log_dir: Option<PathBuf>,
    budget: u64,
) -> Result<BenchSummary, Box<dyn std::error::Error>> {
    let first = tasks.first().map(|t| (t.layout, t.seed)).unwrap_or((1, 0));
    let layouts = layouts();
    let engine = Engine::new(Arc::clone(&catalog), layouts.clone(), config, first.0, first.1)?.with_log_dir(log_dir);
    let mut agent = ScriptedAgent::new(LocalTransport::new(engine), layouts, Some(catalog));
    let reports = tasks.iter().map(|t| agent.run_task(t, budget)).collect();
    Ok(summarize(tasks, reports))
}

fn print_summary(summary: &BenchSummary) {
    for r in &summary.reports {
        println!(
            "{:<10} {:<8} commands {:>5}  t_end {:>8}  {}",
            r.task,
            if r.success { "success" } else { "failure" },
            r.commands,
            r.t_end.map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into()),
            r.log.as_deref().unwrap_or(r.error.as_deref().unwrap_or(""))
        );
    }
    for (k, s) in &summary.by_difficulty {
        println!("{k:<10} {}/{}", s.successes, s.tasks);
    }
}

pub fn bench(a: BenchArgs) -> CliResult {
    let tasks = task_pack(a.tasks.as_deref())?;
    let catalog = load_catalog(a.catalog.as_deref())?;
    let config = load_config(a.config.as_deref())?;
    let dir = log_dir(a.log_dir);
    std::fs::create_dir_all(&dir)?;
    let summary = match a.agent {
        AgentKind::Scripted => run_scripted_bench(&tasks, catalog, config, Some(dir.clone()), a.budget)?,
        AgentKind::External => external_bench(&tasks, catalog, config, &dir, a.port)?,
    };
    print_summary(&summary);
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    println!("summary written to {}", path.display());
    Ok(())
}

fn finished_log(dir: &Path, task: &TaskSpec) -> Option<(PathBuf, EpisodeLog)> {
    let prefix = format!("{}-L{}-", task.id, task.layout);
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(&prefix)))
        .collect();
    names.sort();
    names
        .into_iter()
        .find_map(|p| EpisodeLog::load(&p).ok().filter(|l| l.outcome.is_some()).map(|l| (p, l)))
}

/// Serves the task pack and waits until an external client has finished an
/// episode of every task.
fn external_bench(
    tasks: &[TaskSpec],
    catalog: Arc<Catalog>,
    config: Arc<SimConfig>,
    dir: &Path,
    port: u16,
) -> Result<BenchSummary, Box<dyn std::error::Error>> {
    let first = tasks.first().map(|t| (t.layout, t.seed)).unwrap_or((1, 0));
    let engine = Engine::new(catalog, layouts(), config, first.0, first.1)?
        .with_tasks(tasks.iter().cloned())
        .with_log_dir(Some(dir.to_path_buf()));
    let handle = crate::server::ServerHandle::spawn(SocketAddr::from(([127, 0, 0, 1], port)), engine)?;
    println!("waiting for an external agent on {}; tasks:", handle.url());
    for t in tasks {
        println!("  {}  {}", t.id, t.instruction);
    }
    let mut done: BTreeMap<String, (PathBuf, EpisodeLog)> = BTreeMap::new();
    while done.len() < tasks.len() {
        for t in tasks {
            if !done.contains_key(&t.id) {
                if let Some(found) = finished_log(dir, t) {
                    println!("finished {}", t.id);
                    done.insert(t.id.clone(), found);
                }
            }
        }
        std::thread::sleep(Duration::from_millis(200));
    }
    handle.stop();
    let reports = tasks
        .iter()
        .map(|t| {
            let (path, log) = &done[&t.id];
            let o = log.outcome.as_ref().expect("finished");
            AgentReport {
                task: t.id.clone(),
                success: o.success,
                reason: serde_json::to_value(&o.reason).ok().and_then(|v| v.as_str().map(str::to_string)),
                commands: log.commands.len() as u64,
                t_end: Some(o.t_end.0),
                wall_s: 0.0,
                log: Some(path.display().to_string()),
                error: None,
            }
        })
        .collect();
    Ok(summarize(tasks, reports))
}

pub fn replay(a: ReplayArgs) -> CliResult {
    let catalog = load_catalog(a.catalog.as_deref())?;
    let log = EpisodeLog::load(&a.log)?;
    if replay_verify(&log, &catalog, &layouts())? {
        println!("OK {} ({} ticks, {} commands)", a.log.display(), log.ticks.len(), log.commands.len());
        Ok(())
    } else {
        Err(format!("MISMATCH {}: replay does not reproduce the log", a.log.display()).into())
    }
}

pub fn agent_main() -> CliResult {
    init_logging();
    let a = AgentCli::parse();
    let tasks: Vec<TaskSpec> = read_task_file(&a.task)?
        .into_iter()
        .filter(|t| a.id.as_ref().is_none_or(|id| *id == t.id))
        .collect();
    if tasks.is_empty() {
        return Err("no matching task in the task file".into());
    }
    let transport = WsTransport::connect(&a.url)?;
    let mut agent = ScriptedAgent::new(transport, layouts(), Some(Arc::new(crate::reference_catalog())));
    agent.client.session(Role::Controller)?;
    let mut failures = 0;
    for t in &tasks {
        let report = agent.run_task(t, a.budget);
        failures += (!report.success) as usize;
        println!("{}", serde_json::to_string(&report)?);
        if let Some(log) = &report.log {
            println!("{log}");
        }
    }
    let ScriptedAgent { client, .. } = agent;
    client.into_transport().close();
    if failures > 0 {
        return Err(format!("{failures} of {} tasks failed", tasks.len()).into());
    }
    Ok(())
}

//! Scripted protocol client.
//!
//! The agent solves benchmark tasks using only the public protocol: it reads
//! ground-truth observations ([`SemanticFrame`], [`EnvInfo`]) as perception
//! oracles and acts through the eight API functions. Behavior is split into
//! two modes. Navigation permits only [`ScriptedAgent::move_forward`] and the
//! pans; manipulation permits only [`ScriptedAgent::center_object_on_screen`],
//! [`ScriptedAgent::retrieve_item`] and the hand-only checkout actions. The
//! agent uses no randomness, so a task and seed always produce the same
//! command sequence.

pub mod memory;
pub mod transport;

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{Goal, ProductMatch, TaskSpec};
use crate::catalog::{Catalog, Category, Label};
use crate::checkout::Button;
use crate::geometry::{angle_between, deg_to_rad, normalize_deg, rad_to_deg, signed_deg, CameraModel, EulerRot, Vec3};
use crate::observe::{EnvInfo, FixtureEntry, FrameEntry, SemanticFrame};
use crate::protocol::{build, CommandEnvelope, ErrorCode, ResultEnvelope, Role};
use crate::store::layout::Layout;
use crate::world::Side;

pub use memory::{SemanticMemory, Standpoint};
pub use transport::{LocalTransport, Transport, WsTransport};

/// Forward step of `move_forward`, meters.
pub const STEP: f64 = 0.1;
/// Yaw increment of the pans, degrees.
pub const PAN_DEG: f64 = 2.5;
/// Pixel tolerance of `center_object_on_screen`.
pub const CENTER_TOL_PX: f64 = 5.0;
pub const CENTER_MAX_ITERS: usize = 40;
/// Pixel tolerance of `strafe_to_center`.
pub const STRAFE_TOL_PX: f64 = 10.0;
/// `retrieve_item` stops approaching at this estimated depth.
pub const APPROACH_DEPTH: f64 = 0.6;
/// A yaw within this many degrees of a multiple of 90 counts as cardinal.
pub const CARDINAL_TOL_DEG: f64 = 0.5;
/// The palm stops this far short of the target center along the view ray.
pub const PALM_STANDOFF: f64 = 0.06;
pub const GRIP_RETRIES: usize = 3;
pub const GRIP_ADJUST: f64 = 0.05;
/// Downward look used when searching a shelf.
pub const SEARCH_PITCH_DEG: f64 = 20.0;
/// Yaw step of the full-turn search.
pub const SWEEP_DEG: f64 = 30.0;
/// Rotate the held item when its barcode faces the scanner worse than this.
pub const BARCODE_ALIGN_DEG: f64 = 25.0;
/// Default command budget per task.
pub const DEFAULT_BUDGET: u64 = 5000;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("server rejected {function}: {code:?}: {message}")]
    Rejected { function: String, code: ErrorCode, message: String },
    #[error("{action} is not allowed in {mode:?} mode")]
    WrongMode { action: &'static str, mode: AgentMode },
    #[error("agent is not facing a cardinal direction (yaw {0:.2})")]
    NotCardinal(f64),
    #[error("target not found: {0}")]
    NotFound(String),
    #[error("grip failed after {0} attempts")]
    GraspFailed(usize),
    #[error("no route to {0}")]
    Unreachable(String),
    #[error("checkout step failed: {0}")]
    Checkout(String),
    #[error("command budget of {0} exhausted")]
    Budget(u64),
    #[error("unexpected reply: {0}")]
    Reply(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Navigation,
    Manipulation,
}

/// Protocol client with request ids, a command budget and the latest task
/// status seen in replies.
pub struct Client<T: Transport> {
    transport: T,
    next_id: i64,
    commands: u64,
    budget: u64,
    task_status: Option<Value>,
    /// Every command sent, in order.
    pub sent: Vec<CommandEnvelope>,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Client {
            transport,
            next_id: 1,
            commands: 0,
            budget: u64::MAX,
            task_status: None,
            sent: Vec::new(),
        }
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    pub fn transport_mut(&mut self) -> &mut T {
        &mut self.transport
    }

    pub fn commands(&self) -> u64 {
        self.commands
    }

    pub fn task_status(&self) -> Option<&Value> {
        self.task_status.as_ref()
    }

    fn next_id(&mut self) -> i64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Sends one command and returns its payload, or the server's error.
    pub fn call(&mut self, make: impl FnOnce(i64) -> CommandEnvelope) -> Result<Value, AgentError> {
        if self.commands >= self.budget {
            return Err(AgentError::Budget(self.budget));
        }
        let env = make(self.next_id());
        self.commands += 1;
        let reply: ResultEnvelope = self.transport.send(&env)?;
        self.sent.push(env.clone());
        if let Some(err) = reply.error {
            return Err(AgentError::Rejected {
                function: env.function,
                code: err.code,
                message: err.message,
            });
        }
        if let Some(task) = reply.payload.get("task").filter(|t| t.is_object()) {
            self.task_status = Some(task.clone());
        }
        Ok(reply.payload)
    }

    pub fn session(&mut self, role: Role) -> Result<Value, AgentError> {
        self.call(|id| build::session(id, role))
    }

    pub fn reset_task(&mut self, task: &TaskSpec) -> Result<Value, AgentError> {
        self.task_status = None;
        let inline = serde_json::to_value(task).expect("task serializes");
        self.call(|id| build::reset(id, task.layout, task.seed, Some(inline)))
    }

    pub fn frame(&mut self) -> Result<SemanticFrame, AgentError> {
        let v = self.call(|id| build::simple(id, "GetSemanticFrame"))?;
        serde_json::from_value(v).map_err(|e| AgentError::Reply(e.to_string()))
    }

    pub fn env(&mut self) -> Result<EnvInfo, AgentError> {
        let v = self.call(|id| build::simple(id, "GetEnvInfo"))?;
        serde_json::from_value(v).map_err(|e| AgentError::Reply(e.to_string()))
    }

    /// Returns the body position after the move.
    pub fn transform_agent(&mut self, t: Vec3, r: Vec3) -> Result<(Vec3, EulerRot), AgentError> {
        let v = self.call(|id| build::transform_agent(id, t, r))?;
        let pos = serde_json::from_value(v["position"].clone()).map_err(|e| AgentError::Reply(e.to_string()))?;
        let rot = serde_json::from_value(v["rotation"].clone()).map_err(|e| AgentError::Reply(e.to_string()))?;
        Ok((pos, rot))
    }

    pub fn move_hand(&mut self, side: Side, t: Vec3, r: Vec3) -> Result<Value, AgentError> {
        let (lt, lr, rt, rr) = match side {
            Side::Left => (t, r, Vec3::ZERO, Vec3::ZERO),
            Side::Right => (Vec3::ZERO, Vec3::ZERO, t, r),
        };
        self.call(|id| build::transform_hands(id, lt, lr, rt, rr))
    }

    pub fn toggle_grip(&mut self, side: Side) -> Result<Value, AgentError> {
        self.call(|id| build::toggle_grip(id, side))
    }

    pub fn toggle_poke(&mut self, side: Side) -> Result<Value, AgentError> {
        self.call(|id| build::toggle_poke(id, side))
    }
}

/// A product description resolved against what the camera reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub category: Option<Category>,
    pub sku: Option<String>,
    pub name_contains: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Fit {
    No,
    /// Category fits but the name is not legible yet.
    Maybe,
    Yes,
}

impl Target {
    pub fn from_match(m: &ProductMatch, catalog: Option<&Catalog>) -> Target {
        let category = m
            .category
            .or_else(|| m.sku.as_ref().and_then(|s| catalog?.by_sku(s).ok()).map(|p| p.category));
        Target {
            category,
            sku: m.sku.clone(),
            name_contains: m.name_contains.clone(),
        }
    }

    fn fit(&self, e: &FrameEntry) -> Fit {
        if self.category.is_some_and(|c| c != e.category) || self.sku.as_ref().is_some_and(|s| *s != e.sku) {
            return Fit::No;
        }
        match (&self.name_contains, &e.legible.name) {
            (None, _) => Fit::Yes,
            (Some(want), Some(name)) => {
                if name.to_lowercase().contains(&want.to_lowercase()) {
                    Fit::Yes
                } else {
                    Fit::No
                }
            }
            (Some(_), None) => Fit::Maybe,
        }
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(c) = self.category {
            parts.push(c.to_string());
        }
        if let Some(s) = &self.sku {
            parts.push(s.clone());
        }
        if let Some(n) = &self.name_contains {
            parts.push(format!("name~{n:?}"));
        }
        parts.join(" ")
    }
}

/// An item in hand together with what its label says.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldItem {
    pub side: Side,
    pub instance_id: u32,
    pub sku: String,
    pub name: Option<String>,
    pub label: Option<Label>,
}

/// Result of one task run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentReport {
    pub task: String,
    pub success: bool,
    pub reason: Option<String>,
    pub commands: u64,
    pub t_end: Option<f64>,
    pub wall_s: f64,
    pub log: Option<String>,
    pub error: Option<String>,
}

fn bbox_center(b: &[f64; 4]) -> (f64, f64) {
    ((b[1] + b[3]) / 2.0, (b[0] + b[2]) / 2.0)
}

fn camera_of(frame: &SemanticFrame) -> CameraModel {
    let c = &frame.camera;
    CameraModel::new(c.position, c.rotation, c.fov_y_deg, c.width, c.height)
}

/// World estimate of an entry's center from its pixel position and depth.
fn locate(frame: &SemanticFrame, e: &FrameEntry) -> Vec3 {
    let cam = camera_of(frame);
    let (u, v) = bbox_center(&e.bbox);
    let ray = cam.pixel_ray(u, v);
    ray.origin + ray.dir.scale(e.distance)
}

/// Expresses a world displacement in the camera frame, as `TransformHands` expects.
fn world_to_camera(rotation: EulerRot, d: Vec3) -> Vec3 {
    rotation.matrix().transpose().mul_vec(d)
}

fn cardinal_of(yaw: f64) -> f64 {
    normalize_deg((normalize_deg(yaw) / 90.0).round() * 90.0)
}

/// Bearing (yaw, degrees) from `from` toward `to` on the floor.
pub fn bearing(from: Vec3, to: Vec3) -> f64 {
    normalize_deg(rad_to_deg(libm::atan2(to.x - from.x, to.z - from.z)))
}

pub struct ScriptedAgent<T: Transport> {
    pub client: Client<T>,
    mode: AgentMode,
    layouts: Vec<Arc<Layout>>,
    catalog: Option<Arc<Catalog>>,
    memory: Option<SemanticMemory>,
    position: Vec3,
    rotation: EulerRot,
    /// Instances ruled out during the current search.
    excluded: Vec<u32>,
}

impl<T: Transport> ScriptedAgent<T> {
    /// `layouts` are the store maps the agent may be asked to work in; the
    /// catalog, when given, lets tasks that name only a sku find its aisle.
    pub fn new(transport: T, layouts: Vec<Arc<Layout>>, catalog: Option<Arc<Catalog>>) -> Self {
        ScriptedAgent {
            client: Client::new(transport),
            mode: AgentMode::Navigation,
            layouts,
            catalog,
            memory: None,
            position: Vec3::ZERO,
            rotation: EulerRot::default(),
            excluded: Vec::new(),
        }
    }

    pub fn mode(&self) -> AgentMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: AgentMode) {
        self.mode = mode;
    }

    pub fn memory(&self) -> Option<&SemanticMemory> {
        self.memory.as_ref()
    }

    fn require(&self, mode: AgentMode, action: &'static str) -> Result<(), AgentError> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(AgentError::WrongMode { action, mode: self.mode })
        }
    }

    /// Refreshes the cached body pose from the server.
    pub fn sync_pose(&mut self) -> Result<EnvInfo, AgentError> {
        let env = self.client.env()?;
        self.position = env.avatar.position;
        self.rotation = env.avatar.rotation;
        Ok(env)
    }

    fn turn(&mut self, t: Vec3, r: Vec3) -> Result<f64, AgentError> {
        let before = self.position;
        let (pos, rot) = self.client.transform_agent(t, r)?;
        self.position = pos;
        self.rotation = rot;
        Ok(pos.distance(before))
    }

    // ----- navigation primitives -------------------------------------------

    /// Steps 0.1 m forward; returns the displacement actually achieved.
    pub fn move_forward(&mut self) -> Result<f64, AgentError> {
        self.require(AgentMode::Navigation, "move_forward")?;
        self.turn(Vec3::new(0.0, 0.0, STEP), Vec3::ZERO)
    }

    pub fn pan_left(&mut self) -> Result<(), AgentError> {
        self.require(AgentMode::Navigation, "pan_left")?;
        self.turn(Vec3::ZERO, Vec3::new(0.0, -PAN_DEG, 0.0)).map(|_| ())
    }

    pub fn pan_right(&mut self) -> Result<(), AgentError> {
        self.require(AgentMode::Navigation, "pan_right")?;
        self.turn(Vec3::ZERO, Vec3::new(0.0, PAN_DEG, 0.0)).map(|_| ())
    }

    /// Pans until the yaw is within half a pan of `yaw`.
    pub fn face(&mut self, yaw: f64) -> Result<(), AgentError> {
        let err = signed_deg(yaw - self.rotation.yaw);
        let pans = (err.abs() / PAN_DEG).round() as usize;
        for _ in 0..pans {
            if err > 0.0 {
                self.pan_right()?;
            } else {
                self.pan_left()?;
            }
        }
        Ok(())
    }

    /// Follows waypoints with pans and forward steps.
    pub fn follow(&mut self, waypoints: &[Vec3]) -> Result<(), AgentError> {
        for &w in waypoints {
            let mut blocked = 0;
            for _ in 0..400 {
                let d = Vec3::new(w.x - self.position.x, 0.0, w.z - self.position.z).length();
                if d < STEP / 2.0 + 1e-6 {
                    break;
                }
                let b = bearing(self.position, w);
                let err = signed_deg(b - self.rotation.yaw);
                if d < 0.25 && err.abs() > 45.0 {
                    // Overshot or sidestepped a nearby corner; move on.
                    break;
                }
                if err.abs() > PAN_DEG / 2.0 {
                    self.face(b)?;
                    continue;
                }
                let moved = self.move_forward()?;
                if moved < STEP * 0.5 {
                    blocked += 1;
                    if blocked >= 3 {
                        return Err(AgentError::Unreachable(format!("waypoint ({:.2}, {:.2})", w.x, w.z)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Plans and walks to a standpoint, ending on its yaw.
    pub fn navigate_to(&mut self, goal: Standpoint) -> Result<(), AgentError> {
        self.require(AgentMode::Navigation, "navigate_to")?;
        let memory = self.memory.as_ref().expect("memory is loaded by run_task");
        let (_, route) = memory
            .plan(self.position, goal.position)
            .ok_or_else(|| AgentError::Unreachable(format!("({:.2}, {:.2})", goal.position.x, goal.position.z)))?;
        self.follow(&route)?;
        self.face(goal.yaw)
    }

    // ----- manipulation primitives -----------------------------------------

    fn pick<'f>(&self, frame: &'f SemanticFrame, target: &Target, lock: Option<u32>) -> Option<&'f FrameEntry> {
        let (w, h) = (frame.camera.width as f64, frame.camera.height as f64);
        if let Some(id) = lock {
            return frame.entries.iter().find(|e| e.instance_id == id && !e.held);
        }
        frame
            .entries
            .iter()
            .filter(|e| !e.held && !self.excluded.contains(&e.instance_id))
            .map(|e| (target.fit(e), e))
            .filter(|(f, _)| *f != Fit::No)
            .min_by(|(fa, a), (fb, b)| {
                let off = |e: &FrameEntry| {
                    let (u, v) = bbox_center(&e.bbox);
                    (u - w / 2.0).abs() + (v - h / 2.0).abs()
                };
                fb.cmp(fa)
                    .then(a.occluded_fraction.total_cmp(&b.occluded_fraction))
                    .then(off(a).total_cmp(&off(b)))
                    .then(a.instance_id.cmp(&b.instance_id))
            })
            .map(|(_, e)| e)
    }

    fn rotate_view(&mut self, pitch: f64, yaw: f64) -> Result<(), AgentError> {
        self.turn(Vec3::ZERO, Vec3::new(pitch, yaw, 0.0)).map(|_| ())
    }

    /// Finds the target (current view, then looking down, then a full turn)
    /// and rotates the view until its box center is within 5 px of the image
    /// center. Returns the centered entry.
    pub fn center_object_on_screen(&mut self, target: &Target) -> Result<FrameEntry, AgentError> {
        self.require(AgentMode::Manipulation, "center_object_on_screen")?;
        let mut frame = self.client.frame()?;
        let mut found = self.pick(&frame, target, None).map(|e| e.instance_id);
        if found.is_none() {
            let pitch = SEARCH_PITCH_DEG - self.rotation.signed_pitch();
            self.rotate_view(pitch, 0.0)?;
            frame = self.client.frame()?;
            found = self.pick(&frame, target, None).map(|e| e.instance_id);
        }
        let mut turned = 0.0;
        while found.is_none() && turned < 360.0 - 1e-9 {
            self.rotate_view(0.0, SWEEP_DEG)?;
            turned += SWEEP_DEG;
            frame = self.client.frame()?;
            found = self.pick(&frame, target, None).map(|e| e.instance_id);
        }
        let id = found.ok_or_else(|| AgentError::NotFound(target.describe()))?;
        self.center_on(id, frame)
    }

    fn center_on(&mut self, id: u32, mut frame: SemanticFrame) -> Result<FrameEntry, AgentError> {
        for _ in 0..CENTER_MAX_ITERS {
            let e = frame
                .entries
                .iter()
                .find(|e| e.instance_id == id)
                .cloned()
                .ok_or_else(|| AgentError::NotFound(format!("instance {id} left the view")))?;
            let (w, h, f) = (frame.camera.width as f64, frame.camera.height as f64, frame.camera.focal_px);
            let (cx, cy) = bbox_center(&e.bbox);
            let (dx, dy) = (cx - w / 2.0, cy - h / 2.0);
            if dx.abs() <= CENTER_TOL_PX && dy.abs() <= CENTER_TOL_PX {
                return Ok(e);
            }
            let yaw = rad_to_deg(libm::atan(dx / f));
            let pitch = rad_to_deg(libm::atan(dy / f));
            self.rotate_view(pitch, yaw)?;
            frame = self.client.frame()?;
        }
        Err(AgentError::NotFound(format!("instance {id} did not settle at the image center")))
    }

    /// Sidesteps until the target's box center is within 10 px horizontally.
    /// Requires a cardinal yaw.
    pub fn strafe_to_center(&mut self, id: u32) -> Result<FrameEntry, AgentError> {
        self.require(AgentMode::Manipulation, "strafe_to_center")?;
        let yaw = normalize_deg(self.rotation.yaw);
        if signed_deg(yaw - cardinal_of(yaw)).abs() > CARDINAL_TOL_DEG {
            return Err(AgentError::NotCardinal(yaw));
        }
        for _ in 0..4 {
            let frame = self.client.frame()?;
            let e = frame
                .entries
                .iter()
                .find(|e| e.instance_id == id)
                .cloned()
                .ok_or_else(|| AgentError::NotFound(format!("instance {id} left the view")))?;
            let (w, f) = (frame.camera.width as f64, frame.camera.focal_px);
            let dx = bbox_center(&e.bbox).0 - w / 2.0;
            if dx.abs() <= STRAFE_TOL_PX {
                return Ok(e);
            }
            let d = e.distance * dx / f;
            for s in strafe_steps(d) {
                self.turn(Vec3::new(s, 0.0, 0.0), Vec3::ZERO)?;
            }
        }
        let frame = self.client.frame()?;
        frame
            .entries
            .iter()
            .find(|e| e.instance_id == id)
            .cloned()
            .ok_or_else(|| AgentError::NotFound(format!("instance {id} left the view")))
    }

    /// Re-aims the pitch at the target and returns its entry.
    fn track_pitch(&mut self, id: u32) -> Result<(SemanticFrame, FrameEntry), AgentError> {
        let frame = self.client.frame()?;
        let e = frame
            .entries
            .iter()
            .find(|e| e.instance_id == id)
            .cloned()
            .ok_or_else(|| AgentError::NotFound(format!("instance {id} left the view")))?;
        let (h, f) = (frame.camera.height as f64, frame.camera.focal_px);
        let dy = bbox_center(&e.bbox).1 - h / 2.0;
        if dy.abs() > CENTER_TOL_PX {
            self.rotate_view(rad_to_deg(libm::atan(dy / f)), 0.0)?;
            let frame = self.client.frame()?;
            let e = frame
                .entries
                .iter()
                .find(|e| e.instance_id == id)
                .cloned()
                .ok_or_else(|| AgentError::NotFound(format!("instance {id} left the view")))?;
            return Ok((frame, e));
        }
        Ok((frame, e))
    }

    fn held_entry(&mut self, id: u32) -> Result<FrameEntry, AgentError> {
        let frame = self.client.frame()?;
        frame
            .held_items
            .into_iter()
            .find(|e| e.instance_id == id)
            .ok_or_else(|| AgentError::Reply(format!("instance {id} is not held")))
    }

    fn read_held(&mut self, side: Side, id: u32) -> Result<HeldItem, AgentError> {
        let e = self.held_entry(id)?;
        Ok(HeldItem {
            side,
            instance_id: id,
            sku: e.sku,
            name: e.legible.name,
            label: e.legible.full_label,
        })
    }

    /// Centers on the target, squares up to the shelf, approaches, reaches
    /// with `side` and grips. Returns the item and its label.
    pub fn retrieve_item(&mut self, target: &Target, side: Side) -> Result<HeldItem, AgentError> {
        self.require(AgentMode::Manipulation, "retrieve_item")?;
        let env = self.client.env()?;
        if let Some(id) = env.hand(side).held {
            let held = self.read_held(side, id)?;
            let e = self.held_entry(id)?;
            if target.fit(&e) == Fit::Yes {
                return Ok(held);
            }
        }
        // Settle on an instance whose name, once legible, still fits.
        let entry = loop {
            let e = self.center_object_on_screen(target)?;
            match target.fit(&e) {
                Fit::Yes => break e,
                _ => self.excluded.push(e.instance_id),
            }
        };
        let id = entry.instance_id;

        // Square up: snap to the nearest cardinal so strafes run along the shelf.
        let snap = signed_deg(cardinal_of(self.rotation.yaw) - self.rotation.yaw);
        if snap != 0.0 {
            self.rotate_view(0.0, snap)?;
        }
        self.track_pitch(id)?;
        self.strafe_to_center(id)?;

        // Approach with the target kept vertically centered.
        for _ in 0..40 {
            let (_, e) = self.track_pitch(id)?;
            if e.distance <= APPROACH_DEPTH {
                break;
            }
            let moved = self.turn(Vec3::new(0.0, 0.0, STEP), Vec3::ZERO)?;
            if moved < STEP * 0.9 {
                break;
            }
        }
        self.track_pitch(id)?;
        self.strafe_to_center(id)?;
        let (frame, e) = self.track_pitch(id)?;

        // Reach: stop the palm just short of the target center.
        let center = locate(&frame, &e);
        let eye = frame.camera.position;
        let ray = (center - eye).normalized().map_err(|e| AgentError::Reply(e.to_string()))?;
        let goal = center - ray.scale(PALM_STANDOFF);
        let env = self.client.env()?;
        let palm = env.hand(side).position;
        let rot = frame.camera.rotation;
        self.client.move_hand(side, world_to_camera(rot, goal - palm), Vec3::ZERO)?;

        let adjustments = [ray.scale(GRIP_ADJUST), Vec3::Y.scale(-GRIP_ADJUST), Vec3::Y.scale(GRIP_ADJUST)];
        for attempt in 0..=GRIP_RETRIES {
            let ev = self.client.toggle_grip(side)?;
            match ev.get("grabbed").and_then(Value::as_u64).map(|g| g as u32) {
                Some(g) if g == id => return self.read_held(side, id),
                Some(_) => {
                    // Wrong item: put it back down.
                    self.client.toggle_grip(side)?;
                }
                None => {
                    self.client.toggle_grip(side)?;
                }
            }
            if attempt < GRIP_RETRIES {
                self.client.move_hand(side, world_to_camera(rot, adjustments[attempt]), Vec3::ZERO)?;
            }
        }
        Err(AgentError::GraspFailed(GRIP_RETRIES + 1))
    }

    /// Pulls a hand back to a carrying pose below the camera.
    pub fn stow_hand(&mut self, side: Side) -> Result<(), AgentError> {
        let env = self.client.env()?;
        let x = match side {
            Side::Left => -0.2,
            Side::Right => 0.2,
        };
        let body = EulerRot::from_yaw(env.avatar.rotation.yaw);
        let goal = env.avatar.camera_position + body.matrix().mul_vec(Vec3::new(x, -0.4, 0.3));
        let d = goal - env.hand(side).position;
        self.client.move_hand(side, world_to_camera(env.avatar.rotation, d), Vec3::ZERO)?;
        Ok(())
    }

    /// Presses a checkout button with the fingertip of `side` (poke on).
    pub fn press_button(&mut self, side: Side, button: Button) -> Result<Value, AgentError> {
        self.require(AgentMode::Manipulation, "press_button")?;
        let frame = self.client.frame()?;
        let center = frame
            .fixtures
            .iter()
            .find_map(|f| match f {
                FixtureEntry::Button { button: b, center, .. } if *b == button => Some(*center),
                _ => None,
            })
            .ok_or_else(|| AgentError::Checkout(format!("{button:?} button not in view")))?;
        let normal = self
            .memory
            .as_ref()
            .map(|m| m.checkout.screen.normal)
            .expect("memory is loaded");
        let rot = frame.camera.rotation;
        let env = self.client.env()?;
        let hover = center + normal.scale(0.05);
        self.client.move_hand(side, world_to_camera(rot, hover - env.hand(side).fingertip), Vec3::ZERO)?;
        let reply = self.client.move_hand(side, world_to_camera(rot, normal.scale(-0.05)), Vec3::ZERO)?;
        self.client.move_hand(side, world_to_camera(rot, normal.scale(0.05)), Vec3::ZERO)?;
        let pressed = reply
            .get("presses")
            .and_then(Value::as_array)
            .is_some_and(|p| p.iter().any(|p| p["button"] == json!(button)));
        if !pressed {
            return Err(AgentError::Checkout(format!("{button:?} did not register")));
        }
        Ok(reply)
    }

    /// Holds the item's barcode into the scanner beam until it registers.
    pub fn present_barcode(&mut self, item: &HeldItem) -> Result<(), AgentError> {
        self.require(AgentMode::Manipulation, "present_barcode")?;
        let (origin, axis) = {
            let m = self.memory.as_ref().expect("memory is loaded");
            (m.checkout.scanner_origin, m.checkout.scanner_axis)
        };
        // Turn the item until its barcode faces the scanner.
        for _ in 0..3 {
            let e = self.held_entry(item.instance_id)?;
            let plane = e.barcode_plane.ok_or_else(|| AgentError::Reply("held item has no barcode plane".into()))?;
            let angle = angle_between(plane.normal, -axis).unwrap_or(180.0);
            if angle <= BARCODE_ALIGN_DEG {
                break;
            }
            let want = bearing(Vec3::ZERO, -axis);
            let have = bearing(Vec3::ZERO, plane.normal);
            self.client
                .move_hand(item.side, Vec3::ZERO, Vec3::new(0.0, signed_deg(want - have), 0.0))?;
        }
        for along in [0.15, 0.1, 0.22] {
            let e = self.held_entry(item.instance_id)?;
            let plane = e.barcode_plane.expect("held items carry a barcode plane");
            let goal = origin + axis.scale(along);
            let reply = self
                .client
                .move_hand(item.side, world_to_camera(self.rotation, goal - plane.center), Vec3::ZERO)?;
            if reply.get("scan").is_some() {
                // Take the item back out of the beam.
                self.client
                    .move_hand(item.side, world_to_camera(self.rotation, axis.scale(0.35)), Vec3::ZERO)?;
                return Ok(());
            }
        }
        Err(AgentError::Checkout("barcode did not register".into()))
    }

    /// START, scan, PAY at the checkout. Assumes the agent stands at the
    /// checkout standpoint.
    pub fn checkout(&mut self, item: &HeldItem) -> Result<(), AgentError> {
        self.require(AgentMode::Manipulation, "checkout")?;
        let poke = item.side.other();
        let target_pitch = SEARCH_PITCH_DEG - self.rotation.signed_pitch();
        self.rotate_view(target_pitch, 0.0)?;
        let env = self.client.env()?;
        if !env.hand(poke).poke {
            self.client.toggle_poke(poke)?;
        }
        self.press_button(poke, Button::Start)?;
        self.present_barcode(item)?;
        self.press_button(poke, Button::Pay)?;
        self.client.toggle_poke(poke)?;
        Ok(())
    }

    // ----- task level ------------------------------------------------------

    /// Builds the semantic memory for `layout` from the shipped layouts.
    pub fn load_memory(&mut self, layout: u32) -> Result<(), AgentError> {
        let l = self
            .layouts
            .iter()
            .find(|l| l.id == layout)
            .ok_or_else(|| AgentError::Unreachable(format!("unknown layout {layout}")))?;
        self.memory = Some(SemanticMemory::from_layout(l));
        Ok(())
    }

    /// Walks to each shelf that may hold the target, nearest first, until
    /// the item is in hand.
    pub fn fetch(&mut self, target: &Target, side: Side) -> Result<HeldItem, AgentError> {
        let memory = self.memory.clone().expect("memory is loaded");
        let mut shelves: Vec<(f64, Standpoint)> = match target.category {
            Some(c) => memory.shelves_for(c),
            None => memory.shelves.iter().collect(),
        }
        .into_iter()
        .filter_map(|s| memory.plan(self.position, s.standpoint.position).map(|(cost, _)| (cost, s.standpoint)))
        .collect();
        shelves.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut last = AgentError::NotFound(target.describe());
        for (_, stand) in shelves {
            self.mode = AgentMode::Navigation;
            self.navigate_to(stand)?;
            self.mode = AgentMode::Manipulation;
            self.excluded.clear();
            // Start every shelf search from the same downward look.
            let pitch = SEARCH_PITCH_DEG - self.rotation.signed_pitch();
            self.rotate_view(pitch, 0.0)?;
            match self.retrieve_item(target, side) {
                Ok(item) => {
                    self.stow_hand(side)?;
                    return Ok(item);
                }
                Err(e @ AgentError::NotFound(_)) => {
                    // Face the shelf again before walking on.
                    let back = signed_deg(stand.yaw - self.rotation.yaw);
                    self.rotate_view(-self.rotation.signed_pitch(), back)?;
                    last = e;
                }
                Err(e) => return Err(e),
            }
        }
        Err(last)
    }

    fn go_to_checkout(&mut self) -> Result<(), AgentError> {
        let stand = self.memory.as_ref().expect("memory is loaded").checkout_standpoint;
        self.mode = AgentMode::Navigation;
        self.navigate_to(stand)?;
        self.mode = AgentMode::Manipulation;
        Ok(())
    }

    fn done(&self) -> bool {
        self.client
            .task_status()
            .and_then(|s| s.get("status"))
            .is_some_and(|s| s != "running")
    }

    fn solve(&mut self, task: &TaskSpec) -> Result<(), AgentError> {
        let catalog = self.catalog.clone();
        match &task.goal {
            Goal::Hold { target } => {
                let t = Target::from_match(target, catalog.as_deref());
                self.fetch(&t, Side::Right)?;
            }
            Goal::Scanned { target } => {
                let t = Target::from_match(target, catalog.as_deref());
                let item = self.fetch(&t, Side::Right)?;
                self.go_to_checkout()?;
                self.checkout(&item)?;
            }
            Goal::AnswerScan { attribute, candidates } => {
                let mut items = Vec::new();
                for (sku, side) in candidates.iter().zip([Side::Right, Side::Left]) {
                    let m = ProductMatch {
                        sku: Some(sku.clone()),
                        category: None,
                        name_contains: None,
                    };
                    let t = Target::from_match(&m, catalog.as_deref());
                    items.push(self.fetch(&t, side)?);
                }
                let value = |h: &HeldItem| {
                    h.label
                        .as_ref()
                        .and_then(|l| l.nutrition.get(attribute).copied())
                        .unwrap_or(f64::INFINITY)
                };
                let best = items
                    .iter()
                    .min_by(|a, b| value(a).total_cmp(&value(b)))
                    .cloned()
                    .expect("two candidates");
                for h in &items {
                    if h.instance_id != best.instance_id {
                        // Put the losing candidate down.
                        self.client.toggle_grip(h.side)?;
                    }
                }
                self.go_to_checkout()?;
                self.checkout(&best)?;
            }
        }
        Ok(())
    }

    /// Resets the server into `task` and runs it to an outcome.
    pub fn run_task(&mut self, task: &TaskSpec, budget: u64) -> AgentReport {
        let start = Instant::now();
        let base = self.client.commands;
        self.client.budget = base.saturating_add(budget);
        let result = (|| {
            self.load_memory(task.layout)?;
            self.client.reset_task(task)?;
            self.mode = AgentMode::Navigation;
            self.excluded.clear();
            self.sync_pose()?;
            self.solve(task)
        })();
        // Nothing more to do: a finished plan that did not satisfy the task
        // is a failure, reported by the server once it hears of it.
        let error = result.err().map(|e| e.to_string());
        if !self.done() {
            // One status query so the report reflects the server's verdict.
            self.client.budget = u64::MAX;
            let _ = self.client.env().map(|env| {
                if let Some(t) = env.task {
                    self.client.task_status = Some(t);
                }
            });
        }
        let status = self.client.task_status().cloned().unwrap_or(Value::Null);
        self.client.budget = u64::MAX;
        AgentReport {
            task: task.id.clone(),
            success: status.get("status").is_some_and(|s| s == "success"),
            reason: status.get("reason").and_then(Value::as_str).map(str::to_string),
            commands: self.client.commands - base,
            t_end: status.get("t_end").and_then(Value::as_f64),
            wall_s: start.elapsed().as_secs_f64(),
            log: status.get("log").and_then(Value::as_str).map(str::to_string),
            error,
        }
    }
}

/// Split of a lateral offset into 0.1 m strafes, the last one remainder-sized.
pub fn strafe_steps(d: f64) -> Vec<f64> {
    if d.abs() < 1e-9 {
        return Vec::new();
    }
    let n = (d.abs() / STEP - 1e-9).ceil() as usize;
    let mut steps = vec![STEP.copysign(d); n];
    let rem = d.abs() - STEP * (n - 1) as f64;
    steps[n - 1] = rem.copysign(d);
    steps
}

/// Yaw delta of `center_object_on_screen` for a horizontal pixel offset.
pub fn yaw_correction(dx_px: f64, focal_px: f64) -> f64 {
    rad_to_deg(libm::atan(dx_px / focal_px))
}

/// Focal length in pixels for an image height and vertical field of view.
pub fn focal_px(height: u32, fov_y_deg: f64) -> f64 {
    (height as f64 / 2.0) / libm::tan(deg_to_rad(fov_y_deg) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Engine;

    fn agent(layout: u32) -> ScriptedAgent<LocalTransport> {
        let engine = Engine::reference(layout, 0).unwrap();
        let layouts = engine.layouts().to_vec();
        let catalog = Some(Arc::clone(engine.catalog()));
        let mut a = ScriptedAgent::new(LocalTransport::new(engine), layouts, catalog);
        a.load_memory(layout).unwrap();
        a.sync_pose().unwrap();
        a
    }

    #[test]
    fn strafe_split_matches_pinhole_example() {
        let d = 1.0 * 100.0 / focal_px(480, 60.0);
        let s = strafe_steps(d);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], 0.1);
        assert_eq!(s[1], 0.1);
        assert!((s[2] - 0.0406).abs() < 1e-3);
        assert!(strafe_steps(0.0).is_empty());
        assert_eq!(strafe_steps(-0.2), vec![-0.1, -0.1]);
    }

    #[test]
    fn move_forward_from_spawn_advances_one_step() {
        let mut a = agent(1);
        let z0 = a.position.z;
        for _ in 0..10 {
            a.move_forward().unwrap();
        }
        assert!((a.position.z - z0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pans_wrap_after_full_turn() {
        let mut a = agent(1);
        a.pan_right().unwrap();
        assert!((a.rotation.yaw - 2.5).abs() < 1e-9);
        a.pan_left().unwrap();
        for _ in 0..144 {
            a.pan_left().unwrap();
        }
        assert!(signed_deg(a.rotation.yaw).abs() < 1e-9);
    }

    #[test]
    fn mode_gating_rejects_cross_mode_actions() {
        let mut a = agent(1);
        let t = Target {
            category: Some(Category::Chips),
            sku: None,
            name_contains: None,
        };
        assert!(matches!(a.center_object_on_screen(&t), Err(AgentError::WrongMode { .. })));
        a.set_mode(AgentMode::Manipulation);
        assert!(matches!(a.pan_left(), Err(AgentError::WrongMode { .. })));
        assert!(matches!(a.move_forward(), Err(AgentError::WrongMode { .. })));
    }

    #[test]
    fn strafe_requires_cardinal_yaw() {
        let mut a = agent(1);
        a.pan_right().unwrap();
        a.set_mode(AgentMode::Manipulation);
        assert!(matches!(a.strafe_to_center(0), Err(AgentError::NotCardinal(_))));
    }

    #[test]
    fn absent_target_is_not_found_after_full_turn() {
        let mut a = agent(1);
        a.set_mode(AgentMode::Manipulation);
        let t = Target {
            category: None,
            sku: Some("NO-SUCH".into()),
            name_contains: None,
        };
        assert!(matches!(a.center_object_on_screen(&t), Err(AgentError::NotFound(_))));
    }
}

//! Static knowledge of a store layout: what each shelf holds, where to stand
//! to look at it, and collision-aware routes on a 0.1 m grid.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::catalog::Category;
use crate::checkout::CheckoutFixture;
use crate::geometry::{Aabb, Vec3};
use crate::store::layout::Layout;

/// Grid resolution of the planner, meters.
pub const GRID: f64 = 0.1;
/// Nodes closer than this to an obstacle or wall are impassable.
pub const HARD_CLEARANCE: f64 = 0.22;
/// Nodes closer than this cost extra, keeping routes mid-aisle.
pub const SOFT_CLEARANCE: f64 = 0.4;
/// Preferred standoff from a shelf front when scanning it.
pub const SHELF_STANDOFF: f64 = 1.4;
/// Distance from the checkout center to the customer's standing point.
pub const CHECKOUT_STANDOFF: f64 = 0.65;
const TURN_COST: f64 = 0.5;

/// Where to stand and which way to face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standpoint {
    pub position: Vec3,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShelfMemory {
    pub id: u32,
    pub label: String,
    pub categories: Vec<Category>,
    pub has_door: bool,
    pub standpoint: Standpoint,
    /// Route from the spawn point to the standpoint.
    pub route: Vec<Vec3>,
}

/// Read-only map of a layout, built once per episode.
#[derive(Debug, Clone)]
pub struct SemanticMemory {
    pub layout_id: u32,
    pub shelves: Vec<ShelfMemory>,
    pub checkout: CheckoutFixture,
    pub checkout_standpoint: Standpoint,
    grid: Grid,
}

#[derive(Debug, Clone)]
struct Grid {
    nx: usize,
    nz: usize,
    /// Per-node clearance to the nearest wall or obstacle.
    clearance: Vec<f64>,
}

fn xz_distance(p: Vec3, b: &Aabb) -> f64 {
    let dx = (b.min.x - p.x).max(0.0).max(p.x - b.max.x);
    let dz = (b.min.z - p.z).max(0.0).max(p.z - b.max.z);
    (dx * dx + dz * dz).sqrt()
}

impl Grid {
    fn build(layout: &Layout, obstacles: &[Aabb]) -> Grid {
        let nx = (layout.floor.width / GRID).round() as usize + 1;
        let nz = (layout.floor.depth / GRID).round() as usize + 1;
        let mut clearance = Vec::with_capacity(nx * nz);
        for k in 0..nz {
            for i in 0..nx {
                let p = Grid::point_of(i, k);
                let wall = p.x.min(p.z).min(layout.floor.width - p.x).min(layout.floor.depth - p.z);
                let c = obstacles.iter().map(|b| xz_distance(p, b)).fold(wall, f64::min);
                clearance.push(c);
            }
        }
        Grid { nx, nz, clearance }
    }

    fn point_of(i: usize, k: usize) -> Vec3 {
        Vec3::new(i as f64 * GRID, 0.0, k as f64 * GRID)
    }

    fn node_of(&self, p: Vec3) -> (usize, usize) {
        let i = (p.x / GRID).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let k = (p.z / GRID).round().clamp(0.0, (self.nz - 1) as f64) as usize;
        (i, k)
    }

    fn clearance_at(&self, i: usize, k: usize) -> f64 {
        self.clearance[k * self.nx + i]
    }

    fn passable(&self, i: usize, k: usize) -> bool {
        self.clearance_at(i, k) >= HARD_CLEARANCE
    }

    fn step_cost(&self, i: usize, k: usize) -> f64 {
        let c = self.clearance_at(i, k);
        GRID + if c < SOFT_CLEARANCE { (SOFT_CLEARANCE - c) * 2.0 } else { 0.0 }
    }

    /// Nearest passable node to `p`, searching outward ring by ring.
    fn nearest_passable(&self, p: Vec3) -> Option<(usize, usize)> {
        let (ci, ck) = self.node_of(p);
        let mut best: Option<(f64, (usize, usize))> = None;
        for r in 0..(self.nx.max(self.nz) as i64) {
            for dk in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dk.abs() != r {
                        continue;
                    }
                    let (i, k) = (ci as i64 + di, ck as i64 + dk);
                    if i < 0 || k < 0 || i >= self.nx as i64 || k >= self.nz as i64 {
                        continue;
                    }
                    let (i, k) = (i as usize, k as usize);
                    if self.passable(i, k) {
                        let d = Grid::point_of(i, k).distance(Vec3::new(p.x, 0.0, p.z));
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, (i, k)));
                        }
                    }
                }
            }
            if best.is_some() {
                return best.map(|(_, n)| n);
            }
        }
        None
    }

    /// Dijkstra over (node, heading) with a turn penalty. The start node may
    /// be impassable (the agent can stand closer to a shelf than the planner
    /// would route); every other node must be passable.
    fn route(&self, from: Vec3, to: Vec3) -> Option<(f64, Vec<(usize, usize)>)> {
        let start = self.node_of(from);
        let goal = self.nearest_passable(to)?;
        const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
        let idx = |i: usize, k: usize, d: usize| (k * self.nx + i) * 4 + d;
        let n = self.nx * self.nz * 4;
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        // Costs are stored as integer micrometers so the heap has a total order.
        let key = |c: f64| (c * 1e6).round() as u64;
        for d in 0..4 {
            dist[idx(start.0, start.1, d)] = 0.0;
            heap.push(Reverse((0u64, idx(start.0, start.1, d))));
        }
        let mut reached = None;
        while let Some(Reverse((c, s))) = heap.pop() {
            let cost = dist[s];
            if key(cost) != c {
                continue;
            }
            let d = s % 4;
            let node = s / 4;
            let (i, k) = (node % self.nx, node / self.nx);
            if (i, k) == goal {
                reached = Some(s);
                break;
            }
            for (nd, (di, dk)) in DIRS.iter().enumerate() {
                let (ni, nk) = (i as i64 + di, k as i64 + dk);
                if ni < 0 || nk < 0 || ni >= self.nx as i64 || nk >= self.nz as i64 {
                    continue;
                }
                let (ni, nk) = (ni as usize, nk as usize);
                if !self.passable(ni, nk) {
                    continue;
                }
                let turn = if nd == d { 0.0 } else { TURN_COST };
                let nc = cost + self.step_cost(ni, nk) + turn;
                let ns = idx(ni, nk, nd);
                if nc < dist[ns] {
                    dist[ns] = nc;
                    prev[ns] = s;
                    heap.push(Reverse((key(nc), ns)));
                }
            }
        }
        let end = reached?;
        let mut nodes = Vec::new();
        let mut s = end;
        loop {
            let node = s / 4;
            nodes.push((node % self.nx, node / self.nx));
            if prev[s] == usize::MAX {
                break;
            }
            s = prev[s];
        }
        nodes.reverse();
        nodes.dedup();
        Some((dist[end], nodes))
    }
}

/// Keeps only the nodes where the path changes direction, plus the goal.
fn corners(nodes: &[(usize, usize)]) -> Vec<Vec3> {
    let mut out = Vec::new();
    for w in 1..nodes.len() {
        let last = w + 1 == nodes.len();
        if last {
            out.push(Grid::point_of(nodes[w].0, nodes[w].1));
            break;
        }
        let (a, b, c) = (nodes[w - 1], nodes[w], nodes[w + 1]);
        let d1 = (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64);
        let d2 = (c.0 as i64 - b.0 as i64, c.1 as i64 - b.1 as i64);
        if d1 != d2 {
            out.push(Grid::point_of(b.0, b.1));
        }
    }
    out
}

impl SemanticMemory {
    pub fn from_layout(layout: &Layout) -> SemanticMemory {
        let checkout = CheckoutFixture::from_pose(layout.checkout);
        let mut obstacles: Vec<Aabb> = layout.shelves.iter().map(|s| s.footprint()).collect();
        obstacles.push(checkout.counter);
        let grid = Grid::build(layout, &obstacles);
        let spawn = layout.spawn.position;

        let standpoint_along = |origin: Vec3, normal: Vec3, yaw: f64, preferred: f64| {
            let mut d = preferred;
            let p = loop {
                let p = origin + normal.scale(d);
                let (i, k) = grid.node_of(p);
                if grid.clearance_at(i, k) >= SOFT_CLEARANCE - 0.1 || d <= 0.5 {
                    break p;
                }
                d -= GRID;
            };
            Standpoint {
                position: Vec3::new(p.x, 0.0, p.z),
                yaw: crate::geometry::normalize_deg(yaw + 180.0),
            }
        };

        let shelves = layout
            .shelves
            .iter()
            .map(|s| {
                let normal = s.front_normal();
                let front = s.pose.position + normal.scale(s.depth / 2.0);
                let standpoint = standpoint_along(front, normal, s.pose.yaw, SHELF_STANDOFF);
                let route = grid
                    .route(spawn, standpoint.position)
                    .map(|(_, nodes)| corners(&nodes))
                    .unwrap_or_default();
                ShelfMemory {
                    id: s.id,
                    label: s.label.clone(),
                    categories: s.allowed_categories.clone(),
                    has_door: s.door.is_some(),
                    standpoint,
                    route,
                }
            })
            .collect();
        let forward = checkout.scanner_axis;
        let checkout_standpoint = standpoint_along(checkout.pose.position, forward, checkout.pose.yaw, CHECKOUT_STANDOFF);
        SemanticMemory {
            layout_id: layout.id,
            shelves,
            checkout,
            checkout_standpoint,
            grid,
        }
    }

    /// Shelves admitting `category`, doorless ones first, in layout order.
    pub fn shelves_for(&self, category: Category) -> Vec<&ShelfMemory> {
        let mut v: Vec<&ShelfMemory> = self.shelves.iter().filter(|s| s.categories.contains(&category)).collect();
        v.sort_by_key(|s| s.has_door);
        v
    }

    /// Route cost and corner waypoints from `from` to `to`.
    pub fn plan(&self, from: Vec3, to: Vec3) -> Option<(f64, Vec<Vec3>)> {
        let (cost, nodes) = self.grid.route(from, to)?;
        let mut pts = corners(&nodes);
        if pts.is_empty() {
            pts.push(Grid::point_of(nodes[0].0, nodes[0].1));
        }
        Some((cost, pts))
    }

    /// Category index: shelf id per category, for quick lookups and display.
    pub fn index(&self) -> BTreeMap<Category, Vec<u32>> {
        let mut m: BTreeMap<Category, Vec<u32>> = BTreeMap::new();
        for s in &self.shelves {
            for c in &s.categories {
                m.entry(*c).or_default().push(s.id);
            }
        }
        m
    }
}

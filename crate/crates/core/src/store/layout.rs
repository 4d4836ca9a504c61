//! Store layouts: floor, shelves, checkout pose and spawn point.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Category;
use crate::geometry::{Aabb, Mat3, Vec3};

pub const LAYOUT_VERSION: u32 = 1;

/// Thickness of shelf boards and panels.
pub const BOARD: f64 = 0.02;
/// Gap between the shelf front edge and the front face of a product.
pub const FRONT_MARGIN: f64 = 0.02;

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("cannot read layout: {0}")]
    Io(#[from] std::io::Error),
    #[error("layout parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported layout_version {0}")]
    Version(u32),
    #[error("unknown layout id {0}")]
    UnknownLayout(u32),
    #[error("layout {layout}: {reason}")]
    Invalid { layout: u32, reason: String },
}

/// Floor-plane pose: position on the floor plus a facing yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn rotation(&self) -> Mat3 {
        Mat3::rot_y(self.yaw)
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        self.position + self.rotation().mul_vec(local)
    }

    /// World box of a local box; exact for cardinal yaws.
    pub fn local_box(&self, min: Vec3, max: Vec3) -> Aabb {
        let center = self.to_world((min + max).scale(0.5));
        Aabb::from_oriented(center, (max - min).scale(0.5), &self.rotation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoorState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shelf {
    pub id: u32,
    /// Footprint center on the floor; `yaw` is the direction the front faces.
    pub pose: Pose,
    pub rows: u32,
    pub slots_per_row: u32,
    pub slot_pitch: f64,
    #[serde(default = "default_depth")]
    pub depth: f64,
    /// Height of the lowest product surface.
    #[serde(default = "default_base_height")]
    pub base_height: f64,
    #[serde(default = "default_row_spacing")]
    pub row_spacing: f64,
    pub allowed_categories: Vec<Category>,
    pub label: String,
    /// Refrigerated units carry a door; `None` means open shelving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door: Option<DoorState>,
}

fn default_depth() -> f64 {
    0.4
}
fn default_base_height() -> f64 {
    0.45
}
fn default_row_spacing() -> f64 {
    0.35
}

impl Shelf {
    pub fn capacity(&self) -> usize {
        (self.rows * self.slots_per_row) as usize
    }

    pub fn length(&self) -> f64 {
        self.slots_per_row as f64 * self.slot_pitch
    }

    pub fn height(&self) -> f64 {
        self.base_height + self.rows as f64 * self.row_spacing
    }

    /// Top surface height of a row's board.
    pub fn row_surface(&self, row: u32) -> f64 {
        self.base_height + row as f64 * self.row_spacing
    }

    pub fn front_normal(&self) -> Vec3 {
        self.pose.rotation().mul_vec(Vec3::Z)
    }

    /// Footprint including side panels, full height.
    pub fn footprint(&self) -> Aabb {
        let hl = self.length() / 2.0 + BOARD;
        let hd = self.depth / 2.0;
        self.pose
            .local_box(Vec3::new(-hl, 0.0, -hd), Vec3::new(hl, self.height(), hd))
    }

    /// Point on the front edge of a slot's board, at the product's front face.
    fn slot_anchor_local(&self, row: u32, col: u32) -> Vec3 {
        let x = -self.length() / 2.0 + (col as f64 + 0.5) * self.slot_pitch;
        Vec3::new(x, self.row_surface(row), self.depth / 2.0 - FRONT_MARGIN)
    }

    /// Center of a product with half-extents `half` standing in a slot, facing out.
    pub fn slot_center(&self, row: u32, col: u32, half: Vec3) -> Vec3 {
        let a = self.slot_anchor_local(row, col);
        self.pose.to_world(Vec3::new(a.x, a.y + half.y, a.z - half.z))
    }

    /// Solid boards and panels: base block, one board per upper row, top, back, sides.
    pub fn boards(&self) -> Vec<Aabb> {
        let hl = self.length() / 2.0;
        let hd = self.depth / 2.0;
        let h = self.height();
        let mut out = vec![self
            .pose
            .local_box(Vec3::new(-hl, 0.0, -hd), Vec3::new(hl, self.base_height, hd))];
        for row in 1..self.rows {
            let top = self.row_surface(row);
            out.push(
                self.pose
                    .local_box(Vec3::new(-hl, top - BOARD, -hd), Vec3::new(hl, top, hd)),
            );
        }
        out.push(self.pose.local_box(Vec3::new(-hl, h - BOARD, -hd), Vec3::new(hl, h, hd)));
        out.push(
            self.pose
                .local_box(Vec3::new(-hl, 0.0, -hd), Vec3::new(hl, h, -hd + BOARD)),
        );
        out.push(
            self.pose
                .local_box(Vec3::new(-hl - BOARD, 0.0, -hd), Vec3::new(-hl, h, hd)),
        );
        out.push(
            self.pose
                .local_box(Vec3::new(hl, 0.0, -hd), Vec3::new(hl + BOARD, h, hd)),
        );
        out
    }

    /// Door rectangle in the front plane: center, in-plane axes and half sizes.
    pub fn door_rect(&self) -> (Vec3, Vec3, Vec3, f64, f64) {
        let hl = self.length() / 2.0;
        let h = self.height();
        let center = self
            .pose
            .to_world(Vec3::new(0.0, (self.base_height + h) / 2.0, self.depth / 2.0));
        let right = self.pose.rotation().mul_vec(Vec3::X);
        (center, right, Vec3::Y, hl, (h - self.base_height) / 2.0)
    }

    /// Overhead label anchor, just above the unit.
    pub fn label_anchor(&self) -> Aabb {
        let hl = self.length() / 2.0;
        let h = self.height();
        let hd = self.depth / 2.0;
        self.pose
            .local_box(Vec3::new(-hl * 0.6, h + 0.05, hd - 0.05), Vec3::new(hl * 0.6, h + 0.25, hd))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub width: f64,
    pub depth: f64,
}

impl Floor {
    pub fn contains_xz(&self, p: Vec3) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.z >= 0.0 && p.z <= self.depth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub id: u32,
    pub name: String,
    /// Rectangle `[0, width] x [0, depth]` in x/z.
    pub floor: Floor,
    pub shelves: Vec<Shelf>,
    pub checkout: Pose,
    pub spawn: Pose,
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    layout_version: u32,
    #[serde(flatten)]
    layout: Layout,
}

fn is_cardinal(yaw: f64) -> bool {
    let n = crate::geometry::normalize_deg(yaw);
    [0.0, 90.0, 180.0, 270.0].contains(&n)
}

impl Layout {
    pub fn load(path: impl AsRef<Path>) -> Result<Layout, LayoutError> {
        Layout::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Layout, LayoutError> {
        let file: LayoutFile = serde_json::from_str(text)?;
        if file.layout_version != LAYOUT_VERSION {
            return Err(LayoutError::Version(file.layout_version));
        }
        file.layout.validate()?;
        Ok(file.layout)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LayoutFile {
            layout_version: LAYOUT_VERSION,
            layout: self.clone(),
        })
        .expect("layout serializes")
    }

    pub fn shelf(&self, id: u32) -> Option<&Shelf> {
        self.shelves.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let invalid = |reason: String| LayoutError::Invalid {
            layout: self.id,
            reason,
        };
        if !(1..=3).contains(&self.id) {
            return Err(invalid(format!("id {} outside 1..=3", self.id)));
        }
        let floor_box = Aabb::new(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(self.floor.width, f64::INFINITY, self.floor.depth),
        );
        let inside = |b: &Aabb| {
            b.min.x >= floor_box.min.x - 1e-9
                && b.min.z >= floor_box.min.z - 1e-9
                && b.max.x <= floor_box.max.x + 1e-9
                && b.max.z <= floor_box.max.z + 1e-9
        };
        let mut ids = BTreeSet::new();
        for s in &self.shelves {
            if !ids.insert(s.id) {
                return Err(invalid(format!("duplicate shelf id {}", s.id)));
            }
            if s.rows == 0 || s.slots_per_row == 0 || s.slot_pitch <= 0.0 {
                return Err(invalid(format!("shelf {} has no slots", s.id)));
            }
            if s.allowed_categories.is_empty() {
                return Err(invalid(format!("shelf {} admits no category", s.id)));
            }
            if !is_cardinal(s.pose.yaw) {
                return Err(invalid(format!("shelf {} yaw {} is not cardinal", s.id, s.pose.yaw)));
            }
            if !inside(&s.footprint()) {
                return Err(invalid(format!("shelf {} leaves the floor", s.id)));
            }
        }
        if !is_cardinal(self.checkout.yaw) {
            return Err(invalid("checkout yaw is not cardinal".into()));
        }
        let counter = crate::checkout::CheckoutFixture::from_pose(self.checkout).counter;
        if !inside(&counter) {
            return Err(invalid("checkout leaves the floor".into()));
        }
        if !self.floor.contains_xz(self.spawn.position) {
            return Err(invalid("spawn outside the floor".into()));
        }
        Ok(())
    }
}

/// The three shipped layouts, embedded at build time.
pub fn reference_layouts() -> Vec<Layout> {
    [
        include_str!("../../data/layouts/layout1.json"),
        include_str!("../../data/layouts/layout2.json"),
        include_str!("../../data/layouts/layout3.json"),
    ]
    .iter()
    .map(|t| Layout::from_json(t).expect("shipped layout is valid"))
    .collect()
}

pub fn load_layout_dir(dir: impl AsRef<Path>) -> Result<Vec<Layout>, LayoutError> {
    (1..=3)
        .map(|i| Layout::load(dir.as_ref().join(format!("layout{i}.json"))))
        .collect()
}

//! Observations: semantic frames with legibility tiers, flat-shaded
//! screenshots and environment info.

use std::collections::BTreeMap;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{Category, Label};
use crate::checkout::{barcode_plane, BarcodePlane, Button, CartState, Receipt};
use crate::geometry::{angle_between, project_to_screen, visible_set, Aabb, CameraModel, EulerRot, Vec3, NEAR_PLANE};
use crate::store::layout::DoorState;
use crate::store::scene::FixtureKind;
use crate::world::{Grip, Side, WorldState};

/// Text fields an observer can currently read. Absent means not legible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Legible {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_tag: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiration: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_label: Option<Label>,
}

impl Legible {
    /// `full_label ⇒ expiration ⇒ name`, and price tags travel with names.
    pub fn tiers_consistent(&self) -> bool {
        (self.full_label.is_none() || self.expiration.is_some())
            && (self.expiration.is_none() || self.name.is_some())
            && (self.name.is_some() == self.price_tag.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub instance_id: u32,
    pub sku: String,
    pub category: Category,
    /// `[ymin, xmin, ymax, xmax]` in pixels, clipped to the image.
    pub bbox: [f64; 4],
    /// Eye to box center, meters.
    pub distance: f64,
    pub occluded_fraction: f64,
    pub held: bool,
    pub legible: Legible,
    /// Barcode detection plane; reported for held items only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barcode_plane: Option<BarcodePlane>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureEntry {
    ShelfLabel { shelf: u32, text: String, bbox: [f64; 4] },
    Button { button: Button, bbox: [f64; 4], center: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraInfo {
    pub position: Vec3,
    pub rotation: EulerRot,
    pub fov_y_deg: f64,
    pub width: u32,
    pub height: u32,
    pub focal_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticFrame {
    pub t: f64,
    pub camera: CameraInfo,
    /// Visible instances, sorted by id.
    pub entries: Vec<FrameEntry>,
    /// Items in the hands, whether or not they are in view. The avatar can
    /// always inspect what it holds, so these carry every legibility tier.
    pub held_items: Vec<FrameEntry>,
    pub fixtures: Vec<FixtureEntry>,
}

impl SemanticFrame {
    pub fn entry(&self, id: u32) -> Option<&FrameEntry> {
        self.entries.iter().find(|e| e.instance_id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Obj {
    Instance(u32),
    Fixture(usize),
}

fn instance_boxes(world: &WorldState) -> Vec<(Obj, Aabb)> {
    world
        .placements
        .iter()
        .map(|p| (Obj::Instance(p.instance_id), p.aabb))
        .chain(
            world
                .scene
                .fixtures
                .iter()
                .enumerate()
                .map(|(i, f)| (Obj::Fixture(i), f.aabb)),
        )
        .collect()
}

fn legible_for(world: &WorldState, id: u32, distance: f64, direction: Vec3, held: bool) -> Legible {
    let cfg = &world.config;
    let p = world.placement(id);
    let product = world.catalog.by_sku(&p.sku).expect("placed sku is in catalog");
    let angle = angle_between(world.camera().forward(), direction).unwrap_or(0.0);
    let name_tier = held || (distance <= cfg.legible_name_distance && angle <= cfg.legible_angle_deg);
    let expiration_tier = held || (name_tier && distance <= cfg.legible_expiration_distance);
    let tag_price = world
        .price_tags
        .iter()
        .find(|t| t.shelf == p.slot.shelf && t.row == p.slot.row && t.col == p.slot.col)
        .map(|t| t.price_cents)
        .unwrap_or(product.price_cents);
    Legible {
        name: name_tier.then(|| product.name.clone()),
        price_tag: name_tier.then_some(tag_price),
        expiration: if expiration_tier {
            Some(p.expiration.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default())
        } else {
            None
        },
        full_label: held.then(|| product.label.clone()),
    }
}

fn entry_for(world: &WorldState, id: u32, bbox: [f64; 4], distance: f64, occluded_fraction: f64) -> FrameEntry {
    let p = world.placement(id);
    let held = world.holder_of(id).is_some();
    let direction = p.center - world.camera_position();
    FrameEntry {
        instance_id: id,
        sku: p.sku.clone(),
        category: p.category,
        bbox,
        distance,
        occluded_fraction,
        held,
        legible: legible_for(world, id, distance, direction, held),
        barcode_plane: held.then(|| barcode_plane(p.center, &p.rotation, p.half_extents)),
    }
}

fn quad_bbox(cam: &CameraModel, corners: &[Vec3]) -> Option<[f64; 4]> {
    let mut pts = Vec::new();
    for c in corners {
        pts.push(project_to_screen(cam, *c)?);
    }
    let (w, h) = (cam.width as f64, cam.height as f64);
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).clamp(0.0, w);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).clamp(0.0, w);
    let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).clamp(0.0, h);
    let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).clamp(0.0, h);
    (xmax > xmin && ymax > ymin).then_some([ymin, xmin, ymax, xmax])
}

/// Structured ground-truth observation of the current view.
pub fn semantic_frame(world: &WorldState) -> SemanticFrame {
    let cam = world.camera();
    let visible = visible_set(&cam, &instance_boxes(world));
    let entries: Vec<FrameEntry> = visible
        .iter()
        .filter_map(|v| match v.id {
            Obj::Instance(id) => Some(entry_for(world, id, v.bbox, v.distance, v.occluded_fraction)),
            Obj::Fixture(_) => None,
        })
        .collect();

    let mut held_items = Vec::new();
    for side in Side::BOTH {
        if let Some(id) = world.hand(side).held {
            let p = world.placement(id);
            let bbox = cam.screen_bbox(&p.aabb).unwrap_or([0.0; 4]);
            let distance = world.camera_position().distance(p.aabb.center());
            held_items.push(entry_for(world, id, bbox, distance, 0.0));
        }
    }

    let mut fixtures = Vec::new();
    for shelf in &world.layout.shelves {
        let anchor = shelf.label_anchor();
        if cam.box_in_frustum(&anchor) {
            if let Some(bbox) = cam.screen_bbox(&anchor) {
                fixtures.push(FixtureEntry::ShelfLabel {
                    shelf: shelf.id,
                    text: shelf.label.clone(),
                    bbox,
                });
            }
        }
    }
    let checkout = &world.scene.checkout;
    let facing = checkout.screen.normal.dot(cam.position - checkout.screen.center) > 0.0;
    if facing {
        for (button, rect) in &checkout.buttons {
            let r = rect.0;
            let corners = [
                checkout.screen.point(r[0], r[1]),
                checkout.screen.point(r[2], r[1]),
                checkout.screen.point(r[2], r[3]),
                checkout.screen.point(r[0], r[3]),
            ];
            if let Some(bbox) = quad_bbox(&cam, &corners) {
                fixtures.push(FixtureEntry::Button {
                    button: *button,
                    bbox,
                    center: checkout.button_center(*button),
                });
            }
        }
    }

    SemanticFrame {
        t: world.time(),
        camera: CameraInfo {
            position: cam.position,
            rotation: cam.rotation,
            fov_y_deg: cam.fov_y_deg,
            width: cam.width,
            height: cam.height,
            focal_px: cam.focal_px(),
        },
        entries,
        held_items,
        fixtures,
    }
}

/// RGB8 frame buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screenshot {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

pub const BACKGROUND: [u8; 3] = [211, 211, 211];

impl Screenshot {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Pixels that differ from the background color.
    pub fn foreground_count(&self) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p != BACKGROUND).count()
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().expect("png header");
            writer.write_image_data(&self.pixels).expect("png data");
        }
        out
    }

    pub fn to_base64_png(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_png())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Screenshot, png::DecodingError> {
        let decoder = png::Decoder::new(bytes);
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0; reader.output_buffer_size()];
        let info = reader.next_frame(&mut buf)?;
        buf.truncate(info.buffer_size());
        Ok(Screenshot {
            width: info.width,
            height: info.height,
            pixels: buf,
        })
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|k| ((k + m) * 255.0).round() as u8)
}

/// Deterministic fill color of an instance: a hue derived from its category and sku.
pub fn instance_color(category: Category, sku: &str) -> [u8; 3] {
    let digest = Sha256::digest(format!("{category}:{sku}").as_bytes());
    let h = u16::from_be_bytes([digest[0], digest[1]]) as f64 / 65536.0 * 360.0;
    hsv_to_rgb(h, 0.65, 0.85)
}

fn fixture_color(kind: FixtureKind) -> [u8; 3] {
    match kind {
        FixtureKind::Shelf(_) => [139, 111, 78],
        FixtureKind::Counter => [96, 98, 110],
        FixtureKind::ScannerTower => [58, 58, 62],
        FixtureKind::Screen => [32, 44, 70],
    }
}

/// Flat shading factor per box face, indexed by face.
const FACE_SHADE: [f64; 6] = [0.78, 0.78, 0.6, 1.0, 0.9, 0.9];

/// Box faces as corner quads (corner order of [`Aabb::corners`]): -x, +x, -y, +y, -z, +z.
const FACES: [[usize; 4]; 6] = [
    [0, 2, 6, 4],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 1, 3, 2],
    [4, 5, 7, 6],
];

struct Raster {
    width: usize,
    height: usize,
    color: Vec<u8>,
    inv_depth: Vec<f64>,
}

impl Raster {
    fn new(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        let mut color = Vec::with_capacity(n * 3);
        for _ in 0..n {
            color.extend_from_slice(&BACKGROUND);
        }
        Raster {
            width: width as usize,
            height: height as usize,
            color,
            inv_depth: vec![0.0; n],
        }
    }

    /// Rasterizes a camera-space triangle already clipped to the near plane.
    fn triangle(&mut self, cam: &CameraModel, tri: [Vec3; 3], rgb: [u8; 3]) {
        let p = tri.map(|c| {
            let (u, v) = cam.project_camera_space(c);
            (u, v, 1.0 / c.z)
        });
        let area = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
        if area.abs() < 1e-12 {
            return;
        }
        let xmin = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let xmax = (p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).clamp(0, self.width as i64) as usize;
        let ymin = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let ymax = (p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).ceil() as i64).clamp(0, self.height as i64) as usize;
        for y in ymin..ymax {
            let py = y as f64 + 0.5;
            for x in xmin..xmax {
                let px = x as f64 + 0.5;
                let w0 = ((p[1].0 - px) * (p[2].1 - py) - (p[2].0 - px) * (p[1].1 - py)) / area;
                let w1 = ((p[2].0 - px) * (p[0].1 - py) - (p[0].0 - px) * (p[2].1 - py)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 * p[0].2 + w1 * p[1].2 + w2 * p[2].2;
                let i = y * self.width + x;
                if inv_z > self.inv_depth[i] {
                    self.inv_depth[i] = inv_z;
                    self.color[i * 3..i * 3 + 3].copy_from_slice(&rgb);
                }
            }
        }
    }

    fn polygon(&mut self, cam: &CameraModel, poly: &[Vec3], rgb: [u8; 3]) {
        let clipped = clip_near(poly);
        for k in 1..clipped.len().saturating_sub(1) {
            self.triangle(cam, [clipped[0], clipped[k], clipped[k + 1]], rgb);
        }
    }

    fn aabb(&mut self, cam: &CameraModel, b: &Aabb, rgb: [u8; 3]) {
        if !cam.box_in_frustum(b) {
            return;
        }
        let corners = b.corners().map(|c| cam.to_camera(c));
        for (face, shade) in FACES.iter().zip(FACE_SHADE) {
            let quad: Vec<Vec3> = face.iter().map(|&i| corners[i]).collect();
            let shaded = rgb.map(|c| (c as f64 * shade).round() as u8);
            self.polygon(cam, &quad, shaded);
        }
    }
}

/// Sutherland–Hodgman clip of a camera-space polygon against `z >= NEAR_PLANE`.
fn clip_near(poly: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            out.push(a + (b - a).scale(s));
        }
    }
    out
}

/// Z-buffered flat-shaded render of every instance and fixture box.
pub fn render_screenshot(world: &WorldState) -> Screenshot {
    let cam = world.camera();
    let mut r = Raster::new(cam.width, cam.height);
    for f in &world.scene.fixtures {
        r.aabb(&cam, &f.aabb, fixture_color(f.kind));
    }
    for p in &world.placements {
        r.aabb(&cam, &p.aabb, instance_color(p.category, &p.sku));
    }
    Screenshot {
        width: cam.width,
        height: cam.height,
        pixels: r.color,
    }
}

/// Renders arbitrary boxes with one color each; exposed for tests and tools.
pub fn render_boxes(cam: &CameraModel, boxes: &[(Aabb, [u8; 3])]) -> Screenshot {
    let mut r = Raster::new(cam.width, cam.height);
    for (b, c) in boxes {
        r.aabb(cam, b, *c);
    }
    Screenshot {
        width: cam.width,
        height: cam.height,
        pixels: r.color,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarInfo {
    pub position: Vec3,
    pub rotation: EulerRot,
    pub camera_position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandInfo {
    pub side: Side,
    pub position: Vec3,
    /// World rotation of the palm.
    pub rotation: EulerRot,
    pub grip: Grip,
    pub poke: bool,
    pub held: Option<u32>,
    pub hovered: Option<u32>,
    pub fingertip: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvInfo {
    pub t: f64,
    pub steps: u64,
    pub layout: u32,
    pub seed: u64,
    pub avatar: AvatarInfo,
    pub hands: [HandInfo; 2],
    pub cart: CartState,
    pub receipt: Option<Receipt>,
    pub doors: BTreeMap<u32, DoorState>,
    /// Status of the active task episode, filled in by the engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<serde_json::Value>,
}

impl EnvInfo {
    pub fn hand(&self, side: Side) -> &HandInfo {
        &self.hands[side.index()]
    }
}

pub fn env_info(world: &WorldState) -> EnvInfo {
    let hand = |side: Side| {
        let h = world.hand(side);
        HandInfo {
            side,
            position: world.hand_position(side),
            rotation: world.hand_rotation(side),
            grip: h.grip,
            poke: h.poke,
            held: h.held,
            hovered: h.hovered,
            fingertip: world.fingertip(side),
        }
    };
    EnvInfo {
        t: world.time(),
        steps: world.steps,
        layout: world.layout.id,
        seed: world.seed,
        avatar: AvatarInfo {
            position: world.avatar.position,
            rotation: world.avatar.rotation,
            camera_position: world.camera_position(),
        },
        hands: [hand(Side::Left), hand(Side::Right)],
        cart: world.cart.clone(),
        receipt: world.receipt.clone(),
        doors: world.doors.clone(),
        task: None,
    }
}

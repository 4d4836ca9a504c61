//! Self-checkout: touchscreen buttons, cart state machine, barcode scanning.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::geometry::{angle_between, Aabb, Mat3, Vec3};
use crate::store::layout::Pose;
use crate::world::{Side, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Button {
    Start,
    Pay,
    RemoveLast,
}

impl Button {
    pub const ALL: [Button; 3] = [Button::Start, Button::Pay, Button::RemoveLast];
}

/// Axis-aligned rectangle in screen-local meters: `[umin, vmin, umax, vmax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect(pub [f64; 4]);

impl Rect {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.0[0] && u <= self.0[2] && v >= self.0[1] && v <= self.0[3]
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.0[0] + self.0[2]) / 2.0, (self.0[1] + self.0[3]) / 2.0)
    }
}

/// An oriented rectangle in world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub center: Vec3,
    pub normal: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub half_u: f64,
    pub half_v: f64,
}

impl Panel {
    /// In-plane coordinates and signed offset along the normal.
    pub fn local(&self, p: Vec3) -> (f64, f64, f64) {
        let d = p - self.center;
        (d.dot(self.u_axis), d.dot(self.v_axis), d.dot(self.normal))
    }

    pub fn point(&self, u: f64, v: f64) -> Vec3 {
        self.center + self.u_axis.scale(u) + self.v_axis.scale(v)
    }

    /// Distance along the ray to the rectangle, if it is hit from either side.
    pub fn ray_hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let denom = dir.dot(self.normal);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = (self.center - origin).dot(self.normal) / denom;
        if t < 0.0 {
            return None;
        }
        let (u, v, _) = self.local(origin + dir.scale(t));
        (u.abs() <= self.half_u + 1e-12 && v.abs() <= self.half_v + 1e-12).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckoutFixture {
    pub pose: Pose,
    pub counter: Aabb,
    pub tower: Aabb,
    pub screen_box: Aabb,
    pub screen: Panel,
    pub buttons: Vec<(Button, Rect)>,
    pub scanner_origin: Vec3,
    pub scanner_axis: Vec3,
}

impl CheckoutFixture {
    /// Builds the fixture from its floor pose. The pose yaw points toward the
    /// customer side.
    pub fn from_pose(pose: Pose) -> Self {
        let rot = pose.rotation();
        let forward = rot.mul_vec(Vec3::Z);
        let right = rot.mul_vec(Vec3::X);
        let screen = Panel {
            center: pose.to_world(Vec3::new(-0.25, 1.3, -0.1)),
            normal: forward,
            // The customer faces -forward, so their right is -right.
            u_axis: -right,
            v_axis: Vec3::Y,
            half_u: 0.2,
            half_v: 0.15,
        };
        CheckoutFixture {
            pose,
            counter: pose.local_box(Vec3::new(-0.5, 0.0, -0.3), Vec3::new(0.5, 0.9, 0.3)),
            tower: pose.local_box(Vec3::new(0.05, 0.9, -0.3), Vec3::new(0.35, 1.2, -0.15)),
            screen_box: pose.local_box(Vec3::new(-0.45, 0.9, -0.14), Vec3::new(-0.05, 1.45, -0.1)),
            screen,
            buttons: vec![
                (Button::Start, Rect([-0.17, -0.12, -0.03, -0.03])),
                (Button::Pay, Rect([0.03, -0.12, 0.17, -0.03])),
                (Button::RemoveLast, Rect([-0.07, 0.02, 0.07, 0.11])),
            ],
            scanner_origin: pose.to_world(Vec3::new(0.2, 1.05, -0.15)),
            scanner_axis: forward,
        }
    }

    pub fn button_rect(&self, b: Button) -> Rect {
        self.buttons
            .iter()
            .find(|(x, _)| *x == b)
            .map(|(_, r)| *r)
            .expect("all buttons present")
    }

    /// World position of a button's center on the screen plane.
    pub fn button_center(&self, b: Button) -> Vec3 {
        let (u, v) = self.button_rect(b).center();
        self.screen.point(u, v)
    }

    /// Button under a fingertip within `touch_distance` of the screen plane.
    pub fn button_at(&self, fingertip: Vec3, touch_distance: f64) -> Option<Button> {
        let (u, v, n) = self.screen.local(fingertip);
        if n.abs() > touch_distance {
            return None;
        }
        self.buttons
            .iter()
            .find(|(_, r)| r.contains(u, v))
            .map(|(b, _)| *b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Idle,
    Active,
    Paid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartLine {
    pub sku: String,
    pub price_cents: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartState {
    pub phase: Phase,
    pub lines: Vec<CartLine>,
    pub total_cents: i64,
}

impl Default for CartState {
    fn default() -> Self {
        CartState {
            phase: Phase::Idle,
            lines: Vec::new(),
            total_cents: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub lines: Vec<CartLine>,
    pub total_cents: i64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressResult {
    Started,
    Removed { sku: String },
    Paid,
    /// Press in a phase where the button does nothing.
    Ignored { warning: String },
}

impl CartState {
    fn recompute(&mut self) {
        self.total_cents = self.lines.iter().map(|l| l.price_cents).sum();
    }

    pub fn press(&mut self, button: Button) -> PressResult {
        match (button, self.phase) {
            (Button::Start, Phase::Idle) => {
                self.phase = Phase::Active;
                PressResult::Started
            }
            (Button::RemoveLast, Phase::Active) if !self.lines.is_empty() => {
                let line = self.lines.pop().expect("nonempty");
                self.recompute();
                PressResult::Removed { sku: line.sku }
            }
            (Button::Pay, Phase::Active) if !self.lines.is_empty() => {
                self.phase = Phase::Paid;
                PressResult::Paid
            }
            (b, p) => PressResult::Ignored {
                warning: format!("{b:?} has no effect in phase {p:?} with {} line(s)", self.lines.len()),
            },
        }
    }

    pub fn append(&mut self, sku: String, price_cents: i64) {
        debug_assert_eq!(self.phase, Phase::Active);
        self.lines.push(CartLine { sku, price_cents });
        self.recompute();
    }
}

/// Thin rectangle floating just in front of a product's barcode face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarcodePlane {
    pub center: Vec3,
    pub normal: Vec3,
    pub half_extents: [f64; 2],
}

/// Gap between the barcode face and its detection plane.
pub const BARCODE_PLANE_OFFSET: f64 = 0.005;

/// The barcode sits on the product's local back face (-Z).
pub fn barcode_plane(center: Vec3, rotation: &Mat3, half: Vec3) -> BarcodePlane {
    let normal = rotation.mul_vec(-Vec3::Z);
    BarcodePlane {
        center: center + normal.scale(half.z + BARCODE_PLANE_OFFSET),
        normal,
        half_extents: [half.x.min(0.03), half.y.min(0.02)],
    }
}

impl BarcodePlane {
    fn panel(&self, rotation: &Mat3) -> Panel {
        Panel {
            center: self.center,
            normal: self.normal,
            u_axis: rotation.mul_vec(Vec3::X),
            v_axis: rotation.mul_vec(Vec3::Y),
            half_u: self.half_extents[0],
            half_v: self.half_extents[1],
        }
    }
}

/// Tolerance on the inclusive scan-angle bound, in degrees.
pub const SCAN_ANGLE_EPS_DEG: f64 = 1e-9;

/// Scanner test for one plane: hit distance along the beam when the beam
/// meets the plane within range and the plane faces the scanner closely enough.
pub fn scan_registers(
    fixture: &CheckoutFixture,
    plane: &BarcodePlane,
    rotation: &Mat3,
    cfg: &SimConfig,
) -> Option<f64> {
    let t = plane
        .panel(rotation)
        .ray_hit(fixture.scanner_origin, fixture.scanner_axis)?;
    if t > cfg.scan_max_distance {
        return None;
    }
    let angle = angle_between(plane.normal, -fixture.scanner_axis).ok()?;
    // The bound is inclusive; absorb rounding from composing rotations so an
    // exact 30 deg pose is not rejected at 30.000000000004.
    (angle <= cfg.scan_max_angle_deg + SCAN_ANGLE_EPS_DEG).then_some(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEvent {
    pub instance_id: u32,
    pub sku: String,
    pub price_cents: i64,
}

/// Evaluates the scanner beam against held items and appends a cart line on
/// a fresh registration. A registered instance must leave the beam before it
/// can register again.
pub fn scan_attempt(world: &mut WorldState) -> Option<ScanEvent> {
    let fixture = &world.scene.checkout;
    let mut hit: Option<(f64, u32)> = None;
    for side in Side::BOTH {
        let Some(id) = world.hand(side).held else {
            continue;
        };
        let p = world.placement(id);
        let plane = barcode_plane(p.center, &p.rotation, p.half_extents);
        if let Some(t) = scan_registers(fixture, &plane, &p.rotation, &world.config) {
            if hit.is_none_or(|(bt, bid)| t < bt || (t == bt && id < bid)) {
                hit = Some((t, id));
            }
        }
    }
    let Some((_, id)) = hit else {
        world.scan_beam = None;
        return None;
    };
    if world.cart.phase != Phase::Active || world.scan_beam == Some(id) {
        world.scan_beam = Some(id);
        return None;
    }
    world.scan_beam = Some(id);
    let sku = world.placement(id).sku.clone();
    let price = world
        .catalog
        .by_sku(&sku)
        .expect("placed sku is in catalog")
        .price_cents;
    world.cart.append(sku.clone(), price);
    Some(ScanEvent {
        instance_id: id,
        sku,
        price_cents: price,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressEvent {
    pub side: Side,
    pub button: Button,
    pub result: PressResult,
}

/// Applies a fingertip touch. Fires only on entering a button region.
pub fn touch_button(world: &mut WorldState, side: Side, fingertip: Vec3) -> Option<PressEvent> {
    let over = world
        .scene
        .checkout
        .button_at(fingertip, world.config.touch_distance);
    let was = world.button_contact[side.index()];
    world.button_contact[side.index()] = over;
    let button = over?;
    if was == Some(button) {
        return None;
    }
    let result = world.cart.press(button);
    if result == PressResult::Paid {
        world.receipt = Some(Receipt {
            lines: world.cart.lines.clone(),
            total_cents: world.cart.total_cents,
            t: world.time(),
        });
    }
    Some(PressEvent { side, button, result })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("no receipt: checkout is in phase {0:?}")]
pub struct WrongPhase(pub Phase);

pub fn receipt(world: &WorldState) -> Result<Receipt, WrongPhase> {
    match (&world.receipt, world.cart.phase) {
        (Some(r), Phase::Paid) => Ok(r.clone()),
        (_, p) => Err(WrongPhase(p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> CheckoutFixture {
        CheckoutFixture::from_pose(Pose {
            position: Vec3::new(3.0, 0.0, 3.0),
            yaw: 270.0,
        })
    }

    #[test]
    fn buttons_are_disjoint_and_on_screen() {
        let f = fixture();
        for (i, (_, a)) in f.buttons.iter().enumerate() {
            assert!(a.0[0] >= -f.screen.half_u && a.0[2] <= f.screen.half_u);
            assert!(a.0[1] >= -f.screen.half_v && a.0[3] <= f.screen.half_v);
            for (_, b) in &f.buttons[i + 1..] {
                let overlap = a.0[0] < b.0[2] && b.0[0] < a.0[2] && a.0[1] < b.0[3] && b.0[1] < a.0[3];
                assert!(!overlap);
            }
        }
    }

    #[test]
    fn button_lookup_respects_touch_distance() {
        let f = fixture();
        let c = f.button_center(Button::Pay);
        assert_eq!(f.button_at(c, 0.02), Some(Button::Pay));
        assert_eq!(f.button_at(c + f.screen.normal.scale(0.019), 0.02), Some(Button::Pay));
        assert_eq!(f.button_at(c + f.screen.normal.scale(0.03), 0.02), None);
    }

    #[test]
    fn cart_transitions() {
        let mut cart = CartState::default();
        assert!(matches!(cart.press(Button::Pay), PressResult::Ignored { .. }));
        assert_eq!(cart.press(Button::Start), PressResult::Started);
        assert_eq!(cart.phase, Phase::Active);
        assert!(matches!(cart.press(Button::Pay), PressResult::Ignored { .. }));
        cart.append("a".into(), 150);
        cart.append("b".into(), 200);
        assert_eq!(cart.total_cents, 350);
        assert_eq!(cart.press(Button::RemoveLast), PressResult::Removed { sku: "b".into() });
        assert_eq!(cart.lines, vec![CartLine { sku: "a".into(), price_cents: 150 }]);
        assert_eq!(cart.total_cents, 150);
        assert_eq!(cart.press(Button::Pay), PressResult::Paid);
        assert!(matches!(cart.press(Button::Start), PressResult::Ignored { .. }));
        assert_eq!(cart.phase, Phase::Paid);
    }

    #[test]
    fn head_on_plane_registers_and_far_plane_does_not() {
        let f = fixture();
        let cfg = SimConfig::default();
        // Barcode normal must face back along the beam.
        let rot = Mat3::rot_y(f.pose.yaw);
        let half = Vec3::new(0.04, 0.06, 0.03);
        let place = |dist: f64| {
            let plane_center = f.scanner_origin + f.scanner_axis.scale(dist);
            let n = rot.mul_vec(-Vec3::Z);
            let item_center = plane_center - n.scale(half.z + BARCODE_PLANE_OFFSET);
            barcode_plane(item_center, &rot, half)
        };
        assert_eq!(f.scanner_axis, rot.mul_vec(Vec3::Z));
        let t = scan_registers(&f, &place(0.2), &rot, &cfg).unwrap();
        assert!((t - 0.2).abs() < 1e-12);
        assert!(scan_registers(&f, &place(0.5), &rot, &cfg).is_none());
    }
}

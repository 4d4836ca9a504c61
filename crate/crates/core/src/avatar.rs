//! Avatar and hand kinematics: movement with wall clipping, hand transforms,
//! grip attach/release, drop settling, poke contacts and hover.

use serde::{Deserialize, Serialize};

use crate::checkout::{touch_button, PressEvent};
use crate::geometry::{Aabb, EulerRot, Vec3};
use crate::store::layout::DoorState;
use crate::world::{Attachment, Grip, Side, WorldState};

/// Moves and turns the avatar. `dt` is in the body frame (x right, z forward;
/// y is ignored), `dr` adds `(pitch, yaw, _)` in degrees.
pub fn transform_agent(world: &mut WorldState, dt: Vec3, dr: Vec3) {
    let delta = world.body_frame().mul_vec(Vec3::new(dt.x, 0.0, dt.z));
    let mut pos = world.avatar.position;
    for axis in [0usize, 2] {
        let d = delta.component(axis);
        if d != 0.0 {
            let allowed = clip_axis(world, pos, axis, d);
            pos = pos.with_component(axis, pos.component(axis) + allowed);
        }
    }
    world.avatar.position = pos;

    let limit = world.config.pitch_limit_deg;
    let pitch = (world.avatar.rotation.signed_pitch() + dr.x).clamp(-limit, limit);
    let yaw = world.avatar.rotation.yaw + dr.y;
    world.avatar.rotation = EulerRot::new(pitch, yaw, 0.0);
    sync_held(world);
}

/// Largest part of a move of `d` along `axis` that keeps the body square at
/// least `wall_skin` away from walls and obstacles.
fn clip_axis(world: &WorldState, pos: Vec3, axis: usize, d: f64) -> f64 {
    let r = world.config.body_radius;
    let skin = world.config.wall_skin;
    let other = 2 - axis;
    let p = pos.component(axis);
    let q = pos.component(other);
    let floor = &world.scene.floor;
    let wall_hi = if axis == 0 { floor.width } else { floor.depth };
    let mut limit = d.abs();
    let gap_to = |gap: f64| (gap - skin).max(0.0);
    if d > 0.0 {
        limit = limit.min(gap_to(wall_hi - (p + r)));
    } else {
        limit = limit.min(gap_to((p - r) - 0.0));
    }
    for ob in &world.scene.obstacles {
        let (olo, ohi) = (ob.min.component(other), ob.max.component(other));
        if !(q - r < ohi && q + r > olo) {
            continue;
        }
        let (lo, hi) = (ob.min.component(axis), ob.max.component(axis));
        if d > 0.0 && lo >= p + r - 1e-9 {
            limit = limit.min(gap_to(lo - (p + r)));
        } else if d < 0.0 && hi <= p - r + 1e-9 {
            limit = limit.min(gap_to((p - r) - hi));
        }
    }
    limit.copysign(d)
}

/// Moves and turns both hands. Translations are in the camera frame,
/// rotations add `(pitch, yaw, roll)` degrees. Palms are clamped to the
/// reach sphere around the camera.
pub fn transform_hands(world: &mut WorldState, left_t: Vec3, left_r: Vec3, right_t: Vec3, right_r: Vec3) {
    let cam = world.avatar.rotation.matrix();
    let body_inv = world.body_frame().transpose();
    let reach = world.config.reach;
    for (side, t, r) in [(Side::Left, left_t, left_r), (Side::Right, right_t, right_r)] {
        let local = body_inv.mul_vec(cam.mul_vec(t));
        let hand = world.hand_mut(side);
        let mut offset = hand.offset + local;
        let len = offset.length();
        if len > reach {
            offset = offset.scale(reach / len);
        }
        hand.offset = offset;
        hand.rotation = hand.rotation.rotated(r);
    }
    sync_held(world);
}

/// Re-poses held items from their hand attachments.
pub fn sync_held(world: &mut WorldState) {
    for side in Side::BOTH {
        let (Some(id), Some(att)) = (world.hand(side).held, world.hand(side).attachment) else {
            continue;
        };
        let palm = world.hand_position(side);
        let rot = world.hand_matrix(side);
        let center = palm + rot.mul_vec(att.offset);
        let item_rot = rot * att.rotation;
        world.placement_mut(id).set_pose(center, item_rot);
    }
}

fn graspable(world: &WorldState, id: u32, side: Side) -> bool {
    let p = world.placement(id);
    if world.hand(side.other()).held == Some(id) {
        return false;
    }
    !(p.on_shelf && !world.door_open(p.slot.shelf))
}

/// Nearest graspable instance within the grasp radius of a palm; ties go to
/// the lower instance id.
pub fn grasp_candidate(world: &WorldState, side: Side) -> Option<u32> {
    let palm = world.hand_position(side);
    let radius = world.config.grasp_radius;
    world
        .placements
        .iter()
        .filter(|p| graspable(world, p.instance_id, side))
        .map(|p| (p.center.distance(palm), p.instance_id))
        .filter(|(d, _)| *d <= radius)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripEvent {
    pub side: Side,
    pub grip: Grip,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grabbed: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub released: Option<u32>,
}

pub fn toggle_grip(world: &mut WorldState, side: Side) -> GripEvent {
    match world.hand(side).grip {
        Grip::Open => {
            let grabbed = grasp_candidate(world, side);
            let palm = world.hand_position(side);
            let hand_rot = world.hand_matrix(side);
            let attachment = grabbed.map(|id| {
                let p = world.placement(id);
                let inv = hand_rot.transpose();
                Attachment {
                    offset: inv.mul_vec(p.center - palm),
                    rotation: inv * p.rotation,
                }
            });
            if let Some(id) = grabbed {
                world.placement_mut(id).on_shelf = false;
            }
            let hand = world.hand_mut(side);
            hand.grip = Grip::Closed;
            hand.held = grabbed;
            hand.attachment = attachment;
            hand.hovered = None;
            GripEvent {
                side,
                grip: Grip::Closed,
                grabbed,
                released: None,
            }
        }
        Grip::Closed => {
            let hand = world.hand_mut(side);
            hand.grip = Grip::Open;
            let released = hand.held.take();
            hand.attachment = None;
            if let Some(id) = released {
                settle_drop(world, id);
            }
            GripEvent {
                side,
                grip: Grip::Open,
                grabbed: None,
                released,
            }
        }
    }
}

/// Height of the highest support top under `footprint` at or below `ceiling`.
pub fn support_height(world: &WorldState, footprint: &Aabb, ceiling: f64) -> f64 {
    world
        .scene
        .supports
        .iter()
        .filter(|s| s.overlaps_xz(footprint) && s.max.y <= ceiling)
        .map(|s| s.max.y)
        .fold(0.0, f64::max)
}

/// Drops an instance straight down onto the highest support below its center.
pub fn settle_drop(world: &mut WorldState, id: u32) {
    let p = world.placement(id);
    let top = support_height(world, &p.aabb, p.center.y);
    let dy = p.aabb.min.y - top;
    let center = p.center - Vec3::new(0.0, dy, 0.0);
    let rot = p.rotation;
    let p = world.placement_mut(id);
    p.set_pose(center, rot);
    p.on_shelf = false;
}

pub fn toggle_poke(world: &mut WorldState, side: Side) {
    let hand = world.hand_mut(side);
    hand.poke = !hand.poke;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorEvent {
    pub side: Side,
    pub shelf: u32,
    pub door: DoorState,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactEvents {
    pub presses: Vec<PressEvent>,
    pub doors: Vec<DoorEvent>,
}

fn door_under(world: &WorldState, fingertip: Vec3) -> Option<u32> {
    let touch = world.config.touch_distance;
    world.layout.shelves.iter().filter(|s| s.door.is_some()).find_map(|s| {
        let (center, u_axis, v_axis, hu, hv) = s.door_rect();
        let d = fingertip - center;
        let n = s.front_normal();
        (d.dot(n).abs() <= touch && d.dot(u_axis).abs() <= hu && d.dot(v_axis).abs() <= hv).then_some(s.id)
    })
}

/// Resolves poke contacts (checkout buttons, fridge doors) and refreshes hover.
/// Contacts fire on entry only.
pub fn resolve_contacts(world: &mut WorldState) -> ContactEvents {
    let mut events = ContactEvents::default();
    for side in Side::BOTH {
        if !world.hand(side).poke {
            world.button_contact[side.index()] = None;
            world.door_contact[side.index()] = None;
            continue;
        }
        let tip = world.fingertip(side);
        if let Some(press) = touch_button(world, side, tip) {
            events.presses.push(press);
        }
        let door = door_under(world, tip);
        let was = world.door_contact[side.index()];
        world.door_contact[side.index()] = door;
        if let Some(shelf) = door.filter(|d| was != Some(*d)) {
            let state = world.doors.get_mut(&shelf).expect("door exists");
            *state = match *state {
                DoorState::Open => DoorState::Closed,
                DoorState::Closed => DoorState::Open,
            };
            events.doors.push(DoorEvent {
                side,
                shelf,
                door: *state,
            });
        }
    }
    update_hover(world);
    events
}

pub fn update_hover(world: &mut WorldState) {
    for side in Side::BOTH {
        let hovered = if world.hand(side).held.is_some() {
            None
        } else {
            grasp_candidate(world, side)
        };
        world.hand_mut(side).hovered = hovered;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{empty_world, world_with_items};
    use approx::assert_abs_diff_eq;

    #[test]
    fn forward_step_moves_along_facing() {
        let mut w = empty_world();
        let start = w.avatar.position;
        transform_agent(&mut w, Vec3::new(0.0, 0.0, 0.1), Vec3::ZERO);
        assert_abs_diff_eq!(w.avatar.position.z - start.z, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(w.avatar.position.x, start.x, epsilon = 1e-12);
    }

    #[test]
    fn pan_left_decreases_yaw() {
        let mut w = empty_world();
        transform_agent(&mut w, Vec3::ZERO, Vec3::new(0.0, -2.5, 0.0));
        assert_abs_diff_eq!(w.avatar.rotation.yaw, 357.5, epsilon = 1e-12);
    }

    #[test]
    fn pitch_is_clamped() {
        let mut w = empty_world();
        transform_agent(&mut w, Vec3::ZERO, Vec3::new(200.0, 0.0, 0.0));
        assert_abs_diff_eq!(w.avatar.rotation.signed_pitch(), 89.0, epsilon = 1e-12);
        transform_agent(&mut w, Vec3::ZERO, Vec3::new(-400.0, 0.0, 0.0));
        assert_abs_diff_eq!(w.avatar.rotation.signed_pitch(), -89.0, epsilon = 1e-12);
    }

    #[test]
    fn wall_clip_stops_at_skin() {
        let mut w = empty_world();
        let r = w.config.body_radius;
        // Put the body surface 0.05 m from the far wall (z = depth).
        let depth = w.scene.floor.depth;
        w.avatar.position.z = depth - r - 0.05;
        let before = w.avatar.position.z;
        transform_agent(&mut w, Vec3::new(0.0, 0.0, 0.1), Vec3::ZERO);
        assert_abs_diff_eq!(w.avatar.position.z - before, 0.05 - 0.01, epsilon = 1e-12);
        // Blocked axis only: sideways motion still goes through.
        let x0 = w.avatar.position.x;
        transform_agent(&mut w, Vec3::new(0.1, 0.0, 0.1), Vec3::ZERO);
        assert_abs_diff_eq!(w.avatar.position.x - x0, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn hand_moves_along_view_axis_and_clamps_to_reach() {
        let mut w = empty_world();
        let p0 = w.hand_position(Side::Left);
        transform_hands(&mut w, Vec3::new(0.0, 0.0, 0.2), Vec3::ZERO, Vec3::ZERO, Vec3::ZERO);
        let p1 = w.hand_position(Side::Left);
        let fwd = w.camera().forward();
        assert_abs_diff_eq!((p1 - p0).dot(fwd), 0.2, epsilon = 1e-12);
        transform_hands(&mut w, Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO, Vec3::ZERO, Vec3::ZERO);
        let d = w.hand_position(Side::Left).distance(w.camera_position());
        assert_abs_diff_eq!(d, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn grip_attaches_within_radius_only() {
        let mut w = world_with_items(&[0.10]);
        let ev = toggle_grip(&mut w, Side::Right);
        assert_eq!(ev.grabbed, Some(0));
        assert_eq!(w.hand(Side::Right).held, Some(0));

        let mut w = world_with_items(&[0.30]);
        let ev = toggle_grip(&mut w, Side::Right);
        assert_eq!(ev.grabbed, None);
        assert_eq!(w.hand(Side::Right).grip, Grip::Closed);
    }

    #[test]
    fn grip_prefers_nearest() {
        let mut w = world_with_items(&[0.12, 0.08]);
        assert_eq!(toggle_grip(&mut w, Side::Right).grabbed, Some(1));
    }

    #[test]
    fn poke_is_an_involution() {
        let mut w = empty_world();
        let before = w.state_hash();
        toggle_poke(&mut w, Side::Left);
        assert!(w.hand(Side::Left).poke);
        toggle_poke(&mut w, Side::Left);
        assert_eq!(w.state_hash(), before);
    }

    #[test]
    fn release_drops_to_floor() {
        let mut w = world_with_items(&[0.05]);
        toggle_grip(&mut w, Side::Right);
        toggle_grip(&mut w, Side::Right);
        let p = w.placement(0);
        assert!(!p.on_shelf);
        assert_abs_diff_eq!(p.aabb.min.y, 0.0, epsilon = 1e-12);
    }
}

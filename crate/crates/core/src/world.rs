//! The full mutable simulation state.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::Catalog;
use crate::checkout::{Button, CartState, Receipt};
use crate::config::SimConfig;
use crate::geometry::{CameraModel, EulerRot, Mat3, Vec3};
use crate::store::layout::{DoorState, Layout};
use crate::store::placement::{Placement, PriceTag};
use crate::store::scene::StaticScene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grip {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvatarState {
    /// Body position on the floor; the camera sits `eye_height` above it.
    pub position: Vec3,
    /// Yaw and pitch in use; roll stays 0.
    pub rotation: EulerRot,
}

/// Rigid attachment of a held item, expressed in the hand frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub offset: Vec3,
    pub rotation: Mat3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandState {
    /// Palm position relative to the camera, in the body's yaw frame.
    pub offset: Vec3,
    /// Palm rotation relative to the body's yaw frame.
    pub rotation: EulerRot,
    pub grip: Grip,
    pub poke: bool,
    pub held: Option<u32>,
    pub hovered: Option<u32>,
    pub attachment: Option<Attachment>,
}

impl HandState {
    fn spawn(side: Side, cfg: &SimConfig) -> Self {
        let x = match side {
            Side::Left => -cfg.hand_spread,
            Side::Right => cfg.hand_spread,
        };
        HandState {
            offset: Vec3::new(x, -cfg.hand_drop, cfg.hand_forward),
            rotation: EulerRot::default(),
            grip: Grip::Open,
            poke: false,
            held: None,
            hovered: None,
            attachment: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub layout: Arc<Layout>,
    pub scene: Arc<StaticScene>,
    pub catalog: Arc<Catalog>,
    pub config: Arc<SimConfig>,
    pub seed: u64,
    pub placements: Vec<Placement>,
    pub price_tags: Vec<PriceTag>,
    pub avatar: AvatarState,
    pub hands: [HandState; 2],
    pub cart: CartState,
    pub receipt: Option<Receipt>,
    pub doors: BTreeMap<u32, DoorState>,
    /// Mutating commands applied since reset.
    pub steps: u64,
    /// Instance currently registered in the scanner beam.
    pub scan_beam: Option<u32>,
    pub button_contact: [Option<Button>; 2],
    pub door_contact: [Option<u32>; 2],
}

#[derive(Serialize)]
struct HashView<'a> {
    layout: u32,
    seed: u64,
    placements: &'a [Placement],
    price_tags: &'a [PriceTag],
    avatar: &'a AvatarState,
    hands: &'a [HandState; 2],
    cart: &'a CartState,
    receipt: &'a Option<Receipt>,
    doors: &'a BTreeMap<u32, DoorState>,
    steps: u64,
    scan_beam: Option<u32>,
    button_contact: [Option<Button>; 2],
    door_contact: [Option<u32>; 2],
}

impl WorldState {
    pub fn new(
        layout: Arc<Layout>,
        catalog: Arc<Catalog>,
        config: Arc<SimConfig>,
        seed: u64,
        placements: Vec<Placement>,
        price_tags: Vec<PriceTag>,
    ) -> Self {
        let scene = Arc::new(StaticScene::build(&layout));
        let doors = layout
            .shelves
            .iter()
            .filter_map(|s| s.door.map(|d| (s.id, d)))
            .collect();
        WorldState {
            avatar: AvatarState {
                position: layout.spawn.position,
                rotation: EulerRot::from_yaw(layout.spawn.yaw),
            },
            hands: [HandState::spawn(Side::Left, &config), HandState::spawn(Side::Right, &config)],
            layout,
            scene,
            catalog,
            config,
            seed,
            placements,
            price_tags,
            cart: CartState::default(),
            receipt: None,
            doors,
            steps: 0,
            scan_beam: None,
            button_contact: [None, None],
            door_contact: [None, None],
        }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.tick_dt
    }

    pub fn camera_position(&self) -> Vec3 {
        self.avatar.position + Vec3::new(0.0, self.config.eye_height, 0.0)
    }

    pub fn camera(&self) -> CameraModel {
        CameraModel::new(
            self.camera_position(),
            self.avatar.rotation,
            self.config.fov_y_deg,
            self.config.image_width,
            self.config.image_height,
        )
    }

    pub fn body_frame(&self) -> Mat3 {
        Mat3::rot_y(self.avatar.rotation.yaw)
    }

    pub fn hand(&self, side: Side) -> &HandState {
        &self.hands[side.index()]
    }

    pub fn hand_mut(&mut self, side: Side) -> &mut HandState {
        &mut self.hands[side.index()]
    }

    pub fn hand_position(&self, side: Side) -> Vec3 {
        self.camera_position() + self.body_frame().mul_vec(self.hand(side).offset)
    }

    pub fn hand_matrix(&self, side: Side) -> Mat3 {
        self.body_frame() * self.hand(side).rotation.matrix()
    }

    /// World Euler angles of a hand.
    pub fn hand_rotation(&self, side: Side) -> EulerRot {
        let r = self.hand(side).rotation;
        EulerRot::new(r.pitch, self.avatar.rotation.yaw + r.yaw, r.roll)
    }

    pub fn fingertip(&self, side: Side) -> Vec3 {
        self.hand_position(side) + self.hand_matrix(side).mul_vec(Vec3::Z).scale(self.config.fingertip_offset)
    }

    pub fn placement(&self, id: u32) -> &Placement {
        &self.placements[id as usize]
    }

    pub fn placement_mut(&mut self, id: u32) -> &mut Placement {
        &mut self.placements[id as usize]
    }

    pub fn holder_of(&self, id: u32) -> Option<Side> {
        Side::BOTH.into_iter().find(|&s| self.hand(s).held == Some(id))
    }

    pub fn door_open(&self, shelf: u32) -> bool {
        self.doors.get(&shelf).is_none_or(|d| *d == DoorState::Open)
    }

    /// Hex SHA-256 over the exact dynamic state.
    ///
    /// Floats are hashed through their shortest round-trip decimal form, which
    /// is exact, so equal hashes mean bit-equal states.
    pub fn state_hash(&self) -> String {
        let view = HashView {
            layout: self.layout.id,
            seed: self.seed,
            placements: &self.placements,
            price_tags: &self.price_tags,
            avatar: &self.avatar,
            hands: &self.hands,
            cart: &self.cart,
            receipt: &self.receipt,
            doors: &self.doors,
            steps: self.steps,
            scan_beam: self.scan_beam,
            button_contact: self.button_contact,
            door_contact: self.door_contact,
        };
        let text = serde_json::to_string(&view).expect("state serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

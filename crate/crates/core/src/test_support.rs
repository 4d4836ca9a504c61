//! Small hand-built worlds for unit tests.

use std::sync::Arc;

use crate::catalog::{tests::product, Catalog, Category};
use crate::config::SimConfig;
use crate::geometry::{Aabb, Mat3, Vec3};
use crate::store::layout::{Floor, Layout, Pose};
use crate::store::placement::{Placement, SlotRef};
use crate::world::{Side, WorldState};

pub fn bare_layout() -> Layout {
    Layout {
        id: 1,
        name: "bare".into(),
        floor: Floor { width: 6.0, depth: 8.0 },
        shelves: vec![],
        checkout: Pose {
            position: Vec3::new(5.6, 0.0, 1.2),
            yaw: 270.0,
        },
        spawn: Pose {
            position: Vec3::new(3.0, 0.0, 4.0),
            yaw: 0.0,
        },
    }
}

pub fn empty_world() -> WorldState {
    WorldState::new(
        Arc::new(bare_layout()),
        Arc::new(Catalog::new(vec![]).unwrap()),
        Arc::new(SimConfig::default()),
        0,
        vec![],
        vec![],
    )
}

pub fn floating(id: u32, sku: &str, center: Vec3, half: Vec3) -> Placement {
    Placement {
        instance_id: id,
        sku: sku.to_string(),
        category: Category::Chips,
        slot: SlotRef { shelf: 0, row: 0, col: id },
        aabb: Aabb::from_center_half(center, half),
        expiration: None,
        on_shelf: true,
        center,
        rotation: Mat3::IDENTITY,
        half_extents: half,
    }
}

/// Items floating straight ahead of the right palm at the given distances.
pub fn world_with_items(distances: &[f64]) -> WorldState {
    let base = empty_world();
    let palm = base.hand_position(Side::Right);
    let half = Vec3::new(0.03, 0.03, 0.03);
    let mut products = Vec::new();
    let mut placements = Vec::new();
    for (i, d) in distances.iter().enumerate() {
        let sku = format!("I{i}");
        products.push(product(&sku, Category::Chips, 100 + i as i64, 1.0));
        placements.push(floating(i as u32, &sku, palm + Vec3::new(0.0, 0.0, *d), half));
    }
    WorldState::new(
        Arc::clone(&base.layout),
        Arc::new(Catalog::new(products).unwrap()),
        Arc::clone(&base.config),
        0,
        placements,
        vec![],
    )
}

use serde::{Deserialize, Serialize};

use super::layout::{Floor, Layout};
use crate::checkout::CheckoutFixture;
use crate::geometry::Aabb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum FixtureKind {
    Shelf(u32),
    Counter,
    ScannerTower,
    Screen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixturePart {
    pub kind: FixtureKind,
    pub aabb: Aabb,
}

/// Static geometry derived from a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticScene {
    pub fixtures: Vec<FixturePart>,
    /// Full-height footprints the avatar body may not enter.
    pub obstacles: Vec<Aabb>,
    /// Boxes whose top faces can hold a dropped item.
    pub supports: Vec<Aabb>,
    pub checkout: CheckoutFixture,
    pub floor: Floor,
}

impl StaticScene {
    pub fn build(layout: &Layout) -> Self {
        let checkout = CheckoutFixture::from_pose(layout.checkout);
        let mut fixtures = Vec::new();
        let mut supports = Vec::new();
        let mut obstacles = Vec::new();
        for shelf in &layout.shelves {
            for b in shelf.boards() {
                fixtures.push(FixturePart {
                    kind: FixtureKind::Shelf(shelf.id),
                    aabb: b,
                });
                supports.push(b);
            }
            obstacles.push(shelf.footprint());
        }
        for (kind, aabb) in [
            (FixtureKind::Counter, checkout.counter),
            (FixtureKind::ScannerTower, checkout.tower),
            (FixtureKind::Screen, checkout.screen_box),
        ] {
            fixtures.push(FixturePart { kind, aabb });
            supports.push(aabb);
        }
        obstacles.push(checkout.counter);
        StaticScene {
            fixtures,
            obstacles,
            supports,
            checkout,
            floor: layout.floor,
        }
    }
}

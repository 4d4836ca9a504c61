//! Store layouts, seeded placement, price tags, expirations and world reset.

pub mod layout;
pub mod placement;
pub mod rng;
pub mod scene;

use std::sync::Arc;

use thiserror::Error;

pub use layout::{reference_layouts, DoorState, Layout, Pose, Shelf};
pub use placement::{generate_expirations, generate_placement, Placement, PlacementError, PriceTag, SlotRef};
pub use rng::Rng64;
pub use scene::{FixtureKind, FixturePart, StaticScene};

use crate::catalog::Catalog;
use crate::config::SimConfig;
use crate::world::WorldState;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown layout id {0}")]
    UnknownLayout(u32),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

/// Builds a fresh world: placement, expirations, avatar at spawn, idle checkout.
pub fn reset_world(
    catalog: &Arc<Catalog>,
    layouts: &[Arc<Layout>],
    config: &Arc<SimConfig>,
    layout_id: u32,
    seed: u64,
) -> Result<WorldState, StoreError> {
    let layout = layouts
        .iter()
        .find(|l| l.id == layout_id)
        .ok_or(StoreError::UnknownLayout(layout_id))?;
    let (placements, tags) = generate_placement(catalog, layout, seed)?;
    let placements = generate_expirations(placements, seed);
    Ok(WorldState::new(
        Arc::clone(layout),
        Arc::clone(catalog),
        Arc::clone(config),
        seed,
        placements,
        tags,
    ))
}

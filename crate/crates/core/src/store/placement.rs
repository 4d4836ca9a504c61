//! Seeded, category-grouped product placement and expiration dates.

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layout::Layout;
use super::rng::Rng64;
use crate::catalog::{Catalog, Category, ProductSpec};
use crate::geometry::{Aabb, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub shelf: u32,
    pub row: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub instance_id: u32,
    pub sku: String,
    pub category: Category,
    pub slot: SlotRef,
    pub aabb: Aabb,
    pub expiration: Option<NaiveDate>,
    pub on_shelf: bool,
    pub center: Vec3,
    pub rotation: Mat3,
    pub half_extents: Vec3,
}

impl Placement {
    /// Moves the instance and refreshes its world box.
    pub fn set_pose(&mut self, center: Vec3, rotation: Mat3) {
        self.center = center;
        self.rotation = rotation;
        self.aabb = Aabb::from_oriented(center, self.half_extents, &rotation);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTag {
    pub shelf: u32,
    pub row: u32,
    pub col: u32,
    pub sku: String,
    pub price_cents: i64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("category {category} does not fit: admitting shelves {shelves:?} are full")]
    CapacityExceeded { category: Category, shelves: Vec<u32> },
}

/// Fixed simulation epoch for expiration dates.
pub fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 1).expect("valid date")
}

/// Earliest and latest expiration offsets from the epoch, in days.
pub const EXPIRY_MIN_DAYS: u64 = 30;
pub const EXPIRY_MAX_DAYS: u64 = 364;

/// Places every catalog product exactly once.
///
/// Categories are handled most constrained first (fewest admitting shelves,
/// then largest); each category's products are
/// shuffled and poured into the admitting shelves in layout order. Within a
/// shelf the category groups are shuffled and laid out row-major from the top
/// row down, so every category is one contiguous run per row.
pub fn generate_placement(
    catalog: &Catalog,
    layout: &Layout,
    seed: u64,
) -> Result<(Vec<Placement>, Vec<PriceTag>), PlacementError> {
    let mut rng = Rng64::new(seed);

    let mut by_category: Vec<(Category, Vec<&ProductSpec>)> = Category::ALL
        .iter()
        .map(|&c| (c, catalog.products().iter().filter(|p| p.category == c).collect()))
        .filter(|(_, v): &(Category, Vec<&ProductSpec>)| !v.is_empty())
        .collect();
    let admitting_count =
        |c: Category| layout.shelves.iter().filter(|s| s.allowed_categories.contains(&c)).count();
    by_category.sort_by(|a, b| {
        admitting_count(a.0)
            .cmp(&admitting_count(b.0))
            .then(b.1.len().cmp(&a.1.len()))
            .then(a.0.cmp(&b.0))
    });

    let mut remaining: Vec<usize> = layout.shelves.iter().map(|s| s.capacity()).collect();
    let mut groups: Vec<Vec<Vec<&ProductSpec>>> = vec![Vec::new(); layout.shelves.len()];

    for (category, mut products) in by_category {
        rng.shuffle(&mut products);
        let admitting: Vec<usize> = (0..layout.shelves.len())
            .filter(|&i| layout.shelves[i].allowed_categories.contains(&category))
            .collect();
        let mut rest = products.as_slice();
        for &i in &admitting {
            if rest.is_empty() {
                break;
            }
            let take = remaining[i].min(rest.len());
            if take == 0 {
                continue;
            }
            groups[i].push(rest[..take].to_vec());
            remaining[i] -= take;
            rest = &rest[take..];
        }
        if !rest.is_empty() {
            return Err(PlacementError::CapacityExceeded {
                category,
                shelves: admitting.iter().map(|&i| layout.shelves[i].id).collect(),
            });
        }
    }

    let mut placements = Vec::new();
    let mut tags = Vec::new();
    for (shelf, mut shelf_groups) in layout.shelves.iter().zip(groups) {
        rng.shuffle(&mut shelf_groups);
        let slots = (0..shelf.rows)
            .rev()
            .flat_map(|row| (0..shelf.slots_per_row).map(move |col| (row, col)));
        for ((row, col), product) in slots.zip(shelf_groups.into_iter().flatten()) {
            let half = product.extents;
            let rotation = shelf.pose.rotation();
            let center = shelf.slot_center(row, col, half);
            placements.push(Placement {
                instance_id: placements.len() as u32,
                sku: product.sku.clone(),
                category: product.category,
                slot: SlotRef {
                    shelf: shelf.id,
                    row,
                    col,
                },
                aabb: Aabb::from_oriented(center, half, &rotation),
                expiration: None,
                on_shelf: true,
                center,
                rotation,
                half_extents: half,
            });
            tags.push(PriceTag {
                shelf: shelf.id,
                row,
                col,
                sku: product.sku.clone(),
                price_cents: product.price_cents,
            });
        }
    }
    Ok((placements, tags))
}

/// Assigns each placement a date uniform over the expiry window, drawn from
/// a generator seeded with `seed ^ instance index`.
pub fn generate_expirations(mut placements: Vec<Placement>, seed: u64) -> Vec<Placement> {
    let span = EXPIRY_MAX_DAYS - EXPIRY_MIN_DAYS + 1;
    for (i, p) in placements.iter_mut().enumerate() {
        let mut rng = Rng64::new(seed ^ i as u64);
        let days = EXPIRY_MIN_DAYS + rng.below(span);
        p.expiration = epoch().checked_add_days(Days::new(days));
    }
    placements
}

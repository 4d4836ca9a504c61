//! Headless convenience-store simulator for embodied agents.
//!
//! The crate models a small retail store stocked from an annotated product
//! catalog, an avatar with a camera and two hands, a self-checkout with a
//! barcode scanner, structured observations, a task benchmark with 10 Hz
//! episode logging and replay, a JSON-over-WebSocket control server and a
//! scripted agent client that drives the whole loop.
//!
//! Runnable walkthroughs live in this crate's `examples/` directory.

pub mod agent;
pub mod avatar;
pub mod bench;
pub mod catalog;
pub mod checkout;
pub mod cli;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod observe;
pub mod protocol;
pub mod server;
pub mod store;
pub mod world;

#[cfg(test)]
pub(crate) mod test_support;

pub use catalog::{Catalog, Category, ProductSpec};
pub use config::SimConfig;
pub use engine::Engine;
pub use world::{Side, WorldState};

/// The shipped 250-product catalog.
pub fn reference_catalog() -> Catalog {
    Catalog::from_json(include_str!("../data/catalog.json")).expect("shipped catalog is valid")
}

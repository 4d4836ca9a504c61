//! Stocks a store layout for a seed and prints each shelf row as a strip of
//! category initials, showing contiguous category runs and price tags.
//!
//! ```text
//! cargo run --example placement -- 2 17
//! ```

use sari_sim::Engine;

fn main() {
    let mut args = std::env::args().skip(1);
    let layout: u32 = args.next().map(|s| s.parse().expect("layout 1-3")).unwrap_or(1);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);
    let engine = Engine::reference(layout, seed).expect("reference engine");
    let w = engine.world();
    println!("layout {layout} seed {seed}: {} placements, {} price tags", w.placements.len(), w.price_tags.len());
    for shelf in &w.layout.shelves {
        let cats: Vec<&str> = shelf.allowed_categories.iter().map(|c| c.as_str()).collect();
        println!("\nshelf {} \"{}\" [{}]{}", shelf.id, shelf.label, cats.join(", "), if shelf.door.is_some() { " (door)" } else { "" });
        for row in (0..shelf.rows).rev() {
            let strip: String = (0..shelf.slots_per_row)
                .map(|col| {
                    w.placements
                        .iter()
                        .find(|p| p.slot.shelf == shelf.id && p.slot.row == row && p.slot.col == col)
                        .map(|p| p.category.as_str().chars().next().unwrap())
                        .unwrap_or('.')
                })
                .collect();
            println!("  row {row}: {strip}");
        }
    }
    let p = &w.placements[0];
    let tag = w.price_tags.iter().find(|t| t.sku == p.sku).expect("tag");
    println!(
        "\ninstance {} {} at shelf {} row {} col {}, tag {} cents, expires {}",
        p.instance_id,
        p.sku,
        p.slot.shelf,
        p.slot.row,
        p.slot.col,
        tag.price_cents,
        p.expiration.map(|d| d.to_string()).unwrap_or_default()
    );
}

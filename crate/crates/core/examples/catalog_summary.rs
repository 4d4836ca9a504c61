//! Loads the product catalog and prints per-category counts plus a sample
//! label, then answers a nutrition comparison.
//!
//! ```text
//! cargo run --example catalog_summary [path/to/catalog.json]
//! ```

use sari_sim::catalog::{Catalog, Category};

fn main() {
    let catalog = match std::env::args().nth(1) {
        Some(path) => Catalog::load(&path).unwrap_or_else(|e| panic!("{path}: {e}")),
        None => sari_sim::reference_catalog(),
    };
    println!("{} products", catalog.len());
    for (category, n) in catalog.category_counts() {
        println!("  {:<8} {n:>3}", category.as_str());
    }
    let p = &catalog.products()[0];
    println!("\nsample: {} ({}) {} — PHP {:.2}", p.name, p.sku, p.barcode, p.price_cents as f64 / 100.0);
    println!("  ingredients: {}", p.label.ingredients);
    println!("  nutrition:   {:?}", p.label.nutrition);

    let biscuits: Vec<String> = catalog
        .products()
        .iter()
        .filter(|p| p.category == Category::Biscuit)
        .take(5)
        .map(|p| p.sku.clone())
        .collect();
    let best = catalog.attribute_argmin(&biscuits, "sugar_g").expect("biscuits carry sugar_g");
    println!("\nleast sugar among {biscuits:?}: {best}");
}

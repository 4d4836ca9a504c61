//! Regenerates the shipped reference data: the 250-product catalog and the
//! benchmark task pack.
//!
//! ```text
//! cargo run --example gen_reference_data -- crates/core/data
//! ```
//!
//! Without an argument it generates both files in memory and checks them
//! against the copies compiled into the library.

use std::collections::BTreeMap;

use sari_sim::bench::{Difficulty, Goal, ProductMatch, TaskFile, TaskSpec, TASK_VERSION};
use sari_sim::catalog::{ean13_check_digit, Catalog, Category, Label, MeshClass, ProductSpec};
use sari_sim::geometry::Vec3;
use sari_sim::store::Rng64;

struct CategorySpec {
    category: Category,
    prefix: &'static str,
    brands: &'static [&'static str],
    variants: &'static [&'static str],
    count: usize,
    price: (i64, i64),
    half: [f64; 3],
    weight: (f64, f64),
    mesh: MeshClass,
    ingredients: &'static str,
    allergens: &'static [&'static str],
    /// Ranges for sugar_g, sodium_mg, fat_g, calories_kcal per serving.
    nutrition: [(f64, f64); 4],
}

const ORIGINS: [&str; 6] = ["Philippines", "Thailand", "Indonesia", "Malaysia", "Vietnam", "Japan"];

fn specs() -> Vec<CategorySpec> {
    vec![
        CategorySpec {
            category: Category::Water,
            prefix: "WAT",
            brands: &["Aqua Pura", "Crystal Spring", "Nature's Well", "Summit"],
            variants: &["Still 500ml", "Still 1L", "Sparkling 500ml"],
            count: 12,
            price: (1500, 4500),
            half: [0.035, 0.11, 0.035],
            weight: (500.0, 1000.0),
            mesh: MeshClass::Complex,
            ingredients: "Purified water",
            allergens: &[],
            nutrition: [(0.0, 0.0), (0.0, 15.0), (0.0, 0.0), (0.0, 0.0)],
        },
        CategorySpec {
            category: Category::Soda,
            prefix: "SOD",
            brands: &["Fizzo", "Kola King", "Zest", "Royal Bubble"],
            variants: &["Cola", "Orange", "Lemon-Lime", "Root Beer", "Grape", "Cream Soda"],
            count: 23,
            price: (2500, 7500),
            half: [0.033, 0.09, 0.033],
            weight: (330.0, 500.0),
            mesh: MeshClass::Complex,
            ingredients: "Carbonated water, sugar, flavorings, citric acid",
            allergens: &[],
            nutrition: [(20.0, 45.0), (10.0, 60.0), (0.0, 0.0), (90.0, 190.0)],
        },
        CategorySpec {
            category: Category::Juice,
            prefix: "JUI",
            brands: &["Sunfresh", "Orchard Gold", "Tropika", "Valle Verde"],
            variants: &["Mango", "Pineapple", "Apple", "Orange"],
            count: 16,
            price: (3000, 9000),
            half: [0.04, 0.1, 0.035],
            weight: (250.0, 1000.0),
            mesh: MeshClass::Simple,
            ingredients: "Fruit juice concentrate, water, vitamin C",
            allergens: &[],
            nutrition: [(18.0, 32.0), (5.0, 30.0), (0.0, 0.5), (80.0, 150.0)],
        },
        CategorySpec {
            category: Category::Dairy,
            prefix: "DAI",
            brands: &["Alpine", "Farm Fresh", "Hillside", "Cowbell", "Lakeside"],
            variants: &["Fresh Milk", "Chocolate Milk", "Yogurt Drink", "Low-fat Milk"],
            count: 20,
            price: (3500, 12000),
            half: [0.04, 0.09, 0.04],
            weight: (200.0, 1000.0),
            mesh: MeshClass::Simple,
            ingredients: "Milk, stabilizers, vitamins A and D",
            allergens: &["milk"],
            nutrition: [(8.0, 26.0), (80.0, 160.0), (1.0, 8.0), (90.0, 210.0)],
        },
        CategorySpec {
            category: Category::Biscuit,
            prefix: "BIS",
            brands: &["Crunchy", "Golden Bake", "Sweet Crumbs", "Tea Time", "Nutri Bake"],
            variants: &[
                "Strawberry Sandwich",
                "Chocolate Sandwich",
                "Butter Cookies",
                "Vanilla Wafers",
                "Cheese Crackers",
                "Coconut Rolls",
                "Peanut Butter Bites",
                "Ube Creams",
                "Mocha Fingers",
                "Lemon Squares",
            ],
            count: 50,
            price: (1200, 6500),
            half: [0.07, 0.1, 0.025],
            weight: (100.0, 300.0),
            mesh: MeshClass::Simple,
            ingredients: "Wheat flour, sugar, vegetable oil, leavening, salt, flavorings",
            allergens: &["wheat", "milk", "soy"],
            nutrition: [(4.0, 22.0), (60.0, 240.0), (3.0, 12.0), (120.0, 260.0)],
        },
        CategorySpec {
            category: Category::Can,
            prefix: "CAN",
            brands: &["Seaking", "Manong", "Pantry", "Bayview", "Harvest", "Captain"],
            variants: &[
                "Sardines in Tomato Sauce",
                "Corned Beef",
                "Luncheon Meat",
                "Tuna Flakes",
                "Sweet Corn",
                "Vienna Sausage",
                "Pork and Beans",
                "Green Peas",
                "Mackerel",
                "Fruit Cocktail",
            ],
            count: 59,
            price: (2000, 11000),
            half: [0.04, 0.055, 0.04],
            weight: (155.0, 425.0),
            mesh: MeshClass::Simple,
            ingredients: "Main ingredient, water, salt, spices",
            allergens: &["fish"],
            nutrition: [(0.0, 18.0), (200.0, 900.0), (1.0, 20.0), (80.0, 320.0)],
        },
        CategorySpec {
            category: Category::Chips,
            prefix: "CHI",
            brands: &["Crispo", "Potato Kings", "Ridgeline", "Snackers", "Tortilla Ranch"],
            variants: &["Original", "Cheese", "Sour Cream", "Barbecue", "Salt & Vinegar", "Chili", "Seaweed", "Garlic"],
            count: 40,
            price: (1800, 9500),
            half: [0.08, 0.12, 0.04],
            weight: (60.0, 180.0),
            mesh: MeshClass::Deformable,
            ingredients: "Potatoes, vegetable oil, seasoning, salt",
            allergens: &["milk"],
            nutrition: [(0.5, 5.0), (120.0, 420.0), (6.0, 16.0), (140.0, 280.0)],
        },
        CategorySpec {
            category: Category::Nuts,
            prefix: "NUT",
            brands: &["Nutty Co", "Golden Harvest", "Island Roast"],
            variants: &["Salted Peanuts", "Garlic Peanuts", "Cashews", "Almonds", "Mixed Nuts"],
            count: 15,
            price: (2500, 14000),
            half: [0.05, 0.08, 0.03],
            weight: (80.0, 250.0),
            mesh: MeshClass::Deformable,
            ingredients: "Roasted nuts, vegetable oil, salt",
            allergens: &["peanuts", "tree nuts"],
            nutrition: [(1.0, 6.0), (50.0, 260.0), (12.0, 22.0), (160.0, 230.0)],
        },
        CategorySpec {
            category: Category::Soup,
            prefix: "SOU",
            brands: &["Kitchen Pot"],
            variants: &["Chicken Noodle", "Cream of Mushroom", "Tomato", "Corn Chowder", "Beef Broth", "Minestrone"],
            count: 6,
            price: (3500, 8000),
            half: [0.04, 0.055, 0.04],
            weight: (300.0, 400.0),
            mesh: MeshClass::Simple,
            ingredients: "Water, vegetables, modified starch, salt, spices",
            allergens: &["wheat", "milk"],
            nutrition: [(1.0, 9.0), (600.0, 1100.0), (1.0, 9.0), (60.0, 180.0)],
        },
        CategorySpec {
            category: Category::Noodles,
            prefix: "NOO",
            brands: &["Lucky Bowl"],
            variants: &["Pancit Canton", "Chicken Mami", "Beef Noodles", "Spicy Ramen", "Seafood Cup", "Kimchi Cup", "Udon Bowl"],
            count: 7,
            price: (1000, 4500),
            half: [0.05, 0.05, 0.05],
            weight: (55.0, 120.0),
            mesh: MeshClass::Simple,
            ingredients: "Wheat flour, palm oil, seasoning powder, dehydrated vegetables",
            allergens: &["wheat", "soy"],
            nutrition: [(1.0, 6.0), (800.0, 1700.0), (8.0, 18.0), (250.0, 450.0)],
        },
        CategorySpec {
            category: Category::Liquor,
            prefix: "LIQ",
            brands: &["Don Rico"],
            variants: &["Dark Rum 700ml", "Dry Gin 700ml"],
            count: 2,
            price: (15000, 45000),
            half: [0.04, 0.14, 0.04],
            weight: (700.0, 700.0),
            mesh: MeshClass::Complex,
            ingredients: "Distilled spirit, water",
            allergens: &[],
            nutrition: [(0.0, 0.0), (0.0, 5.0), (0.0, 0.0), (1500.0, 1700.0)],
        },
    ]
}

fn unit(rng: &mut Rng64) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn uniform(rng: &mut Rng64, lo: f64, hi: f64, step: f64) -> f64 {
    let v = round_to(lo + (hi - lo) * unit(rng), step);
    // Strip float noise from the rounding so the JSON stays short.
    format!("{v:.4}").parse().expect("finite")
}

pub fn generate_catalog() -> Catalog {
    let mut rng = Rng64::new(0x5A21_2025);
    let mut products = Vec::new();
    for spec in specs() {
        let mut names = Vec::new();
        for v in spec.variants {
            for b in spec.brands {
                names.push(format!("{b} {v}"));
            }
        }
        assert!(names.len() >= spec.count, "{:?} has too few name combinations", spec.category);
        for (i, name) in names.into_iter().take(spec.count).enumerate() {
            let index = products.len();
            let price = spec.price.0 + (rng.below((spec.price.1 - spec.price.0) as u64 / 25 + 1) as i64) * 25;
            let jitter = |rng: &mut Rng64, h: f64| uniform(rng, h * 0.85, h, 0.001);
            let extents = Vec3::new(
                jitter(&mut rng, spec.half[0]),
                jitter(&mut rng, spec.half[1]),
                jitter(&mut rng, spec.half[2]),
            );
            let mut nutrition = BTreeMap::new();
            for (key, (lo, hi)) in ["sugar_g", "sodium_mg", "fat_g", "calories_kcal"]
                .iter()
                .zip(spec.nutrition)
            {
                let step = if *key == "sodium_mg" || *key == "calories_kcal" { 1.0 } else { 0.1 };
                nutrition.insert(key.to_string(), uniform(&mut rng, lo, hi, step));
            }
            let first12 = format!("480{:09}", 123_457 + index as u64 * 3_999_971);
            let check = ean13_check_digit(&first12);
            let origin = ORIGINS[rng.below(ORIGINS.len() as u64) as usize];
            products.push(ProductSpec {
                sku: format!("{}-{:03}", spec.prefix, i + 1),
                name,
                category: spec.category,
                price_cents: price,
                net_weight_g: uniform(&mut rng, spec.weight.0, spec.weight.1, 5.0).max(5.0),
                extents,
                label: Label {
                    ingredients: spec.ingredients.to_string(),
                    nutrition,
                    allergens: spec.allergens.iter().map(|s| s.to_string()).collect(),
                    origin: origin.to_string(),
                },
                barcode: format!("{first12}{check}"),
                mesh_class: spec.mesh,
            });
        }
    }
    Catalog::new(products).expect("generated catalog is valid")
}

fn first_sku(catalog: &Catalog, category: Category, name_part: &str) -> String {
    catalog
        .products()
        .iter()
        .find(|p| p.category == category && p.name.contains(name_part))
        .map(|p| p.sku.clone())
        .unwrap_or_else(|| panic!("no {category} named like {name_part:?}"))
}

fn hold(category: Option<Category>, name: Option<&str>, sku: Option<String>) -> ProductMatch {
    ProductMatch {
        sku,
        category,
        name_contains: name.map(str::to_string),
    }
}

pub fn generate_tasks(catalog: &Catalog) -> Vec<TaskSpec> {
    let strawberry = first_sku(catalog, Category::Biscuit, "Strawberry");
    let chocolate = first_sku(catalog, Category::Biscuit, "Chocolate");
    let bbq = first_sku(catalog, Category::Chips, "Barbecue");
    let cheese_chips = first_sku(catalog, Category::Chips, "Cheese");
    let cashews = first_sku(catalog, Category::Nuts, "Cashews");
    let almonds = first_sku(catalog, Category::Nuts, "Almonds");
    let corned = first_sku(catalog, Category::Can, "Corned Beef");
    let cola = first_sku(catalog, Category::Soda, "Cola");
    let ramen = first_sku(catalog, Category::Noodles, "Spicy Ramen");

    let mut tasks = Vec::new();
    let mut add = |layout: u32, n: usize, difficulty: Difficulty, instruction: &str, goal: Goal| {
        let tag = match difficulty {
            Difficulty::Easy => "E",
            Difficulty::Average => "A",
            Difficulty::Difficult => "D",
        };
        tasks.push(TaskSpec {
            id: format!("L{layout}-{tag}{n}"),
            difficulty,
            layout,
            seed: 100 * layout as u64 + tasks.len() as u64 % 9,
            instruction: instruction.to_string(),
            goal,
            time_limit_s: if difficulty == Difficulty::Easy { 300.0 } else { 600.0 },
        });
    };
    use Difficulty::*;
    let easy = [
        [
            ("Find and pick up a bag of chips.", hold(Some(Category::Chips), None, None)),
            ("Pick up a bottle of water.", hold(Some(Category::Water), None, None)),
            (
                "Find a strawberry-flavored biscuit and pick it up.",
                hold(Some(Category::Biscuit), Some("Strawberry"), None),
            ),
        ],
        [
            ("Pick up a can of soda.", hold(Some(Category::Soda), None, None)),
            ("Find and pick up a pack of nuts.", hold(Some(Category::Nuts), None, None)),
            ("Pick up a cup of instant noodles.", hold(Some(Category::Noodles), None, None)),
        ],
        [
            ("Find and pick up a can of soup.", hold(Some(Category::Soup), None, None)),
            ("Pick up any canned good.", hold(Some(Category::Can), None, None)),
            ("Find and pick up a bag of chips.", hold(Some(Category::Chips), None, None)),
        ],
    ];
    let average = [
        [
            ("Buy a pack of nuts: scan it and pay.", hold(Some(Category::Nuts), None, None)),
            ("Buy a can of corned beef.", hold(None, None, Some(corned.clone()))),
            ("Buy a bag of cheese-flavored chips.", hold(Some(Category::Chips), Some("Cheese"), None)),
        ],
        [
            ("Buy a bag of chips: scan it and pay.", hold(Some(Category::Chips), None, None)),
            ("Buy a bottle of cola.", hold(None, None, Some(cola.clone()))),
            ("Buy some spicy ramen.", hold(None, None, Some(ramen.clone()))),
        ],
        [
            ("Buy a biscuit pack: scan it and pay.", hold(Some(Category::Biscuit), None, None)),
            ("Buy a bottle of water.", hold(Some(Category::Water), None, None)),
            ("Buy a pack of cashews.", hold(Some(Category::Nuts), Some("Cashews"), None)),
        ],
    ];
    let difficult = [
        (
            "Which of these two biscuits has lower sugar content? Scan the answer and pay.",
            "sugar_g",
            vec![strawberry.clone(), chocolate.clone()],
        ),
        (
            "Which of these two chips has less sodium? Scan the answer and pay.",
            "sodium_mg",
            vec![bbq.clone(), cheese_chips.clone()],
        ),
        (
            "Which of these two nut packs has less fat? Scan the answer and pay.",
            "fat_g",
            vec![cashews.clone(), almonds.clone()],
        ),
    ];
    for layout in 1..=3u32 {
        let l = layout as usize - 1;
        for (n, (text, m)) in easy[l].iter().enumerate() {
            add(layout, n + 1, Easy, text, Goal::Hold { target: m.clone() });
        }
        for (n, (text, m)) in average[l].iter().enumerate() {
            add(layout, n + 1, Average, text, Goal::Scanned { target: m.clone() });
        }
        for n in 0..difficult.len() {
            // Rotate so each layout asks the pairs in a different order.
            let (text, attr, cands) = &difficult[(n + l) % difficult.len()];
            add(
                layout,
                n + 1,
                Difficult,
                text,
                Goal::AnswerScan {
                    attribute: attr.to_string(),
                    candidates: cands.clone(),
                },
            );
        }
    }
    for t in &tasks {
        t.validate(catalog).expect("generated task is valid");
    }
    tasks
}

fn main() {
    let catalog = generate_catalog();
    let tasks = generate_tasks(&catalog);
    let catalog_json = catalog.to_json() + "\n";
    let tasks_json = serde_json::to_string_pretty(&TaskFile {
        task_version: TASK_VERSION,
        tasks: tasks.clone(),
    })
    .expect("tasks serialize")
        + "\n";

    println!("catalog: {} products", catalog.len());
    for (c, n) in catalog.category_counts() {
        println!("  {:<8} {n}", c.as_str());
    }
    println!("tasks: {}", tasks.len());

    match std::env::args().nth(1) {
        Some(dir) => {
            let dir = std::path::Path::new(&dir);
            std::fs::write(dir.join("catalog.json"), catalog_json).expect("write catalog");
            std::fs::write(dir.join("tasks.json"), tasks_json).expect("write tasks");
            println!("wrote {}/catalog.json and tasks.json", dir.display());
        }
        None => {
            assert_eq!(catalog, sari_sim::reference_catalog(), "shipped catalog is stale");
            assert_eq!(tasks, sari_sim::bench::reference_tasks(), "shipped task pack is stale");
            println!("shipped data is up to date");
        }
    }
}

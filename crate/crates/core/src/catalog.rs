//! Annotated product catalog: loading, validation and lookups.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

pub const CATALOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Water,
    Soda,
    Juice,
    Dairy,
    Biscuit,
    Can,
    Chips,
    Nuts,
    Soup,
    Noodles,
    Liquor,
}

impl Category {
    pub const ALL: [Category; 11] = [
        Category::Water,
        Category::Soda,
        Category::Juice,
        Category::Dairy,
        Category::Biscuit,
        Category::Can,
        Category::Chips,
        Category::Nuts,
        Category::Soup,
        Category::Noodles,
        Category::Liquor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Water => "Water",
            Category::Soda => "Soda",
            Category::Juice => "Juice",
            Category::Dairy => "Dairy",
            Category::Biscuit => "Biscuit",
            Category::Can => "Can",
            Category::Chips => "Chips",
            Category::Nuts => "Nuts",
            Category::Soup => "Soup",
            Category::Noodles => "Noodles",
            Category::Liquor => "Liquor",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownCategory {
                index: None,
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshClass {
    Simple,
    Complex,
    Deformable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub ingredients: String,
    pub nutrition: BTreeMap<String, f64>,
    pub allergens: Vec<String>,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub sku: String,
    pub name: String,
    pub category: Category,
    pub price_cents: i64,
    pub net_weight_g: f64,
    /// Box half-sizes in meters, product-local frame.
    pub extents: Vec3,
    pub label: Label,
    pub barcode: String,
    pub mesh_class: MeshClass,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog parse error: {0}")]
    Parse(String),
    #[error("unsupported catalog_version {0}")]
    Version(u32),
    #[error("record {index}: duplicate sku {sku:?}")]
    DuplicateSku { index: usize, sku: String },
    #[error("record {index}: duplicate barcode {barcode:?}")]
    DuplicateBarcode { index: usize, barcode: String },
    #[error("record {index:?}: unknown category {name:?}")]
    UnknownCategory { index: Option<usize>, name: String },
    #[error("record {index}: non-positive price {price_cents}")]
    NonPositivePrice { index: usize, price_cents: i64 },
    #[error("record {index}: invalid field {field}: {reason}")]
    InvalidField {
        index: usize,
        field: &'static str,
        reason: String,
    },
    #[error("no product matches {0:?}")]
    NotFound(String),
    #[error("attribute {attribute:?} missing for sku {sku:?}")]
    MissingAttribute { sku: String, attribute: String },
    #[error("need at least 2 skus to compare, got {0}")]
    TooFewCandidates(usize),
}

/// Validated, immutable product catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    products: Vec<ProductSpec>,
    by_sku: BTreeMap<String, usize>,
    by_barcode: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupKey<'a> {
    Sku(&'a str),
    Barcode(&'a str),
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    catalog_version: u32,
    products: Vec<serde_json::Value>,
}

impl Catalog {
    pub fn load(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
        let text = std::fs::read_to_string(path)?;
        Catalog::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Catalog, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        if file.catalog_version != CATALOG_VERSION {
            return Err(CatalogError::Version(file.catalog_version));
        }
        let mut products = Vec::with_capacity(file.products.len());
        for (index, raw) in file.products.into_iter().enumerate() {
            if let Some(name) = raw.get("category").and_then(|c| c.as_str()) {
                if name.parse::<Category>().is_err() {
                    return Err(CatalogError::UnknownCategory {
                        index: Some(index),
                        name: name.to_string(),
                    });
                }
            }
            let p: ProductSpec = serde_json::from_value(raw)
                .map_err(|e| CatalogError::Parse(format!("record {index}: {e}")))?;
            products.push(p);
        }
        Catalog::new(products)
    }

    /// Validates records and builds the index.
    pub fn new(products: Vec<ProductSpec>) -> Result<Catalog, CatalogError> {
        let mut by_sku = BTreeMap::new();
        let mut by_barcode = BTreeMap::new();
        for (index, p) in products.iter().enumerate() {
            validate_record(index, p)?;
            if by_sku.insert(p.sku.clone(), index).is_some() {
                return Err(CatalogError::DuplicateSku {
                    index,
                    sku: p.sku.clone(),
                });
            }
            if by_barcode.insert(p.barcode.clone(), index).is_some() {
                return Err(CatalogError::DuplicateBarcode {
                    index,
                    barcode: p.barcode.clone(),
                });
            }
        }
        Ok(Catalog {
            products,
            by_sku,
            by_barcode,
        })
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            catalog_version: CATALOG_VERSION,
            products: self
                .products
                .iter()
                .map(|p| serde_json::to_value(p).expect("product serializes"))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn products(&self) -> &[ProductSpec] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut counts = BTreeMap::new();
        for p in &self.products {
            *counts.entry(p.category).or_insert(0) += 1;
        }
        counts
    }

    pub fn lookup(&self, key: LookupKey<'_>) -> Result<&ProductSpec, CatalogError> {
        let (map, k) = match key {
            LookupKey::Sku(k) => (&self.by_sku, k),
            LookupKey::Barcode(k) => (&self.by_barcode, k),
        };
        map.get(k)
            .map(|&i| &self.products[i])
            .ok_or_else(|| CatalogError::NotFound(k.to_string()))
    }

    pub fn by_sku(&self, sku: &str) -> Result<&ProductSpec, CatalogError> {
        self.lookup(LookupKey::Sku(sku))
    }

    /// Sku with the smallest nutrition `attribute`; ties go to the
    /// lexicographically smaller sku.
    pub fn attribute_argmin(&self, skus: &[String], attribute: &str) -> Result<String, CatalogError> {
        if skus.len() < 2 {
            return Err(CatalogError::TooFewCandidates(skus.len()));
        }
        let mut best: Option<(f64, &str)> = None;
        for sku in skus {
            let p = self.by_sku(sku)?;
            let v = *p
                .label
                .nutrition
                .get(attribute)
                .ok_or_else(|| CatalogError::MissingAttribute {
                    sku: sku.clone(),
                    attribute: attribute.to_string(),
                })?;
            best = match best {
                Some((bv, bs)) if bv < v || (bv == v && bs <= sku.as_str()) => Some((bv, bs)),
                _ => Some((v, sku.as_str())),
            };
        }
        Ok(best.expect("at least two candidates").1.to_string())
    }
}

fn validate_record(index: usize, p: &ProductSpec) -> Result<(), CatalogError> {
    let invalid = |field, reason: &str| CatalogError::InvalidField {
        index,
        field,
        reason: reason.to_string(),
    };
    if p.sku.is_empty() {
        return Err(invalid("sku", "empty"));
    }
    if p.price_cents <= 0 {
        return Err(CatalogError::NonPositivePrice {
            index,
            price_cents: p.price_cents,
        });
    }
    if !(p.net_weight_g > 0.0 && p.net_weight_g.is_finite()) {
        return Err(invalid("net_weight_g", "must be positive"));
    }
    for v in [p.extents.x, p.extents.y, p.extents.z] {
        if !(v > 0.0 && v <= 0.5) {
            return Err(invalid("extents", "each half-size must lie in (0, 0.5] m"));
        }
    }
    if p.barcode.len() != 13 || !p.barcode.bytes().all(|b| b.is_ascii_digit()) {
        return Err(invalid("barcode", "must be 13 digits"));
    }
    if p.label.nutrition.values().any(|v| !v.is_finite()) {
        return Err(invalid("label.nutrition", "non-finite value"));
    }
    Ok(())
}

/// EAN-13 check digit for the first 12 digits.
pub fn ean13_check_digit(first12: &str) -> u32 {
    let sum: u32 = first12
        .bytes()
        .take(12)
        .enumerate()
        .map(|(i, b)| {
            let d = (b - b'0') as u32;
            if i % 2 == 0 {
                d
            } else {
                3 * d
            }
        })
        .sum();
    (10 - sum % 10) % 10
}

/// Distinct categories among a set of products, in enum order.
pub fn categories_of<'a>(products: impl IntoIterator<Item = &'a ProductSpec>) -> Vec<Category> {
    let set: HashSet<Category> = products.into_iter().map(|p| p.category).collect();
    let mut v: Vec<Category> = set.into_iter().collect();
    v.sort();
    v
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn product(sku: &str, category: Category, price: i64, sugar: f64) -> ProductSpec {
        let mut nutrition = BTreeMap::new();
        nutrition.insert("sugar_g".to_string(), sugar);
        let h = sku
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        let digits = format!("{:012}", h % 1_000_000_000_000);
        let first12 = digits.as_str();
        ProductSpec {
            sku: sku.to_string(),
            name: format!("Test {sku}"),
            category,
            price_cents: price,
            net_weight_g: 100.0,
            extents: Vec3::new(0.04, 0.06, 0.03),
            label: Label {
                ingredients: String::new(),
                nutrition,
                allergens: vec![],
                origin: String::new(),
            },
            barcode: format!("{first12}{}", ean13_check_digit(first12)),
            mesh_class: MeshClass::Simple,
        }
    }

    fn file(products: &[ProductSpec]) -> String {
        serde_json::json!({"catalog_version": 1, "products": products}).to_string()
    }

    #[test]
    fn empty_catalog_is_valid() {
        let c = Catalog::from_json(&file(&[])).unwrap();
        assert_eq!(c.len(), 0);
        assert!(c.category_counts().is_empty());
    }

    #[test]
    fn duplicate_sku_reports_index() {
        let a = product("X", Category::Chips, 100, 1.0);
        let mut b = product("Y", Category::Chips, 100, 1.0);
        b.sku = "X".into();
        match Catalog::from_json(&file(&[a, b])) {
            Err(CatalogError::DuplicateSku { index, sku }) => {
                assert_eq!(index, 1);
                assert_eq!(sku, "X");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_barcode_rejected() {
        let a = product("A", Category::Chips, 100, 1.0);
        let mut b = product("B", Category::Chips, 100, 1.0);
        b.barcode = a.barcode.clone();
        assert!(matches!(
            Catalog::new(vec![a, b]),
            Err(CatalogError::DuplicateBarcode { index: 1, .. })
        ));
    }

    #[test]
    fn unknown_category_rejected_with_index() {
        let a = product("A", Category::Chips, 100, 1.0);
        let mut v = serde_json::to_value(&a).unwrap();
        v["category"] = "Cereal".into();
        let text = serde_json::json!({"catalog_version": 1, "products": [serde_json::to_value(&a).unwrap(), v]}).to_string();
        assert!(matches!(
            Catalog::from_json(&text),
            Err(CatalogError::UnknownCategory { index: Some(1), .. })
        ));
    }

    #[test]
    fn non_positive_price_rejected() {
        let a = product("A", Category::Chips, 0, 1.0);
        assert!(matches!(
            Catalog::new(vec![a]),
            Err(CatalogError::NonPositivePrice { index: 0, price_cents: 0 })
        ));
    }

    #[test]
    fn lookup_by_sku_and_barcode() {
        let a = product("A", Category::Chips, 100, 1.0);
        let c = Catalog::new(vec![a.clone()]).unwrap();
        assert_eq!(c.lookup(LookupKey::Sku("A")).unwrap(), &a);
        assert_eq!(c.lookup(LookupKey::Barcode(&a.barcode)).unwrap(), &a);
        assert!(matches!(
            c.lookup(LookupKey::Barcode("0000000000000")),
            Err(CatalogError::NotFound(_))
        ));
    }

    #[test]
    fn argmin_picks_lower_sugar_and_breaks_ties_by_sku() {
        let c = Catalog::new(vec![
            product("b2", Category::Biscuit, 100, 25.0),
            product("b1", Category::Biscuit, 100, 10.0),
            product("b0", Category::Biscuit, 100, 25.0),
        ])
        .unwrap();
        let pick = |s: &[&str]| {
            c.attribute_argmin(&s.iter().map(|x| x.to_string()).collect::<Vec<_>>(), "sugar_g")
        };
        assert_eq!(pick(&["b2", "b1"]).unwrap(), "b1");
        assert_eq!(pick(&["b2", "b0"]).unwrap(), "b0");
        assert_eq!(pick(&["b0", "b2"]).unwrap(), "b0");
        assert!(matches!(pick(&["b0"]), Err(CatalogError::TooFewCandidates(1))));
        assert!(matches!(
            c.attribute_argmin(&["b0".into(), "b1".into()], "sodium_mg"),
            Err(CatalogError::MissingAttribute { .. })
        ));
    }

    #[test]
    fn ean13_known_value() {
        // 4006381333931 is a published EAN-13.
        assert_eq!(ean13_check_digit("400638133393"), 1);
    }
}

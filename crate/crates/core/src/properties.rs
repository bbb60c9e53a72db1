//! Physical properties (density or mass, friction, restitution) by object category.
//!
//! Lookup order: a remote estimator when one is configured and answers with values that pass
//! validation, then the category table, then fixed defaults. The function is total.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::convex_hull;
use crate::mesh::TriangleMesh;

pub const DEFAULT_DENSITY: f64 = 500.0;
pub const DEFAULT_FRICTION: f64 = 0.5;
pub const DEFAULT_RESTITUTION: f64 = 0.2;
/// Dynamic friction as a fraction of static friction when only the latter is known.
pub const DYNAMIC_FRICTION_RATIO: f64 = 0.8;
/// Densest plausible object (osmium is ~22 590 kg/m³).
pub const MAX_DENSITY: f64 = 23_000.0;
pub const MAX_FRICTION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalProperties {
    /// kg/m³.
    pub density: f64,
    /// Explicit mass in kg; overrides `density × volume` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    pub static_friction: f64,
    pub dynamic_friction: f64,
    pub restitution: f64,
}

impl PhysicalProperties {
    /// Builds a value with friction clamped to `[0, 2]`, restitution to `[0, 1]`, and dynamic
    /// friction defaulting to `0.8 ×` static.
    pub fn new(density: f64, static_friction: f64, dynamic_friction: Option<f64>, restitution: f64) -> Self {
        let fs = static_friction.clamp(0.0, MAX_FRICTION);
        let fd = dynamic_friction.unwrap_or(fs * DYNAMIC_FRICTION_RATIO).clamp(0.0, MAX_FRICTION);
        PhysicalProperties {
            density,
            mass: None,
            static_friction: fs,
            dynamic_friction: fd,
            restitution: restitution.clamp(0.0, 1.0),
        }
    }

    pub fn defaults() -> Self {
        Self::new(DEFAULT_DENSITY, DEFAULT_FRICTION, None, DEFAULT_RESTITUTION)
    }

    pub fn is_valid(&self) -> bool {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        (positive(self.density) || self.mass.is_some_and(positive))
            && (0.0..=MAX_FRICTION).contains(&self.static_friction)
            && (0.0..=MAX_FRICTION).contains(&self.dynamic_friction)
            && (0.0..=1.0).contains(&self.restitution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertySource {
    Remote,
    Table,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyRequest {
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl PropertyRequest {
    pub fn new(category: &str) -> Self {
        PropertyRequest {
            category: category.to_string(),
            context: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyResponse {
    pub properties: PhysicalProperties,
    pub provenance: PropertySource,
}

/// Raw values as returned by an external estimator, before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatedValues {
    #[serde(default)]
    pub density: Option<f64>,
    #[serde(default)]
    pub mass: Option<f64>,
    pub static_friction: f64,
    #[serde(default)]
    pub dynamic_friction: Option<f64>,
    #[serde(default)]
    pub restitution: Option<f64>,
}

impl EstimatedValues {
    /// Rejects (rather than clamps) anything out of range.
    pub fn validate(&self) -> core::result::Result<PhysicalProperties, String> {
        let in_range = |name: &str, x: f64, lo: f64, hi: f64| {
            if x.is_finite() && x >= lo && x <= hi {
                Ok(x)
            } else {
                Err(alloc::format!("{name} = {x} outside [{lo}, {hi}]"))
            }
        };
        let density = self.density.map(|d| in_range("density", d, f64::MIN_POSITIVE, MAX_DENSITY)).transpose()?;
        let mass = self.mass.map(|m| in_range("mass", m, f64::MIN_POSITIVE, 1e4)).transpose()?;
        if density.is_none() && mass.is_none() {
            return Err("neither density nor mass given".into());
        }
        let fs = in_range("static_friction", self.static_friction, 0.0, MAX_FRICTION)?;
        let fd = self.dynamic_friction.map(|f| in_range("dynamic_friction", f, 0.0, MAX_FRICTION)).transpose()?;
        let e = self.restitution.map(|r| in_range("restitution", r, 0.0, 1.0)).transpose()?;
        let mut p = PhysicalProperties::new(density.unwrap_or(DEFAULT_DENSITY), fs, fd, e.unwrap_or(DEFAULT_RESTITUTION));
        p.mass = mass;
        Ok(p)
    }
}

/// A source of property estimates from a category name and optional visual context.
pub trait PropertyEstimator {
    fn estimate(&self, request: &PropertyRequest) -> core::result::Result<EstimatedValues, String>;
}

/// Category → properties.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PropertyTable {
    pub entries: BTreeMap<String, PhysicalProperties>,
}

/// Lowercase, trimmed, with runs of spaces/underscores/hyphens collapsed to one `-`.
pub fn normalize_category(category: &str) -> String {
    let mut out = String::new();
    let mut sep = false;
    for ch in category.trim().chars() {
        if ch == ' ' || ch == '_' || ch == '-' {
            sep = !out.is_empty();
        } else {
            if sep {
                out.push('-');
                sep = false;
            }
            out.extend(ch.to_lowercase());
        }
    }
    out
}

impl PropertyTable {
    pub fn builtin() -> Self {
        let entries = BUILTIN
            .iter()
            .map(|&(name, density, mu, e)| (name.to_string(), PhysicalProperties::new(density, mu, None, e)))
            .collect();
        PropertyTable { entries }
    }

    /// Exact match on the normalized name, then with a trailing plural `s` removed.
    pub fn lookup(&self, category: &str) -> Option<&PhysicalProperties> {
        let key = normalize_category(category);
        self.entries
            .get(&key)
            .or_else(|| key.strip_suffix('s').and_then(|k| self.entries.get(k)))
    }

    /// Entries of `other` replace or extend this table.
    pub fn merged(mut self, other: PropertyTable) -> Self {
        for (k, v) in other.entries {
            self.entries.insert(normalize_category(&k), v);
        }
        self
    }
}

/// Properties for `request.category`; never fails.
pub fn estimate_properties(
    request: &PropertyRequest,
    table: &PropertyTable,
    client: Option<&dyn PropertyEstimator>,
) -> PropertyResponse {
    if let Some(client) = client {
        match client.estimate(request).and_then(|v| v.validate()) {
            Ok(properties) => {
                return PropertyResponse {
                    properties,
                    provenance: PropertySource::Remote,
                }
            }
            Err(e) => log::warn!("remote property estimate for `{}` rejected: {e}", request.category),
        }
    }
    match table.lookup(&request.category) {
        Some(p) => PropertyResponse {
            properties: *p,
            provenance: PropertySource::Table,
        },
        None => PropertyResponse {
            properties: PhysicalProperties::defaults(),
            provenance: PropertySource::Default,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub mass: f64,
    /// Metric volume in m³.
    pub volume: f64,
    /// The mesh was not closed and its convex hull supplied the volume.
    pub used_convex_hull: bool,
}

/// `density × scale³ × volume`, with the volume from the divergence theorem on closed meshes
/// and from the convex hull otherwise.
pub fn mass_from_density(mesh: &TriangleMesh, scale: f64, density: f64) -> Result<MassEstimate> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::Config("density must be > 0".into()));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config("scale must be > 0".into()));
    }
    let closed = mesh.is_closed();
    let unit_volume = if closed {
        mesh.signed_volume()
    } else {
        convex_hull(&mesh.vertices).map_or(0.0, |h| h.signed_volume())
    };
    if !(unit_volume > 0.0) {
        return Err(Error::Degenerate(alloc::format!("mesh volume {unit_volume} is not positive")));
    }
    let volume = unit_volume * scale * scale * scale;
    Ok(MassEstimate {
        mass: density * volume,
        volume,
        used_convex_hull: !closed,
    })
}

// (category, effective density kg/m³, static friction, restitution).
//
// Densities are whole-object bulk values, i.e. mass over the volume enclosed by the outer
// surface, since generated meshes are solid. Friction is against a dry wooden or laminate
// tabletop. Sources:
//   [ETB-D] Engineering ToolBox, "Densities of Solids" / "Densities of Miscellaneous Solids"
//   [ETB-F] Engineering ToolBox, "Friction and Friction Coefficients for various Materials"
//   [USDA]  USDA FoodData Central serving masses combined with measured dimensions
//   [CRC]   CRC Handbook of Chemistry and Physics, density of common materials
//   [EST]   estimated from typical item mass and outer dimensions
#[rustfmt::skip]
const BUILTIN: &[(&str, f64, f64, f64)] = &[
    // Produce
    ("apple",        800.0, 0.50, 0.30), // [USDA] ~180 g, 7.5 cm diameter
    ("banana",       950.0, 0.55, 0.15), // [USDA] ~120 g over ~125 cm³
    ("orange",       870.0, 0.60, 0.30), // [USDA] ~140 g, 7 cm diameter
    ("lemon",        930.0, 0.60, 0.30), // [USDA] ~100 g
    ("tomato",       990.0, 0.55, 0.20), // [USDA]
    ("potato",      1080.0, 0.55, 0.20), // [CRC] raw potato 1.05–1.10 g/cm³
    ("carrot",      1030.0, 0.50, 0.20), // [USDA]
    ("onion",        950.0, 0.50, 0.25), // [USDA]
    ("egg",         1030.0, 0.45, 0.10), // [CRC] fresh hen egg 1.03 g/cm³
    ("bread",        250.0, 0.70, 0.05), // [EST] 500 g loaf, ~2 L
    // Kitchenware
    ("mug",          900.0, 0.55, 0.25), // [EST] 350 g stoneware mug, ~0.4 L enclosed
    ("cup",          600.0, 0.55, 0.25), // [EST] paper/plastic cup
    ("bowl",         700.0, 0.55, 0.25), // [EST] ceramic bowl incl. cavity
    ("plate",       2000.0, 0.50, 0.30), // [ETB-D] porcelain 2300, thin walls
    ("glass",        800.0, 0.45, 0.30), // [ETB-D] soda-lime 2500, incl. cavity
    ("bottle",       500.0, 0.40, 0.30), // [EST] empty PET/glass bottle incl. cavity
    ("can",          950.0, 0.40, 0.30), // [EST] filled 330 ml beverage can, ~350 g
    ("pan",         1200.0, 0.35, 0.20), // [EST] steel/aluminum pan incl. cavity
    ("pot",          900.0, 0.35, 0.20), // [EST]
    ("spoon",       7900.0, 0.35, 0.40), // [ETB-D] stainless steel 7900
    ("fork",        7900.0, 0.35, 0.40), // [ETB-D] stainless steel 7900
    ("knife",       7900.0, 0.35, 0.40), // [ETB-D] stainless steel 7900
    ("cutting-board", 700.0, 0.50, 0.30), // [ETB-D] hardwood 600–900
    ("sponge",        40.0, 0.90, 0.10), // [EST] cellulose sponge
    // Household
    ("book",         700.0, 0.45, 0.15), // [ETB-D] paper 700–1150, bound
    ("box",          150.0, 0.50, 0.20), // [EST] empty cardboard box
    ("cardboard-box", 150.0, 0.50, 0.20), // [EST]
    ("toy",          300.0, 0.60, 0.50), // [EST] hollow plastic toy
    ("block",        650.0, 0.50, 0.40), // [ETB-D] pine/beech toy block 500–750
    ("ball",         100.0, 0.70, 0.70), // [EST] inflated rubber ball
    ("plush-toy",     60.0, 0.90, 0.05), // [EST]
    ("pen",         1100.0, 0.35, 0.30), // [ETB-D] polystyrene/ABS 1050
    ("marker",       900.0, 0.35, 0.30), // [EST]
    ("scissors",    3000.0, 0.35, 0.30), // [EST] steel blades, plastic handles
    ("remote",       800.0, 0.50, 0.30), // [EST] plastic housing with batteries
    ("phone",       2000.0, 0.40, 0.20), // [EST] ~180 g, ~90 cm³
    ("laptop",      1400.0, 0.40, 0.15), // [EST] ~1.5 kg, ~1.1 L
    ("keyboard",     600.0, 0.50, 0.20), // [EST]
    ("tape",         900.0, 0.50, 0.30), // [EST] roll of tape
    ("towel",        200.0, 0.90, 0.05), // [EST] folded cotton
    ("shoe",         400.0, 0.80, 0.20), // [EST]
    ("plant",        500.0, 0.60, 0.10), // [EST] potted plant with soil
    ("vase",         800.0, 0.50, 0.25), // [EST] ceramic vase incl. cavity
    ("wooden-block", 650.0, 0.50, 0.40), // [ETB-D] softwood/hardwood 500–750, [ETB-F] wood-wood 0.25–0.5
    ("metal-block", 7850.0, 0.60, 0.40), // [ETB-D] carbon steel 7850, [ETB-F] steel-wood 0.2–0.6
    ("rubber-duck",  150.0, 0.80, 0.60), // [EST] hollow PVC
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{axis_box, icosphere};

    struct Fixed(core::result::Result<EstimatedValues, String>);
    impl PropertyEstimator for Fixed {
        fn estimate(&self, _: &PropertyRequest) -> core::result::Result<EstimatedValues, String> {
            self.0.clone()
        }
    }

    #[test]
    fn table_lookup() {
        let t = PropertyTable::builtin();
        let r = estimate_properties(&PropertyRequest::new("banana"), &t, None);
        assert_eq!(r.provenance, PropertySource::Table);
        assert_eq!(r.properties.density, 950.0);
        assert!((r.properties.dynamic_friction - 0.8 * r.properties.static_friction).abs() < 1e-15);
        assert_eq!(estimate_properties(&PropertyRequest::new("  Bananas "), &t, None).provenance, PropertySource::Table);
        assert!(t.lookup("Cutting Board").is_some());
    }

    #[test]
    fn unknown_category_defaults() {
        let r = estimate_properties(&PropertyRequest::new("zzz"), &PropertyTable::builtin(), None);
        assert_eq!(r.provenance, PropertySource::Default);
        assert_eq!(r.properties.density, 500.0);
        assert_eq!(r.properties.static_friction, 0.5);
    }

    #[test]
    fn remote_values_override_when_valid() {
        let v = EstimatedValues {
            density: Some(1234.0),
            mass: None,
            static_friction: 0.7,
            dynamic_friction: None,
            restitution: Some(0.1),
        };
        let r = estimate_properties(&PropertyRequest::new("banana"), &PropertyTable::builtin(), Some(&Fixed(Ok(v))));
        assert_eq!(r.provenance, PropertySource::Remote);
        assert_eq!(r.properties.density, 1234.0);
    }

    #[test]
    fn out_of_range_remote_falls_back() {
        let v = EstimatedValues {
            density: Some(900.0),
            mass: None,
            static_friction: 9.0,
            dynamic_friction: None,
            restitution: None,
        };
        let t = PropertyTable::builtin();
        let r = estimate_properties(&PropertyRequest::new("banana"), &t, Some(&Fixed(Ok(v))));
        assert_eq!(r.provenance, PropertySource::Table);
        let r = estimate_properties(&PropertyRequest::new("zzz"), &t, Some(&Fixed(Err("timeout".into()))));
        assert_eq!(r.provenance, PropertySource::Default);
    }

    #[test]
    fn table_is_valid_and_large_enough() {
        let t = PropertyTable::builtin();
        assert!(t.entries.len() >= 40);
        assert!(t.entries.values().all(|p| p.is_valid()));
        assert_eq!(t.entries.len(), BUILTIN.len(), "duplicate category names");
    }

    #[test]
    fn cube_masses() {
        let cube = axis_box(nalgebra::Vector3::new(1.0, 1.0, 1.0));
        let m = mass_from_density(&cube, 1.0, 1000.0).unwrap();
        assert!((m.mass - 1000.0).abs() < 1e-9);
        assert!(!m.used_convex_hull);
        let m = mass_from_density(&cube, 0.1, 1000.0).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_volume() {
        let s = icosphere(1.0, 3);
        let m = mass_from_density(&s, 1.0, 1.0).unwrap();
        let exact = 4.0 / 3.0 * core::f64::consts::PI;
        assert!((m.volume / exact - 1.0).abs() < 0.02);
    }

    #[test]
    fn open_mesh_uses_hull() {
        let mut cube = axis_box(nalgebra::Vector3::new(1.0, 2.0, 1.0));
        cube.triangles.truncate(10);
        let m = mass_from_density(&cube, 1.0, 1.0).unwrap();
        assert!(m.used_convex_hull);
        assert!((m.volume - 2.0).abs() < 1e-9);
        assert!(mass_from_density(&cube, 1.0, 0.0).is_err());
    }

    #[test]
    fn mass_is_cubic_in_scale() {
        let s = crate::primitives::wedge_block(nalgebra::Vector3::new(0.3, 0.2, 0.1), 0.3, 0.2);
        let base = mass_from_density(&s, 1.0, 700.0).unwrap().mass;
        for k in [0.1, 0.5, 2.0, 3.7] {
            let m = mass_from_density(&s, k, 700.0).unwrap().mass;
            assert!((m / (base * k * k * k) - 1.0).abs() < 1e-12);
        }
    }
}

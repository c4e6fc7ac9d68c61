use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CATALOG_VERSION: &str = "morpho/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Density,
    Complexity,
    Tortuosity,
    Caliber,
    Branching,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub family: Family,
}

pub(crate) const SCALARS: [(&str, Family); 6] = [
    ("vessel_area_density", Family::Density),
    ("vessel_skeleton_density", Family::Density),
    ("branching_density", Family::Density),
    ("fractal_dimension", Family::Complexity),
    ("n_terminal_points", Family::Complexity),
    ("n_components", Family::Complexity),
];

/// Per-segment and per-junction quantities, each consolidated four ways.
pub(crate) const CONSOLIDATED: [(&str, Family); 22] = [
    ("arc_length", Family::Density),
    ("chord_length", Family::Density),
    ("strahler", Family::Complexity),
    ("level", Family::Complexity),
    ("tortuosity", Family::Tortuosity),
    ("tortuosity_density", Family::Tortuosity),
    ("inflection_count", Family::Tortuosity),
    ("inflection_tortuosity", Family::Tortuosity),
    ("curve_angle", Family::Tortuosity),
    ("curve_angle_tortuosity", Family::Tortuosity),
    ("angle_tortuosity", Family::Tortuosity),
    ("fractal_tortuosity", Family::Tortuosity),
    ("mean_caliber", Family::Caliber),
    ("min_caliber", Family::Caliber),
    ("max_caliber", Family::Caliber),
    ("caliber_range", Family::Caliber),
    ("surface_area", Family::Caliber),
    ("length_diameter_ratio", Family::Caliber),
    ("terminal_caliber", Family::Caliber),
    ("branching_angle", Family::Branching),
    ("angular_asymmetry", Family::Branching),
    ("asymmetry_ratio", Family::Branching),
];

pub(crate) const STATS: [&str; 4] = ["mean", "sd", "max", "min"];

/// Ordered measurement names with their family.
pub fn metrics_catalog() -> Vec<CatalogEntry> {
    let mut out: Vec<CatalogEntry> = SCALARS
        .iter()
        .map(|&(name, family)| CatalogEntry {
            name: name.to_string(),
            family,
        })
        .collect();
    for &(base, family) in &CONSOLIDATED {
        for stat in STATS {
            out.push(CatalogEntry {
                name: format!("{base}_{stat}"),
                family,
            });
        }
    }
    out
}

/// Hex SHA-256 over the version and the ordered names and families.
pub fn catalog_fingerprint() -> String {
    let mut h = Sha256::new();
    h.update(CATALOG_VERSION.as_bytes());
    for e in metrics_catalog() {
        h.update(b"\n");
        h.update(e.name.as_bytes());
        h.update(b"\t");
        h.update(format!("{:?}", e.family).as_bytes());
    }
    hex::encode(h.finalize())
}

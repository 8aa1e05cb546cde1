//! Species catalog stored as JSON.
//!
//! ```json
//! { "species": [ { "name": "NV", "S": 1, "D_MHz": 2870.0, "E_MHz": 0.0,
//!                  "gamma_e_MHz_per_G": 2.8025, "orientation": "111",
//!                  "nuclear": { "I": 0.5, "gamma_n_MHz_per_G": 0.00107,
//!                               "A_MHz": [[..],[..],[..]], "quadrupole_P_MHz": 0.0 } } ] }
//! ```

use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::{NuclearSpin, SpinError, SpinSpecies, SpinValue, SymmetryKind};

/// Catalog shipped with the crate: NV, an alternate NV entry, VH⁻, WAR1, P1 and NV–¹³C.
pub const BUILTIN_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("catalog is not valid JSON for the species schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog entry '{name}': {message}")]
    Invalid { name: String, message: String },
    #[error("duplicate species name '{0}'")]
    Duplicate(String),
    #[error("species '{0}' not found in catalog")]
    Unknown(String),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    species: Vec<SpeciesEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesEntry {
    pub name: String,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "D_MHz")]
    pub d_mhz: f64,
    #[serde(rename = "E_MHz", default)]
    pub e_mhz: f64,
    #[serde(rename = "gamma_e_MHz_per_G")]
    pub gamma_e: f64,
    pub orientation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nuclear: Option<NuclearEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuclearEntry {
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "gamma_n_MHz_per_G")]
    pub gamma_n: f64,
    #[serde(rename = "A_MHz")]
    pub a_mhz: [[f64; 3]; 3],
    #[serde(rename = "quadrupole_P_MHz", default)]
    pub quadrupole_p: Option<f64>,
}

impl SpeciesEntry {
    pub fn to_species(&self) -> Result<SpinSpecies, CatalogError> {
        let invalid = |message: String| CatalogError::Invalid {
            name: self.name.clone(),
            message,
        };
        let spin = SpinValue::from_f64(self.s).map_err(|e| invalid(e.to_string()))?;
        let symmetry = match self.orientation.as_str() {
            "111" => SymmetryKind::Trigonal111,
            "lab" => SymmetryKind::Lab,
            other => return Err(invalid(format!("orientation must be \"111\" or \"lab\", got {other:?}"))),
        };
        let nuclear = match &self.nuclear {
            None => None,
            Some(n) => {
                let nspin = SpinValue::from_f64(n.i).map_err(|e| invalid(e.to_string()))?;
                if nspin == SpinValue::Half && n.quadrupole_p.is_some_and(|p| p != 0.0) {
                    return Err(invalid("quadrupole_P_MHz given for a spin-1/2 nucleus".into()));
                }
                let a = n.a_mhz;
                Some(NuclearSpin {
                    spin: nspin,
                    gamma_n: n.gamma_n,
                    hyperfine: Matrix3::from_fn(|r, c| a[r][c]),
                    quadrupole_p: n.quadrupole_p.unwrap_or(0.0),
                })
            }
        };
        let species = SpinSpecies {
            name: self.name.clone(),
            spin,
            d: self.d_mhz,
            e: self.e_mhz,
            gamma_e: self.gamma_e,
            symmetry,
            nuclear,
        };
        species.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(species)
    }
}

/// Validated set of species, looked up by name.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: Vec<SpeciesEntry>,
    species: Vec<SpinSpecies>,
}

impl Catalog {
    /// Parses and fully validates every entry.
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let mut species = Vec::with_capacity(file.species.len());
        for entry in &file.species {
            if species.iter().any(|s: &SpinSpecies| s.name == entry.name) {
                return Err(CatalogError::Duplicate(entry.name.clone()));
            }
            species.push(entry.to_species()?);
        }
        Ok(Catalog {
            entries: file.species,
            species,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG).expect("shipped catalog is valid")
    }

    pub fn get(&self, name: &str) -> Result<&SpinSpecies, CatalogError> {
        self.species
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| CatalogError::Unknown(name.to_string()))
    }

    pub fn source(&self, name: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .and_then(|e| e.source.as_deref())
    }

    pub fn species(&self) -> &[SpinSpecies] {
        &self.species
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.species.iter().map(|s| s.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_expected_species() {
        let c = Catalog::builtin();
        for n in ["NV", "VH-", "WAR1", "P1", "NV13C", "NV_2872"] {
            assert!(c.get(n).is_ok(), "{n}");
        }
        assert_eq!(c.get("P1").unwrap().dim(), 6);
        assert_eq!(c.get("NV13C").unwrap().dim(), 6);
        assert_eq!(c.get("VH-").unwrap().d, 2694.0);
        assert!(c.source("P1").unwrap().contains("external"));
        assert!(matches!(c.get("XYZ"), Err(CatalogError::Unknown(_))));
    }

    #[test]
    fn rejects_bad_entries() {
        let base = r#"{"species":[{"name":"X","S":1,"D_MHz":1,"gamma_e_MHz_per_G":2.8,"orientation":"111"}]}"#;
        assert!(Catalog::from_json(base).is_ok());
        let bad_s = base.replace("\"S\":1", "\"S\":1.5");
        assert!(matches!(Catalog::from_json(&bad_s), Err(CatalogError::Invalid { .. })));
        let bad_o = base.replace("\"111\"", "\"110\"");
        assert!(Catalog::from_json(&bad_o).is_err());
        let unknown = base.replace("\"S\":1", "\"S\":1,\"extra\":3");
        assert!(matches!(Catalog::from_json(&unknown), Err(CatalogError::Parse(_))));
        let missing = base.replace("\"D_MHz\":1,", "");
        assert!(Catalog::from_json(&missing).is_err());
        let dup = r#"{"species":[{"name":"X","S":1,"D_MHz":1,"gamma_e_MHz_per_G":2.8,"orientation":"111"},
                                 {"name":"X","S":1,"D_MHz":2,"gamma_e_MHz_per_G":2.8,"orientation":"lab"}]}"#;
        assert!(matches!(Catalog::from_json(dup), Err(CatalogError::Duplicate(_))));
    }
}

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::geometry::{DefectFrame, OrientationClass};
use super::operators::SpinValue;
use super::SpinError;

/// Standard free-electron-like gyromagnetic ratio, MHz/G.
pub const GAMMA_E: f64 = 2.8025;
/// ¹³C nuclear gyromagnetic ratio, 10.7 MHz/T expressed in MHz/G.
pub const GAMMA_C13: f64 = 10.7e-4;
/// Default NV⁻ ground-state zero-field splitting, MHz.
pub const D_NV: f64 = 2870.0;

/// How the defect frame relates to the crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryKind {
    /// Trigonal defect along one of the four ⟨111⟩ axes.
    Trigonal111,
    /// Hamiltonian written directly in the crystal frame; one instance only.
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearSpin {
    pub spin: SpinValue,
    /// MHz/G.
    pub gamma_n: f64,
    /// Hyperfine tensor in the defect frame, MHz.
    pub hyperfine: Matrix3<f64>,
    /// Quadrupole constant P (I = 1 only), MHz.
    pub quadrupole_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSpecies {
    pub name: String,
    pub spin: SpinValue,
    /// MHz.
    pub d: f64,
    /// MHz.
    pub e: f64,
    /// MHz/G.
    pub gamma_e: f64,
    pub symmetry: SymmetryKind,
    pub nuclear: Option<NuclearSpin>,
}

impl SpinSpecies {
    /// Bare S = 1 trigonal defect with E = 0.
    pub fn spin_one(name: impl Into<String>, d: f64, gamma_e: f64) -> Self {
        SpinSpecies {
            name: name.into(),
            spin: SpinValue::One,
            d,
            e: 0.0,
            gamma_e,
            symmetry: SymmetryKind::Trigonal111,
            nuclear: None,
        }
    }

    pub fn nv() -> Self {
        Self::spin_one("NV", D_NV, GAMMA_E)
    }

    pub fn with_d(&self, d: f64) -> Self {
        SpinSpecies { d, ..self.clone() }
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        SpinSpecies {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let bad = |msg: String| Err(SpinError::InvalidSpecies(self.name.clone(), msg));
        if self.name.trim().is_empty() {
            return bad("empty name".into());
        }
        for (label, v) in [("D", self.d), ("E", self.e), ("gamma_e", self.gamma_e)] {
            if !v.is_finite() {
                return bad(format!("{label} is not finite"));
            }
        }
        if let Some(n) = &self.nuclear {
            if !n.gamma_n.is_finite() || !n.quadrupole_p.is_finite() {
                return bad("nuclear constants not finite".into());
            }
            if n.hyperfine.iter().any(|v| !v.is_finite()) {
                return bad("hyperfine tensor not finite".into());
            }
            if n.spin == SpinValue::Half && n.quadrupole_p != 0.0 {
                return bad("quadrupole term requires a spin-1 nucleus".into());
            }
            let asym = (n.hyperfine - n.hyperfine.transpose()).abs().max();
            if asym > 1e-9 {
                return bad(format!("hyperfine tensor not symmetric (max |A-Aᵀ| = {asym})"));
            }
        }
        Ok(())
    }

    pub fn nuclear_dim(&self) -> usize {
        self.nuclear.as_ref().map_or(1, |n| n.spin.dim())
    }

    /// (2S+1)(2I+1).
    pub fn dim(&self) -> usize {
        self.spin.dim() * self.nuclear_dim()
    }

    /// Orientation classes that give distinct instances of this species.
    pub fn classes(&self) -> Vec<OrientationClass> {
        match self.symmetry {
            SymmetryKind::Trigonal111 => OrientationClass::all().to_vec(),
            SymmetryKind::Lab => vec![OrientationClass::all()[0]],
        }
    }

    pub fn frame(&self, orientation: OrientationClass) -> DefectFrame {
        match self.symmetry {
            SymmetryKind::Trigonal111 => orientation.frame(),
            SymmetryKind::Lab => DefectFrame::identity(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(SpinSpecies::nv().dim(), 3);
        let mut p1 = SpinSpecies::nv();
        p1.spin = SpinValue::Half;
        p1.nuclear = Some(NuclearSpin {
            spin: SpinValue::One,
            gamma_n: 0.0,
            hyperfine: Matrix3::identity(),
            quadrupole_p: -4.0,
        });
        assert_eq!(p1.dim(), 6);
        p1.validate().unwrap();
    }

    #[test]
    fn rejects_asymmetric_hyperfine() {
        let mut s = SpinSpecies::nv();
        let mut a = Matrix3::zeros();
        a[(0, 2)] = 1.0;
        s.nuclear = Some(NuclearSpin {
            spin: SpinValue::Half,
            gamma_n: GAMMA_C13,
            hyperfine: a,
            quadrupole_p: 0.0,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn rejects_quadrupole_on_half_spin() {
        let mut s = SpinSpecies::nv();
        s.nuclear = Some(NuclearSpin {
            spin: SpinValue::Half,
            gamma_n: GAMMA_C13,
            hyperfine: Matrix3::zeros(),
            quadrupole_p: 1.0,
        });
        assert!(s.validate().is_err());
    }
}

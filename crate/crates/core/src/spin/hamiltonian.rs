use nalgebra::Vector3;
use num_complex::Complex64;

use super::geometry::{DefectFrame, MagneticField, OrientationClass};
use super::operators::{kron, spin_operators, CMatrix, SpinValue};
use super::species::SpinSpecies;
use super::SpinError;

/// Hermiticity tolerance for assembled Hamiltonians, MHz.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Dense Hermitian Hamiltonian in MHz, basis |m_s⟩ ⊗ |m_I⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    entries: CMatrix,
}

impl HamiltonianMatrix {
    pub fn new(entries: CMatrix) -> Result<Self, SpinError> {
        if !entries.is_square() {
            return Err(SpinError::NotHermitian(f64::INFINITY));
        }
        let dev = hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(SpinError::NotHermitian(dev));
        }
        Ok(HamiltonianMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Full spin Hamiltonian for one instance of `species`:
///
/// H = D Sz² + E (Sx² - Sy²) + γe B·S [+ γn B·I + S·A·I + P (Iz² - I(I+1)/3)]
///
/// with B rotated into the defect frame of `orientation`.
pub fn build_hamiltonian(
    species: &SpinSpecies,
    field: &MagneticField,
    orientation: OrientationClass,
) -> HamiltonianMatrix {
    build_in_frame(species, field, &species.frame(orientation))
}

/// Same as [`build_hamiltonian`] with an explicit defect frame.
pub fn build_in_frame(
    species: &SpinSpecies,
    field: &MagneticField,
    frame: &DefectFrame,
) -> HamiltonianMatrix {
    let b: Vector3<f64> = frame.to_defect(&field.vector());
    let s = spin_operators(species.spin);

    let mut electron = &s.z * &s.z * c(species.d);
    if species.e != 0.0 {
        electron += (&s.x * &s.x - &s.y * &s.y) * c(species.e);
    }
    for (k, op) in s.components().into_iter().enumerate() {
        if b[k] != 0.0 {
            electron += op * c(species.gamma_e * b[k]);
        }
    }

    let Some(nuc) = &species.nuclear else {
        return HamiltonianMatrix { entries: electron };
    };

    let i_ops = spin_operators(nuc.spin);
    let id_n = i_ops.identity();
    let id_e = s.identity();

    let mut h = kron(&electron, &id_n);
    for (k, op) in i_ops.components().into_iter().enumerate() {
        if b[k] != 0.0 && nuc.gamma_n != 0.0 {
            h += kron(&id_e, op) * c(nuc.gamma_n * b[k]);
        }
    }
    let s_comp = s.components();
    let i_comp = i_ops.components();
    for a in 0..3 {
        for bb in 0..3 {
            let coupling = nuc.hyperfine[(a, bb)];
            if coupling != 0.0 {
                h += kron(s_comp[a], i_comp[bb]) * c(coupling);
            }
        }
    }
    if nuc.spin == SpinValue::One && nuc.quadrupole_p != 0.0 {
        let iz2 = &i_ops.z * &i_ops.z - &id_n * c(2.0 / 3.0);
        h += kron(&id_e, &iz2) * c(nuc.quadrupole_p);
    }

    // Products of Hermitian factors leave round-off asymmetry at the 1e-13 level.
    let h = (&h + h.adjoint()) * c(0.5);
    HamiltonianMatrix { entries: h }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::species::{NuclearSpin, GAMMA_C13, GAMMA_E};
    use nalgebra::Matrix3;

    fn eigvals(h: &HamiltonianMatrix) -> Vec<f64> {
        let mut v: Vec<f64> = h.entries().clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn nv_zero_field() {
        let h = build_hamiltonian(&SpinSpecies::nv(), &MagneticField::zero(), OrientationClass::all()[0]);
        let v = eigvals(&h);
        assert!(v[0].abs() < 1e-12);
        assert!((v[1] - 2870.0).abs() < 1e-9 && (v[2] - 2870.0).abs() < 1e-9);
    }

    #[test]
    fn zeeman_part_traceless() {
        let mut s = SpinSpecies::nv().with_d(0.0);
        s.nuclear = Some(NuclearSpin {
            spin: SpinValue::One,
            gamma_n: GAMMA_C13,
            hyperfine: Matrix3::zeros(),
            quadrupole_p: 0.0,
        });
        let f = MagneticField::new(73.0, Vector3::new(0.3, -0.2, 0.9)).unwrap();
        for o in OrientationClass::all() {
            let h = build_hamiltonian(&s, &f, o);
            assert!(h.entries().trace().norm() < 1e-12);
            assert!(hermitian_deviation(h.entries()) < HERMITIAN_TOL);
        }
    }

    #[test]
    fn axial_field_exact() {
        let nv = SpinSpecies::nv();
        let o = OrientationClass::all()[0];
        let f = MagneticField::new(100.0, o.symmetry_axis()).unwrap();
        let v = eigvals(&build_hamiltonian(&nv, &f, o));
        let lo = 2870.0 - GAMMA_E * 100.0;
        let hi = 2870.0 + GAMMA_E * 100.0;
        assert!((v[1] - v[0] - lo).abs() < 1e-9, "{v:?}");
        assert!((v[2] - v[0] - hi).abs() < 1e-9);
        assert!((lo - 2589.75).abs() < 1e-12 && (hi - 3150.25).abs() < 1e-12);
    }

    #[test]
    fn strain_splits_zero_field() {
        let mut s = SpinSpecies::nv();
        s.e = 5.0;
        let v = eigvals(&build_hamiltonian(&s, &MagneticField::zero(), OrientationClass::all()[0]));
        assert!(v[0].abs() < 1e-9);
        assert!((v[1] - 2865.0).abs() < 1e-9);
        assert!((v[2] - 2875.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0);
        assert!(matches!(HamiltonianMatrix::new(m), Err(SpinError::NotHermitian(_))));
    }
}

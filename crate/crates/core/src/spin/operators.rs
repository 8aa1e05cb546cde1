//! Angular-momentum matrices in the |m = S, S-1, ..., -S⟩ basis.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SpinError;

pub type CMatrix = DMatrix<Complex64>;

/// Spin quantum numbers supported by the Hamiltonian builder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinValue {
    Half,
    One,
}

impl SpinValue {
    pub fn from_f64(s: f64) -> Result<Self, SpinError> {
        if (s - 0.5).abs() < 1e-12 {
            Ok(SpinValue::Half)
        } else if (s - 1.0).abs() < 1e-12 {
            Ok(SpinValue::One)
        } else {
            Err(SpinError::UnsupportedSpin(s))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            SpinValue::Half => 0.5,
            SpinValue::One => 1.0,
        }
    }

    /// Multiplicity 2S + 1.
    pub fn dim(self) -> usize {
        match self {
            SpinValue::Half => 2,
            SpinValue::One => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

impl SpinOperators {
    pub fn components(&self) -> [&CMatrix; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.z.nrows(), self.z.ncols())
    }
}

/// Builds Sx, Sy, Sz from the ladder operators S±.
pub fn spin_operators(spin: SpinValue) -> SpinOperators {
    let s = spin.value();
    let n = spin.dim();
    let m = |k: usize| s - k as f64;

    let mut plus = CMatrix::zeros(n, n);
    for k in 1..n {
        // S+ |m⟩ = sqrt(S(S+1) - m(m+1)) |m+1⟩, row k-1 holds m+1.
        let mk = m(k);
        plus[(k - 1, k)] = Complex64::new((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();

    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, -0.5);
    let x = (&plus + &minus) * half;
    let y = (&plus - &minus) * half_i;
    let z = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| {
        Complex64::new(m(k), 0.0)
    }));
    SpinOperators { x, y, z }
}

/// Kronecker product, electron factor first.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn half_sz_is_diagonal() {
        let ops = spin_operators(SpinValue::Half);
        assert_eq!(ops.z[(0, 0)].re, 0.5);
        assert_eq!(ops.z[(1, 1)].re, -0.5);
        assert_eq!(ops.z[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn one_casimir_and_commutator() {
        let ops = spin_operators(SpinValue::One);
        let diag: Vec<f64> = (0..3).map(|k| ops.z[(k, k)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);

        let casimir = &ops.x * &ops.x + &ops.y * &ops.y + &ops.z * &ops.z;
        let two = ops.identity() * Complex64::new(2.0, 0.0);
        assert!(max_abs(&(casimir - two)) < 1e-14);

        let i = Complex64::new(0.0, 1.0);
        let comm = |a: &CMatrix, b: &CMatrix| a * b - b * a;
        assert!(max_abs(&(comm(&ops.x, &ops.y) - &ops.z * i)) < 1e-14);
        assert!(max_abs(&(comm(&ops.y, &ops.z) - &ops.x * i)) < 1e-14);
        assert!(max_abs(&(comm(&ops.z, &ops.x) - &ops.y * i)) < 1e-14);
    }

    #[test]
    fn half_commutator() {
        let ops = spin_operators(SpinValue::Half);
        let i = Complex64::new(0.0, 1.0);
        let c = &ops.x * &ops.y - &ops.y * &ops.x - &ops.z * i;
        assert!(max_abs(&c) < 1e-15);
    }

    #[test]
    fn rejects_unsupported_spin() {
        assert!(matches!(
            SpinValue::from_f64(1.5),
            Err(SpinError::UnsupportedSpin(_))
        ));
        assert_eq!(SpinValue::from_f64(0.5).unwrap(), SpinValue::Half);
    }
}

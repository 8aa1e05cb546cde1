//! Dense Hermitian eigendecomposition (nalgebra's symmetric QR under the hood).

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use super::hamiltonian::{hermitian_deviation, HamiltonianMatrix, HERMITIAN_TOL};
use super::operators::CMatrix;
use super::SpinError;

/// Ascending eigenvalues (MHz) and the matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Largest ‖H v − λ v‖ over all pairs.
    pub fn max_residual(&self, h: &CMatrix) -> f64 {
        (0..self.dim())
            .map(|k| {
                let v = self.vectors.column(k);
                (h * v - v * Complex64::new(self.values[k], 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest |⟨v_i|v_j⟩ − δ_ij|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        let n = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        err
    }
}

pub fn eigensystem(h: &HamiltonianMatrix) -> Eigensystem {
    decompose(h.entries().clone())
}

/// Checked entry point for raw matrices.
pub fn eigensystem_of(m: &CMatrix) -> Result<Eigensystem, SpinError> {
    if !m.is_square() {
        return Err(SpinError::NotHermitian(f64::INFINITY));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(SpinError::NotHermitian(dev));
    }
    Ok(decompose(m.clone()))
}

fn decompose(m: CMatrix) -> Eigensystem {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let columns: Vec<DVector<Complex64>> = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).into_owned())
        .collect();
    let vectors = CMatrix::from_columns(&columns);
    Eigensystem { values, vectors }
}

//! Quartic photoluminescence envelope, fitted outside the dip windows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AbscissaKind, Spectrum, SpectrumError};

pub const ORDER: usize = 4;
const NCOEF: usize = ORDER + 1;
/// Points required outside the excluded windows.
pub const MIN_FREE_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    /// c0..c4 of c0 + c1·x + … + c4·x⁴ in the scan's own abscissa.
    pub coefficients: [f64; NCOEF],
    pub excluded_windows: Vec<(f64, f64)>,
    /// Coefficients in the scaled variable u = (x − center) / scale.
    pub scaled_coefficients: [f64; NCOEF],
    pub center: f64,
    pub scale: f64,
    /// (AᵀA)⁻¹ of the scaled design matrix.
    pub scaled_design_inverse: [[f64; NCOEF]; NCOEF],
    /// Residual variance estimate s² over the fitted points.
    pub residual_variance: f64,
    pub residual_rms: f64,
    pub points_used: usize,
}

impl BaselineFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.scale;
        self.scaled_coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// s²·(AᵀA)⁻¹ for the scaled coefficients.
    pub fn scaled_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(NCOEF, NCOEF, |i, j| self.scaled_design_inverse[i][j] * self.residual_variance)
    }

    /// The scan minus the baseline.
    pub fn subtract(&self, spectrum: &Spectrum) -> Spectrum {
        let r = spectrum.points().map(|(x, y)| y - self.evaluate(x)).collect();
        spectrum.with_counts(r)
    }
}

pub fn in_windows(x: f64, windows: &[(f64, f64)]) -> bool {
    windows.iter().any(|&(a, b)| x >= a.min(b) && x <= a.max(b))
}

/// Ordinary least squares of order 4 over the points outside `excluded_windows`.
pub fn fit_baseline(spectrum: &Spectrum, excluded_windows: &[(f64, f64)]) -> Result<BaselineFit, SpectrumError> {
    if spectrum.kind() != AbscissaKind::Field {
        return Err(SpectrumError::Invalid("baseline fit expects a field-calibrated scan".into()));
    }
    fit_polynomial(spectrum, excluded_windows, ORDER)
}

/// OLS polynomial of any order up to 4; lower orders leave the top coefficients at zero.
pub fn fit_polynomial(spectrum: &Spectrum, excluded_windows: &[(f64, f64)], order: usize) -> Result<BaselineFit, SpectrumError> {
    assert!(order <= ORDER);
    let pts: Vec<(f64, f64)> = spectrum.points().filter(|p| !in_windows(p.0, excluded_windows)).collect();
    let ncoef = order + 1;
    let needed = MIN_FREE_POINTS.max(ncoef + 1);
    if pts.len() < needed {
        return Err(SpectrumError::Underdetermined {
            needed,
            available: pts.len(),
        });
    }
    let (lo, hi) = spectrum.range();
    let center = 0.5 * (lo + hi);
    let scale = 0.5 * (hi - lo);
    let n = pts.len();
    let a = DMatrix::from_fn(n, ncoef, |i, k| ((pts[i].0 - center) / scale).powi(k as i32));
    let y = DVector::from_iterator(n, pts.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(SpectrumError::Underdetermined {
            needed,
            available: pts.len(),
        });
    }
    let beta = svd.solve(&y, 0.0).map_err(|e| SpectrumError::Invalid(e.to_string()))?;
    let v_t = svd.v_t.as_ref().unwrap();
    let inv_s2 = svd.singular_values.map(|s| 1.0 / (s * s));
    let design_inv = v_t.transpose() * DMatrix::from_diagonal(&inv_s2) * v_t;

    let resid = &y - &a * &beta;
    let ss = resid.norm_squared();
    let dof = (n - ncoef).max(1) as f64;

    let mut scaled = [0.0; NCOEF];
    let mut inv = [[0.0; NCOEF]; NCOEF];
    for i in 0..ncoef {
        scaled[i] = beta[i];
        for j in 0..ncoef {
            inv[i][j] = design_inv[(i, j)];
        }
    }
    Ok(BaselineFit {
        coefficients: unscale(&scaled, center, scale),
        excluded_windows: excluded_windows.to_vec(),
        scaled_coefficients: scaled,
        center,
        scale,
        scaled_design_inverse: inv,
        residual_variance: ss / dof,
        residual_rms: (ss / n as f64).sqrt(),
        points_used: n,
    })
}

/// Σ a_k ((x − c)/s)^k expanded into powers of x.
fn unscale(a: &[f64; NCOEF], c: f64, s: f64) -> [f64; NCOEF] {
    let mut out = [0.0; NCOEF];
    for (k, &ak) in a.iter().enumerate() {
        let w = ak / s.powi(k as i32);
        for j in 0..=k {
            out[j] += w * binomial(k, j) * (-c).powi((k - j) as i32);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

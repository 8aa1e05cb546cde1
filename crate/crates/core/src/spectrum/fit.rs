//! Levenberg–Marquardt fit of a single Gaussian dip.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::peaks::PeakWindow;
use super::{Spectrum, SpectrumError};

pub const MIN_WINDOW_POINTS: usize = 7;
pub const MAX_ITERATIONS: usize = 200;
const REL_COST_TOL: f64 = 1e-10;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
/// Runs-test z below this flags a systematic misfit.
pub const RUNS_Z_LIMIT: f64 = -3.0;
/// Residual RMS below this fraction of the depth counts as a perfect fit.
const PERFECT_FIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub center: f64,
    pub sigma: f64,
    /// Positive dip amplitude, counts.
    pub depth: f64,
    /// Parameter order: center, sigma, depth.
    pub covariance: [[f64; 3]; 3],
    /// depth / baseline(center), once a baseline is known.
    pub contrast: Option<f64>,
    pub window: (f64, f64),
    pub converged: bool,
    pub iterations: usize,
    pub residual_rms: f64,
    /// Wald–Wolfowitz runs statistic of the residual signs.
    pub runs_z: f64,
    pub poor_fit: bool,
    pub edge_truncated: bool,
}

impl PeakFit {
    /// A fit result known only by its center and center uncertainty.
    pub fn from_center(center: f64, center_sigma: f64) -> Self {
        let mut covariance = [[0.0; 3]; 3];
        covariance[0][0] = center_sigma * center_sigma;
        PeakFit {
            center,
            sigma: 1.0,
            depth: 1.0,
            covariance,
            contrast: None,
            window: (center, center),
            converged: true,
            iterations: 0,
            residual_rms: 0.0,
            runs_z: 0.0,
            poor_fit: false,
            edge_truncated: false,
        }
    }

    pub fn center_sigma(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    pub fn center_in_window(&self) -> bool {
        self.center >= self.window.0 && self.center <= self.window.1
    }
}

fn model(x: f64, p: &Vector3<f64>) -> f64 {
    -p[2] * (-(x - p[0]).powi(2) / (2.0 * p[1] * p[1])).exp()
}

/// ∂model/∂(center, sigma, depth).
fn gradient(x: f64, p: &Vector3<f64>) -> Vector3<f64> {
    let (c, s, a) = (p[0], p[1], p[2]);
    let d = x - c;
    let e = (-d * d / (2.0 * s * s)).exp();
    Vector3::new(-a * e * d / (s * s), -a * e * d * d / (s * s * s), -e)
}

fn cost(pts: &[(f64, f64)], p: &Vector3<f64>) -> f64 {
    0.5 * pts.iter().map(|&(x, y)| (y - model(x, p)).powi(2)).sum::<f64>()
}

fn normal_equations(pts: &[(f64, f64)], p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for &(x, y) in pts {
        let g = gradient(x, p);
        jtj += g * g.transpose();
        jtr += g * (y - model(x, p));
    }
    (jtj, jtr)
}

fn runs_z(residuals: &[f64]) -> f64 {
    let signs: Vec<bool> = residuals.iter().filter(|r| **r != 0.0).map(|r| *r > 0.0).collect();
    let n = signs.len() as f64;
    let n1 = signs.iter().filter(|s| **s).count() as f64;
    let n2 = n - n1;
    if n1 == 0.0 || n2 == 0.0 {
        return f64::NEG_INFINITY;
    }
    let runs = 1.0 + signs.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let mean = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
    if var <= 0.0 {
        return 0.0;
    }
    (runs - mean) / var.sqrt()
}

/// Fits −depth·exp(−(x−center)²/2σ²) to the residual points inside `window`.
pub fn fit_gaussian(residual: &Spectrum, window: &PeakWindow) -> Result<PeakFit, SpectrumError> {
    let pts: Vec<(f64, f64)> = residual.points().filter(|p| window.contains(p.0)).collect();
    if pts.len() < MIN_WINDOW_POINTS {
        return Err(SpectrumError::Underdetermined {
            needed: MIN_WINDOW_POINTS,
            available: pts.len(),
        });
    }
    let span = window.hi - window.lo;
    let dx = span / (pts.len() - 1) as f64;

    let (imin, &(xmin, ymin)) = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .unwrap();
    let lo = imin.saturating_sub(1);
    let hi = (imin + 2).min(pts.len());
    let local = pts[lo..hi].iter().map(|p| p.1).sum::<f64>() / (hi - lo) as f64;
    let c0 = if window.depth > 0.0 { window.center } else { xmin };
    let depth0 = (-local).max(-ymin * 0.5).max(f64::MIN_POSITIVE);
    let wsum: f64 = pts.iter().map(|p| (-p.1).max(0.0)).sum();
    let moment = if wsum > 0.0 {
        (pts.iter().map(|p| (-p.1).max(0.0) * (p.0 - c0).powi(2)).sum::<f64>() / wsum).sqrt()
    } else {
        span / 6.0
    };
    let sigma0 = moment.clamp(dx, span / 2.0);

    let mut p = Vector3::new(c0, sigma0, depth0);
    let mut f = cost(&pts, &p);
    let scale: f64 = pts.iter().map(|q| q.1 * q.1).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut lambda = LAMBDA_START;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if f <= 1e-30 * scale {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&pts, &p);
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let f_trial = if trial[1] > 0.0 && trial[2].is_finite() { cost(&pts, &trial) } else { f64::INFINITY };
            if f_trial <= f {
                let rel = (f - f_trial) / f.max(f64::MIN_POSITIVE);
                p = trial;
                f = f_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < REL_COST_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step left at any damping
            converged = true;
        }
        if converged {
            break;
        }
    }

    let residuals: Vec<f64> = pts.iter().map(|&(x, y)| y - model(x, &p)).collect();
    let n = pts.len() as f64;
    let rms = (2.0 * f / n).sqrt();
    let (jtj, _) = normal_equations(&pts, &p);
    let s2 = 2.0 * f / (n - 3.0).max(1.0);
    let cov = jtj.try_inverse().map(|m| m * s2).unwrap_or_else(|| Matrix3::from_element(f64::NAN));
    let mut covariance = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            covariance[i][j] = 0.5 * (cov[(i, j)] + cov[(j, i)]);
        }
    }
    let z = runs_z(&residuals);
    let perfect = rms <= PERFECT_FIT * p[2].abs();
    let fit = PeakFit {
        center: p[0],
        sigma: p[1],
        depth: p[2],
        covariance,
        contrast: None,
        window: (window.lo, window.hi),
        converged,
        iterations,
        residual_rms: rms,
        runs_z: z,
        poor_fit: !perfect && z < RUNS_Z_LIMIT,
        edge_truncated: window.edge_truncated,
    };
    Ok(PeakFit {
        converged: fit.converged && fit.center_in_window() && fit.depth > 0.0,
        ..fit
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::AbscissaKind;

    fn scan(f: impl Fn(f64) -> f64) -> Spectrum {
        let x: Vec<f64> = (0..=400).map(|k| 40.0 + 0.08 * k as f64).collect();
        let y = x.iter().map(|&v| f(v)).collect();
        Spectrum::new(x, y, AbscissaKind::Field).unwrap()
    }

    #[test]
    fn exact_gaussian_recovered() {
        let s = scan(|x| -100.0 * (-(x - 56.0).powi(2) / 8.0).exp());
        let w = PeakWindow::from_range(49.0, 63.0);
        let fit = fit_gaussian(&s, &w).unwrap();
        assert!(fit.converged);
        assert!((fit.center - 56.0).abs() < 1e-6 * 56.0);
        assert!((fit.sigma - 2.0).abs() < 1e-6 * 2.0);
        assert!((fit.depth - 100.0).abs() < 1e-6 * 100.0);
        assert!(!fit.poor_fit);
    }

    #[test]
    fn blended_dips_flagged() {
        let s = scan(|x| -100.0 * (-(x - 54.5).powi(2) / 4.0).exp() - 70.0 * (-(x - 58.0).powi(2) / 4.0).exp());
        let fit = fit_gaussian(&s, &PeakWindow::from_range(48.0, 64.0)).unwrap();
        assert!(fit.poor_fit, "{fit:?}");
    }

    #[test]
    fn window_too_small() {
        let s = scan(|x| -(x - 56.0).powi(2));
        assert!(fit_gaussian(&s, &PeakWindow::from_range(56.0, 56.3)).is_err());
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let s = scan(|x| -100.0 * (-(x - 56.0).powi(2) / 8.0).exp() + 3.0 * (x * 13.0).sin());
        let fit = fit_gaussian(&s, &PeakWindow::from_range(49.0, 63.0)).unwrap();
        let m = Matrix3::from_fn(|i, j| fit.covariance[i][j]);
        assert!((m - m.transpose()).norm() < 1e-15);
        assert!(m.symmetric_eigenvalues().iter().all(|&v| v >= -1e-12));
    }
}

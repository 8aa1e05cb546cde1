//! Synthetic photoluminescence scans.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Dip center, sigma (G) and depth as a fraction of the local baseline.
pub const SCAN_DIPS: [(f64, f64, f64); 3] = [(20.0, 3.0, 0.005), (56.0, 1.5, 0.005), (122.0, 2.0, 0.004)];
pub const BASELINE_LEVEL: f64 = 1.0e6;

pub fn field_grid() -> Vec<f64> {
    (0..=1300).map(|k| 15.0 + 0.1 * k as f64).collect()
}

/// A slowly varying quartic envelope around `BASELINE_LEVEL`.
pub fn envelope(x: f64) -> f64 {
    let u = (x - 80.0) / 65.0;
    BASELINE_LEVEL * (1.0 - 0.03 * u + 0.02 * u * u - 0.01 * u.powi(3) + 0.006 * u.powi(4))
}

pub fn expected(x: f64, dips: &[(f64, f64, f64)]) -> f64 {
    let b = envelope(x);
    b * (1.0 - dips.iter().map(|&(c, s, a)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp()).sum::<f64>())
}

pub fn poisson_scan<R: Rng>(rng: &mut R, dips: &[(f64, f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let x = field_grid();
    let y = x
        .iter()
        .map(|&v| Poisson::new(expected(v, dips)).unwrap().sample(rng))
        .collect();
    (x, y)
}

//! Dip candidates in a baseline-subtracted scan.

use serde::{Deserialize, Serialize};

use super::Spectrum;

/// MAD → standard deviation for normal noise.
const MAD_TO_SIGMA: f64 = 1.4826;
const FWHM_TO_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    /// Threshold in robust noise units.
    pub k: f64,
    /// Gaussian smoothing kernel width, in samples.
    pub smooth_sigma: f64,
    /// Half-width of the returned window, in estimated dip sigmas.
    pub window_sigmas: f64,
    /// Absolute depth floor, in counts.
    pub min_depth: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            k: 5.0,
            smooth_sigma: 3.0,
            window_sigmas: 3.0,
            min_depth: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakWindow {
    /// Abscissa of the smoothed minimum.
    pub center: f64,
    /// Depth below the residual median, counts.
    pub depth: f64,
    /// Width estimate from the half-depth points.
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
    /// The dip runs into the end of the scan; its center may lie outside.
    pub edge_truncated: bool,
}

impl PeakWindow {
    pub fn from_range(lo: f64, hi: f64) -> Self {
        PeakWindow {
            center: 0.5 * (lo + hi),
            depth: 0.0,
            sigma: (hi - lo).abs() / 6.0,
            lo: lo.min(hi),
            hi: lo.max(hi),
            edge_truncated: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Median and robust standard deviation (scaled MAD).
pub fn robust_noise(v: &[f64]) -> (f64, f64) {
    let m = median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    (m, MAD_TO_SIGMA * median(&dev))
}

pub fn gaussian_smooth(y: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return y.to_vec();
    }
    let half = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half).map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let n = y.len() as isize;
    (0..n)
        .map(|i| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, w) in (-half..=half).zip(&kernel) {
                let t = i + j;
                if t >= 0 && t < n {
                    acc += w * y[t as usize];
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

pub fn median_filter(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| median(&y[i.saturating_sub(half)..(i + half + 1).min(n)]))
        .collect()
}

/// Local minima of the smoothed residual deeper than `k` robust noise units
/// below its median, each with a window of ± `window_sigmas` estimated widths.
pub fn detect_peaks(residual: &Spectrum, config: &PeakConfig) -> Vec<PeakWindow> {
    let mut pts: Vec<(f64, f64)> = residual.points().collect();
    if pts.len() >= 2 && pts[0].0 > pts[1].0 {
        pts.reverse();
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let raw: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let s = gaussian_smooth(&raw, config.smooth_sigma);
    let n = s.len();
    let (level, noise) = robust_noise(&s);
    let threshold = (config.k * noise).max(config.min_depth);
    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;

    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let left_ok = i == 0 || s[i] < s[i - 1];
            let right_ok = i + 1 == n || s[i] <= s[i + 1];
            left_ok && right_ok && level - s[i] > threshold
        })
        .collect();
    candidates.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap());

    let mut out: Vec<PeakWindow> = Vec::new();
    for i in candidates {
        if out.iter().any(|w| w.contains(x[i])) {
            continue;
        }
        let depth = level - s[i];
        let half = level - 0.5 * depth;
        let crossing = |step: isize| -> Option<f64> {
            let mut j = i as isize;
            loop {
                let next = j + step;
                if next < 0 || next >= n as isize {
                    return None;
                }
                let (a, b) = (j as usize, next as usize);
                if s[b] >= half {
                    let t = (half - s[a]) / (s[b] - s[a]);
                    return Some(x[a] + t * (x[b] - x[a]));
                }
                j = next;
            }
        };
        let (left, right) = (crossing(-1), crossing(1));
        let edge_truncated = left.is_none() || right.is_none();
        let fwhm = match (left, right) {
            (Some(l), Some(r)) => r - l,
            (Some(l), None) => 2.0 * (x[i] - l),
            (None, Some(r)) => 2.0 * (r - x[i]),
            (None, None) => x[n - 1] - x[0],
        };
        let kernel = config.smooth_sigma * dx;
        let observed = fwhm / FWHM_TO_SIGMA;
        let sigma = (observed * observed - kernel * kernel).max(dx * dx).sqrt();
        let reach = config.window_sigmas * sigma;
        out.push(PeakWindow {
            center: x[i],
            depth,
            sigma,
            lo: (x[i] - reach).max(x[0]),
            hi: (x[i] + reach).min(x[n - 1]),
            edge_truncated,
        });
    }
    out.sort_by(|a, b| a.center.partial_cmp(&b.center).unwrap());
    out
}

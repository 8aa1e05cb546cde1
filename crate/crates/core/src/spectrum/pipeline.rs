//! Baseline, detection and fitting chained over one field-calibrated scan.

use serde::{Deserialize, Serialize};

use super::baseline::{fit_baseline, BaselineFit};
use super::calibration::CalibrationMap;
use super::fit::{fit_gaussian, PeakFit};
use super::peaks::{detect_peaks, median_filter, PeakConfig, PeakWindow};
use super::zfs::ZfsEstimate;
use super::{AbscissaKind, Spectrum, SpectrumError};

/// Residual dips shallower than this fraction of the baseline level are ignored.
pub const RELATIVE_DEPTH_FLOOR: f64 = 1e-6;
const MEDIAN_HALF_WIDTH: usize = 2;
const MASK_PASSES: usize = 6;
const MASK_K: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationMap>,
    pub baseline: BaselineFit,
    pub windows: Vec<PeakWindow>,
    pub peaks: Vec<PeakFit>,
    pub zfs: Vec<ZfsEstimate>,
}

fn merged_bounds(windows: &[PeakWindow]) -> Vec<(f64, f64)> {
    windows.iter().map(PeakWindow::bounds).collect()
}

/// With `windows` given, they are used as is. Otherwise they are detected
/// after a few baseline refits that mask every dip candidate found so far,
/// starting from the median-filtered residual of an unmasked quartic.
pub fn analyze(
    spectrum: &Spectrum,
    windows: Option<&[PeakWindow]>,
    config: &PeakConfig,
) -> Result<ScanReport, SpectrumError> {
    if spectrum.kind() != AbscissaKind::Field {
        return Err(SpectrumError::Invalid("analysis needs a field-calibrated scan".into()));
    }
    let level = super::peaks::median(spectrum.counts()).abs();
    let config = PeakConfig {
        min_depth: config.min_depth.max(RELATIVE_DEPTH_FLOOR * level),
        ..*config
    };
    let (baseline, windows) = match windows {
        Some(w) => (fit_baseline(spectrum, &merged_bounds(w))?, w.to_vec()),
        None => {
            // Masking passes at a relaxed threshold, accumulating windows,
            // then one detection at the requested threshold.
            let relaxed = PeakConfig {
                k: MASK_K.min(config.k),
                ..config
            };
            let mut mask: Vec<PeakWindow> = Vec::new();
            for pass in 0..MASK_PASSES {
                let baseline = fit_baseline(spectrum, &merged_bounds(&mask))?;
                let residual = baseline.subtract(spectrum);
                let residual = if pass == 0 {
                    residual.with_counts(median_filter(residual.counts(), MEDIAN_HALF_WIDTH))
                } else {
                    residual
                };
                let before = mask.len();
                for w in detect_peaks(&residual, &relaxed) {
                    if !mask.iter().any(|m| m.contains(w.center)) {
                        mask.push(w);
                    }
                }
                if pass > 0 && mask.len() == before {
                    break;
                }
            }
            let baseline = fit_baseline(spectrum, &merged_bounds(&mask))?;
            let found = detect_peaks(&baseline.subtract(spectrum), &config);
            let baseline = fit_baseline(spectrum, &merged_bounds(&found))?;
            (baseline, found)
        }
    };
    let residual = baseline.subtract(spectrum);
    let mut peaks = Vec::with_capacity(windows.len());
    for w in &windows {
        let mut fit = fit_gaussian(&residual, w)?;
        let base = baseline.evaluate(fit.center);
        if base != 0.0 {
            fit.contrast = Some(fit.depth / base);
        }
        peaks.push(fit);
    }
    Ok(ScanReport {
        calibration: None,
        baseline,
        windows,
        peaks,
        zfs: Vec::new(),
    })
}

//! Photoluminescence scan analysis: abscissa calibration, quartic baseline
//! removal, dip detection, Gaussian dip fits and inversion of dip centers
//! into zero-field splittings.

pub mod baseline;
pub mod calibration;
pub mod fit;
pub mod peaks;
pub mod pipeline;
pub mod zfs;

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossing::CrossingError;
use crate::spin::SpinError;

pub use baseline::{fit_baseline, BaselineFit};
pub use calibration::{calibrate, field_for_frequency, Branch, CalibrationMap, CalibrationQuality, Fiducial};
pub use fit::{fit_gaussian, PeakFit};
pub use peaks::{detect_peaks, PeakConfig, PeakWindow};
pub use pipeline::{analyze, ScanReport};
pub use zfs::{infer_zfs, solve_target_d, AssumedCrossing, ZfsContributions, ZfsEstimate, ZfsUncertainties};

pub const MIN_POINTS: usize = 16;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV needs at least {needed} columns, found {found}")]
    MissingColumns { needed: usize, found: usize },
    #[error("invalid spectrum: {0}")]
    Invalid(String),
    #[error("underdetermined fit: {needed} points needed, {available} available")]
    Underdetermined { needed: usize, available: usize },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Crossing(#[from] CrossingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AbscissaKind {
    Voltage,
    Field,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_time_s: Option<f64>,
}

/// A scan: counts against a strictly monotone abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    abscissa: Vec<f64>,
    counts: Vec<f64>,
    kind: AbscissaKind,
    pub metadata: ScanMetadata,
}

impl Spectrum {
    pub fn new(abscissa: Vec<f64>, counts: Vec<f64>, kind: AbscissaKind) -> Result<Self, SpectrumError> {
        if abscissa.len() != counts.len() {
            return Err(SpectrumError::Invalid(format!(
                "{} abscissa values but {} counts",
                abscissa.len(),
                counts.len()
            )));
        }
        if abscissa.len() < MIN_POINTS {
            return Err(SpectrumError::Invalid(format!(
                "{} points, at least {MIN_POINTS} required",
                abscissa.len()
            )));
        }
        if abscissa.iter().chain(&counts).any(|v| !v.is_finite()) {
            return Err(SpectrumError::Invalid("non-finite value".into()));
        }
        let rising = abscissa.windows(2).all(|w| w[1] > w[0]);
        let falling = abscissa.windows(2).all(|w| w[1] < w[0]);
        if !rising && !falling {
            return Err(SpectrumError::Invalid("abscissa is not strictly monotone".into()));
        }
        Ok(Spectrum {
            abscissa,
            counts,
            kind,
            metadata: ScanMetadata::default(),
        })
    }

    /// Two-column CSV with a header row: abscissa, counts.
    pub fn from_csv<R: Read>(reader: R, kind: AbscissaKind) -> Result<Self, SpectrumError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let found = rdr.headers()?.len();
        if found < 2 {
            return Err(SpectrumError::MissingColumns { needed: 2, found });
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(SpectrumError::MissingColumns { needed: 2, found: rec.len() });
            }
            let parse = |k: usize| {
                rec[k].parse::<f64>().map_err(|_| {
                    SpectrumError::Invalid(format!("row {}: '{}' is not a number", line + 2, &rec[k]))
                })
            };
            x.push(parse(0)?);
            y.push(parse(1)?);
        }
        Spectrum::new(x, y, kind)
    }

    pub fn from_csv_path(path: &Path, kind: AbscissaKind) -> Result<Self, SpectrumError> {
        let file = std::fs::File::open(path).map_err(|source| SpectrumError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Spectrum::from_csv(file, kind)
    }

    pub fn abscissa(&self) -> &[f64] {
        &self.abscissa
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn kind(&self) -> AbscissaKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        let (a, b) = (self.abscissa[0], *self.abscissa.last().unwrap());
        (a.min(b), a.max(b))
    }

    /// Same abscissa, new counts.
    pub fn with_counts(&self, counts: Vec<f64>) -> Self {
        assert_eq!(counts.len(), self.counts.len());
        Spectrum {
            counts,
            ..self.clone()
        }
    }

    pub(crate) fn with_abscissa(&self, abscissa: Vec<f64>, kind: AbscissaKind) -> Result<Self, SpectrumError> {
        let mut s = Spectrum::new(abscissa, self.counts.clone(), kind)?;
        s.metadata = self.metadata.clone();
        Ok(s)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.abscissa.iter().copied().zip(self.counts.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_or_unsorted() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(Spectrum::new(x[..10].to_vec(), vec![0.0; 10], AbscissaKind::Field).is_err());
        let mut bad = x.clone();
        bad.swap(3, 4);
        assert!(Spectrum::new(bad, vec![0.0; 20], AbscissaKind::Field).is_err());
        assert!(Spectrum::new(x.clone(), vec![0.0; 19], AbscissaKind::Field).is_err());
        let down: Vec<f64> = x.iter().rev().copied().collect();
        assert!(Spectrum::new(down, vec![0.0; 20], AbscissaKind::Voltage).is_ok());
    }

    #[test]
    fn csv_ingest() {
        let mut text = String::from("field_G,counts\n");
        for k in 0..20 {
            text.push_str(&format!("{},{}\n", k, 100 + k));
        }
        let s = Spectrum::from_csv(text.as_bytes(), AbscissaKind::Field).unwrap();
        assert_eq!(s.len(), 20);
        assert_eq!(s.counts()[3], 103.0);

        let one = "field_G\n1\n2\n";
        assert!(matches!(
            Spectrum::from_csv(one.as_bytes(), AbscissaKind::Field),
            Err(SpectrumError::MissingColumns { .. })
        ));
        let junk = "a,b\n1,x\n";
        assert!(Spectrum::from_csv(junk.as_bytes(), AbscissaKind::Field).is_err());
    }
}

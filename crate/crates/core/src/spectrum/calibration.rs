//! Voltage-to-field calibration from microwave fiducials.

use std::io::Read;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{AbscissaKind, Spectrum, SpectrumError};
use crate::spin::{LevelState, LevelTracker, Manifold, OrientationClass, SpinSpecies};

/// Default upper limit of the field search, G.
pub const DEFAULT_SEARCH_MAX: f64 = 500.0;
const SEARCH_STEP: f64 = 1.0;
const FIELD_TOL: f64 = 1e-9;
/// Anchors further than this fraction of the field span from a straight
/// line mark the calibration as non-linear.
pub const LINEARITY_TOL: f64 = 0.02;

/// NV probe branch: ms=0→−1 (lower) or ms=0→+1 (upper).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Lower,
    Upper,
}

impl Branch {
    pub fn manifold(self) -> Manifold {
        match self {
            Branch::Lower => Manifold(-2),
            Branch::Upper => Manifold(2),
        }
    }

    pub fn parse(text: &str) -> Option<Branch> {
        match text.trim().to_ascii_lowercase().as_str() {
            "lower" | "-1" | "ms=-1" => Some(Branch::Lower),
            "upper" | "+1" | "1" | "ms=+1" => Some(Branch::Upper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fiducial {
    pub voltage: f64,
    pub frequency_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
}

impl Fiducial {
    /// CSV with header: voltage, frequency_MHz[, branch].
    pub fn from_csv<R: Read>(reader: R) -> Result<Vec<Fiducial>, SpectrumError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
        let found = rdr.headers()?.len();
        if found < 2 {
            return Err(SpectrumError::MissingColumns { needed: 2, found });
        }
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(SpectrumError::MissingColumns { needed: 2, found: rec.len() });
            }
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| SpectrumError::Invalid(format!("fiducial value '{}' is not a number", &rec[k])))
            };
            let branch = match rec.get(2).filter(|s| !s.is_empty()) {
                Some(b) => Some(Branch::parse(b).ok_or_else(|| {
                    SpectrumError::Invalid(format!("unknown branch '{b}'"))
                })?),
                None => None,
            };
            out.push(Fiducial {
                voltage: num(0)?,
                frequency_mhz: num(1)?,
                branch,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationQuality {
    Linear,
    NonLinear,
}

/// Piecewise-linear voltage → field map through (voltage, field) anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    anchors: Vec<(f64, f64)>,
    pub quality: CalibrationQuality,
    /// Largest anchor distance from the best straight line, G.
    pub max_nonlinearity: f64,
}

impl CalibrationMap {
    pub fn new(mut anchors: Vec<(f64, f64)>) -> Result<Self, SpectrumError> {
        if anchors.len() < 2 {
            return Err(SpectrumError::Calibration("at least 2 anchors required".into()));
        }
        if anchors.iter().any(|a| !a.0.is_finite() || !a.1.is_finite()) {
            return Err(SpectrumError::Calibration("non-finite anchor".into()));
        }
        anchors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if anchors.windows(2).any(|w| w[1].0 == w[0].0) {
            return Err(SpectrumError::Calibration("duplicate anchor voltage".into()));
        }
        let rising = anchors.windows(2).all(|w| w[1].1 > w[0].1);
        let falling = anchors.windows(2).all(|w| w[1].1 < w[0].1);
        if !rising && !falling {
            return Err(SpectrumError::Calibration("anchor fields are not monotone in voltage".into()));
        }
        let max_nonlinearity = line_deviation(&anchors);
        let span = (anchors.last().unwrap().1 - anchors[0].1).abs();
        let quality = if max_nonlinearity <= LINEARITY_TOL * span {
            CalibrationQuality::Linear
        } else {
            CalibrationQuality::NonLinear
        };
        Ok(CalibrationMap {
            anchors,
            quality,
            max_nonlinearity,
        })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    /// Field at `voltage`; the end segments extend linearly.
    pub fn field(&self, voltage: f64) -> f64 {
        interpolate(&self.anchors, voltage, |a| a.0, |a| a.1)
    }

    pub fn voltage(&self, field: f64) -> f64 {
        let mut by_field = self.anchors.clone();
        by_field.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        interpolate(&by_field, field, |a| a.1, |a| a.0)
    }

    pub fn apply(&self, spectrum: &Spectrum) -> Result<Spectrum, SpectrumError> {
        if spectrum.kind() != AbscissaKind::Voltage {
            return Err(SpectrumError::Invalid("calibration applies to voltage scans".into()));
        }
        let x = spectrum.abscissa().iter().map(|&v| self.field(v)).collect();
        spectrum.with_abscissa(x, AbscissaKind::Field)
    }
}

fn interpolate(pts: &[(f64, f64)], x: f64, key: impl Fn(&(f64, f64)) -> f64, val: impl Fn(&(f64, f64)) -> f64) -> f64 {
    let n = pts.len();
    let seg = pts
        .windows(2)
        .position(|w| x <= key(&w[1]))
        .unwrap_or(n - 2);
    let (a, b) = (&pts[seg], &pts[seg + 1]);
    let t = (x - key(a)) / (key(b) - key(a));
    val(a) + t * (val(b) - val(a))
}

fn line_deviation(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    pts.iter()
        .map(|p| (p.1 - (my + slope * (p.0 - mx))).abs())
        .fold(0.0, f64::max)
}

/// Field amplitude along `axis` at which the NV probe line of `branch`
/// (class 1) sits at `frequency`. Without a branch hint, frequencies below
/// D use the lower branch.
pub fn field_for_frequency(
    nv: &SpinSpecies,
    axis: Vector3<f64>,
    frequency: f64,
    branch: Option<Branch>,
    b_max: f64,
) -> Result<f64, SpectrumError> {
    let branch = branch.unwrap_or(if frequency < nv.d { Branch::Lower } else { Branch::Upper });
    let tracker = LevelTracker::new(nv, OrientationClass::all()[0], axis)?;
    let find = |m: Manifold| tracker.labels().iter().position(|l| l.manifold == m);
    let (Some(zero), Some(upper)) = (find(Manifold(0)), find(branch.manifold())) else {
        return Err(SpectrumError::Calibration(format!("{} has no NV probe branches", nv.name)));
    };
    let g = |s: &LevelState| (s.energies[upper] - s.energies[zero]).abs() - frequency;

    let mut prev = tracker.at(0.0);
    let mut g_prev = g(&prev);
    if g_prev.abs() <= FIELD_TOL {
        return Ok(0.0);
    }
    let mut b = 0.0;
    while b < b_max {
        let next_b = (b + SEARCH_STEP).min(b_max);
        let next = tracker.advance(&prev, next_b);
        let g_next = g(&next);
        if g_next.abs() <= FIELD_TOL {
            return Ok(next_b);
        }
        if g_prev * g_next < 0.0 {
            let (mut lo, mut hi, mut g_lo) = (b, next_b, g_prev);
            while hi - lo > FIELD_TOL {
                let mid = 0.5 * (lo + hi);
                let g_mid = g(&tracker.advance(&prev, mid));
                if g_lo * g_mid <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    g_lo = g_mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev = next;
        g_prev = g_next;
        b = next_b;
    }
    Err(SpectrumError::Calibration(format!(
        "{frequency} MHz is not reached on the {branch:?} branch below {b_max} G"
    )))
}

/// Inverts each fiducial through the NV Hamiltonian and builds the map.
pub fn calibrate(
    spectrum: &Spectrum,
    fiducials: &[Fiducial],
    nv: &SpinSpecies,
    axis: Vector3<f64>,
) -> Result<CalibrationMap, SpectrumError> {
    if spectrum.kind() != AbscissaKind::Voltage {
        return Err(SpectrumError::Invalid("calibration needs a voltage scan".into()));
    }
    let (lo, hi) = spectrum.range();
    let mut anchors = Vec::with_capacity(fiducials.len());
    for f in fiducials {
        if f.voltage < lo || f.voltage > hi {
            return Err(SpectrumError::Calibration(format!(
                "fiducial at {} V lies outside the scan ({lo}..{hi} V)",
                f.voltage
            )));
        }
        let b = field_for_frequency(nv, axis, f.frequency_mhz, f.branch, DEFAULT_SEARCH_MAX)?;
        anchors.push((f.voltage, b));
    }
    CalibrationMap::new(anchors)
}

//! Zero-field splitting of an unknown spin-1 defect from the field of its
//! cross-relaxation dip with NV.

use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::calibration::Branch;
use super::fit::PeakFit;
use super::SpectrumError;
use crate::spin::geometry::{rotation_about, transverse_basis};
use crate::spin::{LevelTracker, Manifold, OrientationClass, SpinError, SpinSpecies};

pub const D_SEARCH: (f64, f64) = (2000.0, 3000.0);
/// Solver tolerance on D, MHz.
pub const D_TOL: f64 = 1e-4;
pub const DEFAULT_NV_D_UNCERTAINTY: f64 = 1.0;
const TILT_DIRECTIONS: usize = 8;
const MAX_SOLVER_ITERATIONS: usize = 100;

/// Which two lines are assumed to meet at the dip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssumedCrossing {
    pub nv_branch: Branch,
    pub target_branch: Branch,
    pub nv_class: u8,
    pub target_class: u8,
}

impl Default for AssumedCrossing {
    fn default() -> Self {
        AssumedCrossing {
            nv_branch: Branch::Lower,
            target_branch: Branch::Upper,
            nv_class: 1,
            target_class: 1,
        }
    }
}

impl fmt::Display for AssumedCrossing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |b: Branch| match b {
            Branch::Lower => "ms=0->ms=-1",
            Branch::Upper => "ms=0->ms=+1",
        };
        write!(
            f,
            "NV {} [c{}] x target {} [c{}]",
            name(self.nv_branch),
            self.nv_class,
            name(self.target_branch),
            self.target_class
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZfsUncertainties {
    /// Field calibration, G.
    pub calibration: f64,
    /// Field direction, degrees.
    pub angle: f64,
    /// NV zero-field splitting, MHz.
    pub nv_d: f64,
}

impl Default for ZfsUncertainties {
    fn default() -> Self {
        ZfsUncertainties {
            calibration: 1.0,
            angle: 0.5,
            nv_d: DEFAULT_NV_D_UNCERTAINTY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZfsContributions {
    pub angle: f64,
    pub calibration: f64,
    pub fit: f64,
    pub nv_reference: f64,
}

impl ZfsContributions {
    pub fn quadrature(&self) -> f64 {
        (self.angle.powi(2) + self.calibration.powi(2) + self.fit.powi(2) + self.nv_reference.powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZfsEstimate {
    /// MHz.
    pub d: f64,
    pub sigma_d: f64,
    pub contributions: ZfsContributions,
    pub center: f64,
    pub center_sigma: f64,
    pub crossing: String,
}

fn class(label: u8) -> Result<OrientationClass, SpectrumError> {
    Ok(OrientationClass::new(label)?)
}

fn branch_frequency(
    species: &SpinSpecies,
    orientation: OrientationClass,
    axis: Vector3<f64>,
    field: f64,
    branch: Branch,
) -> Result<f64, SpectrumError> {
    let tracker = LevelTracker::new(species, orientation, axis)?;
    let find = |m: Manifold| tracker.labels().iter().position(|l| l.manifold == m);
    let (Some(zero), Some(upper)) = (find(Manifold(0)), find(branch.manifold())) else {
        return Err(SpectrumError::Invalid(format!("{} has no probe branches", species.name)));
    };
    let state = tracker.at(field);
    if state.overlap < crate::spin::tracking::OVERLAP_THRESHOLD {
        return Err(SpinError::TrackingFailure {
            species: species.name.clone(),
            field,
            overlap: state.overlap,
        }
        .into());
    }
    Ok((state.energies[upper] - state.energies[zero]).abs())
}

/// D of a bare spin-1 ⟨111⟩ defect whose `crossing` line meets the NV line
/// exactly at `center` along `axis`.
pub fn solve_target_d(
    center: f64,
    axis: Vector3<f64>,
    nv: &SpinSpecies,
    crossing: &AssumedCrossing,
) -> Result<f64, SpectrumError> {
    if !(center >= 0.0) || !center.is_finite() {
        return Err(SpectrumError::NoSolution(format!("center {center} G is not a valid field")));
    }
    let nv_line = branch_frequency(nv, class(crossing.nv_class)?, axis, center, crossing.nv_branch)?;
    let target_class = class(crossing.target_class)?;
    let g = |d: f64| -> Result<f64, SpectrumError> {
        let target = SpinSpecies::spin_one("target", d, nv.gamma_e);
        Ok(branch_frequency(&target, target_class, axis, center, crossing.target_branch)? - nv_line)
    };
    let (mut a, mut b) = D_SEARCH;
    let (mut ga, mut gb) = (g(a)?, g(b)?);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga * gb > 0.0 {
        return Err(SpectrumError::NoSolution(format!(
            "no D in [{}, {}] MHz puts the crossing at {center} G",
            D_SEARCH.0, D_SEARCH.1
        )));
    }
    // Illinois regula falsi: g is close to linear in D.
    let mut side = 0i8;
    for _ in 0..MAX_SOLVER_ITERATIONS {
        let c = (a * gb - b * ga) / (gb - ga);
        let gc = g(c)?;
        if gc == 0.0 || (b - a).abs() < D_TOL {
            return Ok(c);
        }
        if gc * gb < 0.0 {
            a = b;
            ga = gb;
            side = 0;
        } else {
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        b = c;
        gb = gc;
        if (b - a).abs() < D_TOL {
            return Ok(b);
        }
    }
    Ok(b)
}

fn mean_shift(
    d0: f64,
    plus: Result<f64, SpectrumError>,
    minus: Result<f64, SpectrumError>,
) -> Result<f64, SpectrumError> {
    Ok(0.5 * ((plus? - d0).abs() + (minus? - d0).abs()))
}

/// Inverts a dip center into D with a four-term quadrature error budget.
pub fn infer_zfs(
    peak: &PeakFit,
    uncertainties: &ZfsUncertainties,
    nv: &SpinSpecies,
    crossing: &AssumedCrossing,
    axis: Vector3<f64>,
) -> Result<ZfsEstimate, SpectrumError> {
    let axis = axis.normalize();
    let c = peak.center;
    let d0 = solve_target_d(c, axis, nv, crossing)?;
    let at = |b: f64| solve_target_d(b, axis, nv, crossing);

    let sc = peak.center_sigma();
    let fit = if sc > 0.0 { mean_shift(d0, at(c + sc), at(c - sc))? } else { 0.0 };
    let u = uncertainties.calibration;
    let calibration = if u > 0.0 { mean_shift(d0, at(c + u), at(c - u))? } else { 0.0 };
    let u = uncertainties.nv_d;
    let nv_reference = if u > 0.0 {
        mean_shift(
            d0,
            solve_target_d(c, axis, &nv.with_d(nv.d + u), crossing),
            solve_target_d(c, axis, &nv.with_d(nv.d - u), crossing),
        )?
    } else {
        0.0
    };
    let angle = if uncertainties.angle > 0.0 {
        angle_term(c, axis, nv, crossing, uncertainties.angle.to_radians())?
    } else {
        0.0
    };
    let contributions = ZfsContributions {
        angle,
        calibration,
        fit,
        nv_reference,
    };
    Ok(ZfsEstimate {
        d: d0,
        sigma_d: contributions.quadrature(),
        contributions,
        center: c,
        center_sigma: sc,
        crossing: crossing.to_string(),
    })
}

/// Largest |ΔD| over tilt directions and over every class pairing of the
/// assumed branches; a misaligned axis splits the class lines apart.
fn angle_term(
    center: f64,
    axis: Vector3<f64>,
    nv: &SpinSpecies,
    crossing: &AssumedCrossing,
    tilt: f64,
) -> Result<f64, SpectrumError> {
    let pairs: Vec<AssumedCrossing> = (1..=4)
        .flat_map(|i| {
            (1..=4).map(move |j| AssumedCrossing {
                nv_class: i,
                target_class: j,
                ..*crossing
            })
        })
        .collect();
    let untilted: Vec<Option<f64>> = pairs.iter().map(|p| solve_target_d(center, axis, nv, p).ok()).collect();
    if untilted.iter().all(Option::is_none) {
        return Err(SpectrumError::NoSolution("no class pairing crosses at the center".into()));
    }
    let (v, w) = transverse_basis(&axis);
    let worst: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..TILT_DIRECTIONS)
            .map(|k| {
                let (pairs, untilted) = (&pairs, &untilted);
                scope.spawn(move || {
                    let psi = std::f64::consts::TAU * k as f64 / TILT_DIRECTIONS as f64;
                    let about = v * psi.cos() + w * psi.sin();
                    let tilted = rotation_about(&about, tilt) * axis;
                    pairs
                        .iter()
                        .zip(untilted)
                        .filter_map(|(p, d0)| {
                            let d0 = (*d0)?;
                            solve_target_d(center, tilted, nv, p).ok().map(|d| (d - d0).abs())
                        })
                        .fold(0.0, f64::max)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("tilt worker")).collect()
    });
    Ok(worst.into_iter().fold(0.0, f64::max))
}

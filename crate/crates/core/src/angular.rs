//! NV class degeneracies as a function of field direction around a
//! reference axis: ODMR line structure and a phenomenological PL map.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::spin::geometry::{rotation_about, transverse_basis};
use crate::spin::{
    build_hamiltonian, eigensystem, MagneticField, OrientationClass, SpinError, SpinSpecies, SpinValue,
};

pub const DEFAULT_AMPLITUDE: f64 = 115.0;
pub const DEFAULT_LINEWIDTH: f64 = 6.0;
pub const DEFAULT_CONTRAST: f64 = 0.05;
/// ODMR lines closer than this are reported as one, MHz.
pub const LINE_MERGE: f64 = 0.1;

/// Symmetric (φ, θ) grid in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub phi_max: f64,
    pub theta_max: f64,
    pub phi_steps: usize,
    pub theta_steps: usize,
}

impl AngleGrid {
    pub fn new(phi_max: f64, theta_max: f64, phi_steps: usize, theta_steps: usize) -> Result<Self, SpinError> {
        let ok = |m: f64| m > 0.0 && m < 90.0;
        if !ok(phi_max) || !ok(theta_max) {
            return Err(SpinError::InvalidField(format!(
                "angle ranges must lie in (0, 90) degrees, got {phi_max}, {theta_max}"
            )));
        }
        if phi_steps < 3 || theta_steps < 3 {
            return Err(SpinError::InvalidField("at least 3 steps per angle".into()));
        }
        Ok(AngleGrid {
            phi_max,
            theta_max,
            phi_steps,
            theta_steps,
        })
    }

    pub fn square(max: f64, steps: usize) -> Result<Self, SpinError> {
        Self::new(max, max, steps, steps)
    }

    fn linspace(max: f64, steps: usize) -> Vec<f64> {
        (0..steps)
            .map(|k| -max + 2.0 * max * k as f64 / (steps - 1) as f64)
            .collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        Self::linspace(self.phi_max, self.phi_steps)
    }

    pub fn thetas(&self) -> Vec<f64> {
        Self::linspace(self.theta_max, self.theta_steps)
    }

    pub fn phi_step(&self) -> f64 {
        2.0 * self.phi_max / (self.phi_steps - 1) as f64
    }

    pub fn theta_step(&self) -> f64 {
        2.0 * self.theta_max / (self.theta_steps - 1) as f64
    }
}

/// Field direction after turning `reference` by `phi` about the first
/// transverse axis, then by `theta` about the second. For [100] this is
/// (cosφ cosθ, cosφ sinθ, −sinφ).
pub fn field_from_angles(
    reference: Vector3<f64>,
    phi_deg: f64,
    theta_deg: f64,
    amplitude: f64,
) -> Result<MagneticField, SpinError> {
    if phi_deg.abs() >= 90.0 || theta_deg.abs() >= 90.0 {
        return Err(SpinError::InvalidField(format!(
            "goniometer angles must stay below 90 degrees, got ({phi_deg}, {theta_deg})"
        )));
    }
    let r = reference.normalize();
    let (v, w) = transverse_basis(&r);
    let axis = rotation_about(&w, theta_deg.to_radians()) * (rotation_about(&v, phi_deg.to_radians()) * r);
    MagneticField::new(amplitude, axis)
}

fn require_bare_spin_one(nv: &SpinSpecies) -> Result<(), SpinError> {
    if nv.spin != SpinValue::One || nv.nuclear.is_some() {
        return Err(SpinError::UnsupportedSelection {
            species: nv.name.clone(),
            rule: "NV_PROBE".into(),
        });
    }
    Ok(())
}

/// The two probe frequencies of one class; ms=0 is the level with the
/// smallest ⟨Sz²⟩, so no tracking is needed.
fn class_lines(nv: &SpinSpecies, field: &MagneticField, class: OrientationClass) -> [f64; 2] {
    let eig = eigensystem(&build_hamiltonian(nv, field, class));
    // In the |+1>,|0>,|-1> basis ⟨Sz²⟩ = 1 − |⟨0|v⟩|².
    let zero = (0..3)
        .max_by(|&a, &b| {
            eig.vectors[(1, a)]
                .norm_sqr()
                .partial_cmp(&eig.vectors[(1, b)].norm_sqr())
                .unwrap()
        })
        .unwrap();
    let mut f = [0.0; 2];
    let mut k = 0;
    for i in (0..3).filter(|&i| i != zero) {
        f[k] = (eig.values[i] - eig.values[zero]).abs();
        k += 1;
    }
    f.sort_by(|a, b| a.partial_cmp(b).unwrap());
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrLine {
    /// MHz.
    pub frequency: f64,
    pub multiplicity: usize,
    pub classes: Vec<u8>,
}

/// The eight probe lines of the four classes, merged within 0.1 MHz.
pub fn odmr_lines(field: &MagneticField, nv: &SpinSpecies) -> Result<Vec<OdmrLine>, SpinError> {
    require_bare_spin_one(nv)?;
    let mut raw: Vec<(f64, u8)> = OrientationClass::all()
        .iter()
        .flat_map(|&c| class_lines(nv, field, c).map(|f| (f, c.label())))
        .collect();
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<OdmrLine> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (f, c) in raw {
        match out.last_mut() {
            Some(line) if f - last <= LINE_MERGE => {
                let m = line.multiplicity as f64;
                line.frequency = (line.frequency * m + f) / (m + 1.0);
                line.multiplicity += 1;
                line.classes.push(c);
            }
            _ => out.push(OdmrLine {
                frequency: f,
                multiplicity: 1,
                classes: vec![c],
            }),
        }
        last = f;
    }
    for line in &mut out {
        line.classes.sort_unstable();
    }
    Ok(out)
}

/// A plane of field directions on which two classes are degenerate:
/// B·(u_i ± u_j) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyPlane {
    /// Miller indices of the normal, e.g. "[01-1]".
    pub normal: String,
    pub classes: (u8, u8),
    #[serde(skip)]
    normal_vec: Vector3<f64>,
}

impl DegeneracyPlane {
    pub fn normal_vector(&self) -> Vector3<f64> {
        self.normal_vec
    }
}

fn miller(n: &Vector3<f64>) -> String {
    let mut ints: Vec<i64> = n.iter().map(|v| v.round() as i64).collect();
    let g = ints.iter().fold(0i64, |g, &v| gcd(g, v.abs()));
    if g > 1 {
        ints.iter_mut().for_each(|v| *v /= g);
    }
    if ints.iter().find(|v| **v != 0).is_some_and(|v| *v < 0) {
        ints.iter_mut().for_each(|v| *v = -*v);
    }
    format!("[{}]", ints.iter().map(|v| v.to_string()).collect::<String>())
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All nine class-degeneracy planes.
pub fn degeneracy_planes() -> Vec<DegeneracyPlane> {
    let classes = OrientationClass::all();
    let mut out: Vec<DegeneracyPlane> = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let (a, b) = (classes[i].symmetry_axis() * 3f64.sqrt(), classes[j].symmetry_axis() * 3f64.sqrt());
            for n in [a - b, a + b] {
                let normal = miller(&n);
                if !out.iter().any(|p| p.normal == normal) {
                    out.push(DegeneracyPlane {
                        normal,
                        classes: (classes[i].label(), classes[j].label()),
                        normal_vec: n.normalize(),
                    });
                }
            }
        }
    }
    out
}

/// Sampled (φ, θ) points of one plane inside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneLocus {
    pub normal: String,
    pub points: Vec<(f64, f64)>,
}

fn roots_along(g: impl Fn(f64) -> f64, max: f64, steps: usize) -> Vec<f64> {
    let h = 2.0 * max / steps as f64;
    let mut out = Vec::new();
    let mut x0 = -max;
    let mut g0 = g(x0);
    for k in 1..=steps {
        let x1 = -max + h * k as f64;
        let g1 = g(x1);
        if g0 == 0.0 {
            out.push(x0);
        } else if g0 * g1 < 0.0 {
            let (mut a, mut b, mut ga) = (x0, x1, g0);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let gm = g(m);
                if ga * gm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    ga = gm;
                }
            }
            out.push(0.5 * (a + b));
        }
        x0 = x1;
        g0 = g1;
    }
    if g0 == 0.0 {
        out.push(x0);
    }
    out
}

/// Analytic loci of every degeneracy plane crossing the grid, solved for θ
/// at each grid φ and for φ at each grid θ.
pub fn plane_loci(reference: Vector3<f64>, grid: &AngleGrid) -> Vec<PlaneLocus> {
    let dir = |phi: f64, theta: f64| {
        field_from_angles(reference, phi, theta, 1.0)
            .expect("grid angles below 90 degrees")
            .axis()
    };
    let mut out = Vec::new();
    for plane in degeneracy_planes() {
        let n = plane.normal_vector();
        let mut points = Vec::new();
        for phi in grid.phis() {
            for theta in roots_along(|t| dir(phi, t).dot(&n), grid.theta_max, 4 * grid.theta_steps) {
                points.push((phi, theta));
            }
        }
        for theta in grid.thetas() {
            for phi in roots_along(|p| dir(p, theta).dot(&n), grid.phi_max, 4 * grid.phi_steps) {
                points.push((phi, theta));
            }
        }
        if !points.is_empty() {
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            points.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            out.push(PlaneLocus {
                normal: plane.normal,
                points,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyMap {
    pub grid: AngleGrid,
    pub reference: [f64; 3],
    pub amplitude: f64,
    pub linewidth: f64,
    pub contrast: f64,
    /// Indexed [phi][theta].
    pub pl_proxy: Vec<Vec<f64>>,
    /// Normals of the planes within half a grid cell of each point.
    pub plane_labels: Vec<Vec<Vec<String>>>,
    /// Every point has the same value (no directional information).
    pub uniform: bool,
    pub convention: String,
}

impl DegeneracyMap {
    pub fn min_point(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.pl_proxy.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < self.pl_proxy[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.pl_proxy[i][j]
    }
}

fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g * g / (detuning * detuning + g * g)
}

/// Summed Lorentzian overlap of all class-pair, branch-pair detunings.
pub fn degeneracy_strength(field: &MagneticField, nv: &SpinSpecies, linewidth: f64) -> f64 {
    let lines: Vec<[f64; 2]> = OrientationClass::all().iter().map(|&c| class_lines(nv, field, c)).collect();
    let mut s = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            for a in lines[i] {
                for b in lines[j] {
                    s += lorentzian(a - b, linewidth);
                }
            }
        }
    }
    s
}

/// pl_proxy = 1 − contrast·S/max(S) over the grid.
pub fn simulate_map(
    grid: &AngleGrid,
    reference: Vector3<f64>,
    amplitude: f64,
    nv: &SpinSpecies,
    linewidth: f64,
    contrast: f64,
) -> Result<DegeneracyMap, SpinError> {
    require_bare_spin_one(nv)?;
    if !(linewidth > 0.0) {
        return Err(SpinError::InvalidField(format!("linewidth must be positive, got {linewidth}")));
    }
    if !(contrast > 0.0 && contrast < 1.0) {
        return Err(SpinError::InvalidField(format!("contrast must lie in (0, 1), got {contrast}")));
    }
    MagneticField::new(amplitude, reference)?;
    let phis = grid.phis();
    let thetas = grid.thetas();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(phis.len());
    let chunk = phis.len().div_ceil(workers);
    let strength: Vec<Vec<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = phis
            .chunks(chunk)
            .map(|rows| {
                let thetas = &thetas;
                scope.spawn(move || {
                    rows.iter()
                        .map(|&phi| {
                            thetas
                                .iter()
                                .map(|&theta| {
                                    let f = field_from_angles(reference, phi, theta, amplitude)
                                        .expect("validated grid");
                                    degeneracy_strength(&f, nv, linewidth)
                                })
                                .collect::<Vec<f64>>()
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("map worker"))
            .collect()
    });
    let max = strength.iter().flatten().copied().fold(0.0, f64::max);
    let min = strength.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let pl_proxy: Vec<Vec<f64>> = strength
        .iter()
        .map(|row| row.iter().map(|s| if max > 0.0 { 1.0 - contrast * s / max } else { 1.0 }).collect())
        .collect();

    let planes = degeneracy_planes();
    let half_cell = 0.5 * grid.phi_step().max(grid.theta_step());
    let tol = half_cell.to_radians().sin();
    let plane_labels = phis
        .iter()
        .map(|&phi| {
            thetas
                .iter()
                .map(|&theta| {
                    let d = field_from_angles(reference, phi, theta, 1.0).expect("validated grid").axis();
                    planes
                        .iter()
                        .filter(|p| d.dot(&p.normal_vector()).abs() <= tol)
                        .map(|p| p.normal.clone())
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(DegeneracyMap {
        grid: *grid,
        reference: [reference[0], reference[1], reference[2]],
        amplitude,
        linewidth,
        contrast,
        pl_proxy,
        plane_labels,
        uniform: max - min <= 1e-12 * max.max(1.0),
        convention: "phi about the first transverse axis, then theta about the second".into(),
    })
}

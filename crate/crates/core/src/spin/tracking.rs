//! Adiabatic state labelling along a field ramp.
//!
//! Labels are fixed once, just above zero field, from the electron-spin
//! projection of each eigenvector. Every later field point inherits them by
//! maximum-overlap assignment against the previous eigenvectors. Degenerate
//! clusters are handled as subspaces: a state keeps the projection of its
//! previous vector onto the cluster, so exact crossings on the grid do not
//! scramble labels.

use std::fmt;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::{eigensystem, Eigensystem};
use super::geometry::{DefectFrame, MagneticField, OrientationClass};
use super::hamiltonian::build_in_frame;
use super::operators::{kron, spin_operators, CMatrix, SpinValue};
use super::species::SpinSpecies;
use super::SpinError;

/// Field (G) at which labels are anchored; small enough that every level is
/// still within first-order perturbation of its zero-field manifold.
pub const ANCHOR_FIELD: f64 = 1e-3;
/// Below this overlap between consecutive eigenvectors a label is considered lost.
pub const OVERLAP_THRESHOLD: f64 = 0.5;
/// Steps with a weaker overlap than this are subdivided.
const REFINE_OVERLAP: f64 = 0.9;
const MAX_REFINE_DEPTH: u32 = 10;
/// Longest single diagonalization step when advancing a tracked state, G.
const MAX_TRACK_STEP: f64 = 2.0;

/// Electron manifold of a state, as twice the m_s value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Manifold(pub i8);

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "0"),
            m if m % 2 == 0 => write!(f, "{:+}", m / 2),
            m => write!(f, "{:+}/2", m),
        }
    }
}

/// Adiabatic state label, e.g. `ms=-1` or `ms=+1:1` for the second
/// nuclear sublevel (by energy at the anchor field) of the m_s = +1 manifold.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateLabel {
    pub manifold: Manifold,
    pub sublevel: Option<usize>,
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ms={}", self.manifold)?;
        if let Some(k) = self.sublevel {
            write!(f, ":{k}")?;
        }
        Ok(())
    }
}

/// Energies and eigenvectors at one field amplitude, indexed by label id.
#[derive(Debug, Clone)]
pub struct LevelState {
    pub field: f64,
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
    /// Weakest label overlap met while reaching this state.
    pub overlap: f64,
}

/// Tracks the labelled levels of one species instance along a fixed axis.
#[derive(Debug, Clone)]
pub struct LevelTracker {
    species: SpinSpecies,
    orientation: OrientationClass,
    frame: DefectFrame,
    axis: Vector3<f64>,
    labels: Vec<StateLabel>,
    anchor: LevelState,
}

impl LevelTracker {
    pub fn new(
        species: &SpinSpecies,
        orientation: OrientationClass,
        axis: Vector3<f64>,
    ) -> Result<Self, SpinError> {
        species.validate()?;
        let frame = species.frame(orientation);
        let field = MagneticField::new(ANCHOR_FIELD, axis)?;
        let axis = field.axis();
        let eig = eigensystem(&build_in_frame(species, &field, &frame));
        let labels = anchor_labels(species, &frame, &field, &eig);
        let anchor = LevelState {
            field: ANCHOR_FIELD,
            energies: eig.values.clone(),
            vectors: eig.vectors,
            overlap: 1.0,
        };
        Ok(LevelTracker {
            species: species.clone(),
            orientation,
            frame,
            axis,
            labels,
            anchor,
        })
    }

    pub fn species(&self) -> &SpinSpecies {
        &self.species
    }

    pub fn orientation(&self) -> OrientationClass {
        self.orientation
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn label_index(&self, label: &StateLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn anchor(&self) -> &LevelState {
        &self.anchor
    }

    /// Labelled levels at `amplitude`, tracked from the anchor.
    pub fn at(&self, amplitude: f64) -> LevelState {
        self.advance(&self.anchor, amplitude)
    }

    /// Labelled levels at `amplitude`, tracked from `from`. The returned
    /// `overlap` covers this path only.
    pub fn advance(&self, from: &LevelState, amplitude: f64) -> LevelState {
        let span = amplitude - from.field;
        let chunks = ((span.abs() / MAX_TRACK_STEP).ceil() as usize).max(1);
        let mut cur = LevelState {
            overlap: 1.0,
            ..from.clone()
        };
        let mut worst: f64 = 1.0;
        for k in 1..=chunks {
            let target = if k == chunks {
                amplitude
            } else {
                from.field + span * k as f64 / chunks as f64
            };
            cur = self.refine(&cur, target, 0);
            worst = worst.min(cur.overlap);
        }
        cur.overlap = worst;
        cur
    }

    fn refine(&self, prev: &LevelState, amplitude: f64, depth: u32) -> LevelState {
        let next = self.step(prev, amplitude);
        if next.overlap >= REFINE_OVERLAP || depth >= MAX_REFINE_DEPTH {
            return next;
        }
        let mid = 0.5 * (prev.field + amplitude);
        let half = self.refine(prev, mid, depth + 1);
        let rest = self.refine(&half, amplitude, depth + 1);
        LevelState {
            overlap: half.overlap.min(rest.overlap),
            ..rest
        }
    }

    /// One diagonalization plus label assignment against `prev`.
    fn step(&self, prev: &LevelState, amplitude: f64) -> LevelState {
        let field = MagneticField::new(amplitude.max(0.0), self.axis)
            .expect("axis validated at construction");
        let eig = eigensystem(&build_in_frame(&self.species, &field, &self.frame));
        assign(prev, &eig, amplitude)
    }
}

fn expectation(op: &CMatrix, v: &DVector<Complex64>) -> f64 {
    (v.adjoint() * op * v)[(0, 0)].re
}

fn anchor_labels(
    species: &SpinSpecies,
    frame: &DefectFrame,
    field: &MagneticField,
    eig: &Eigensystem,
) -> Vec<StateLabel> {
    let n = eig.dim();
    let nuc_dim = species.nuclear_dim();
    let s = spin_operators(species.spin);
    let id_n = CMatrix::identity(nuc_dim, nuc_dim);
    let sz = kron(&s.z, &id_n);
    let sz2 = kron(&(&s.z * &s.z), &id_n);

    // Projection measured along the field so "+1" is the branch that rises
    // with the field, whichever way the defect axis points.
    let bz = frame.to_defect(&field.axis())[2];
    let sign = if bz < -1e-12 { -1.0 } else { 1.0 };

    let cols: Vec<DVector<Complex64>> = (0..n).map(|k| eig.vectors.column(k).into_owned()).collect();
    let proj: Vec<f64> = cols.iter().map(|v| sign * expectation(&sz, v)).collect();
    let proj2: Vec<f64> = cols.iter().map(|v| expectation(&sz2, v)).collect();

    let mut manifold = vec![Manifold(0); n];
    let by = |key: &[f64], idx: &mut Vec<usize>, descending: bool| {
        idx.sort_by(|&a, &b| {
            let ord = key[a].partial_cmp(&key[b]).unwrap_or(std::cmp::Ordering::Equal);
            let ord = if descending { ord.reverse() } else { ord };
            // ties go to eigenvalue order
            ord.then(a.cmp(&b))
        });
    };
    match species.spin {
        SpinValue::One => {
            let mut idx: Vec<usize> = (0..n).collect();
            by(&proj2, &mut idx, false);
            let (zero, upper) = idx.split_at(nuc_dim);
            for &k in zero {
                manifold[k] = Manifold(0);
            }
            let mut upper = upper.to_vec();
            by(&proj, &mut upper, true);
            for (r, &k) in upper.iter().enumerate() {
                manifold[k] = if r < nuc_dim { Manifold(2) } else { Manifold(-2) };
            }
        }
        SpinValue::Half => {
            let mut idx: Vec<usize> = (0..n).collect();
            by(&proj, &mut idx, true);
            for (r, &k) in idx.iter().enumerate() {
                manifold[k] = if r < nuc_dim { Manifold(1) } else { Manifold(-1) };
            }
        }
    }

    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let sublevel = if nuc_dim > 1 {
            // eigen order is ascending energy
            Some((0..k).filter(|&j| manifold[j] == manifold[k]).count())
        } else {
            None
        };
        labels.push(StateLabel {
            manifold: manifold[k],
            sublevel,
        });
    }
    labels
}

/// Groups ascending eigenvalues into numerically degenerate clusters.
fn clusters(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

fn assign(prev: &LevelState, eig: &Eigensystem, amplitude: f64) -> LevelState {
    let n = eig.dim();
    let overlap = prev.vectors.adjoint() * &eig.vectors; // (prev i, new j)
    let groups = clusters(&eig.values);
    let weight: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            groups
                .iter()
                .map(|g| g.clone().map(|j| overlap[(i, j)].norm_sqr()).sum())
                .collect()
        })
        .collect();

    // Greedy maximum-weight assignment of previous states to clusters.
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..groups.len()).map(move |c| (i, c)))
        .collect();
    pairs.sort_by(|&(i1, c1), &(i2, c2)| {
        weight[i2][c2]
            .partial_cmp(&weight[i1][c1])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(c1.cmp(&c2))
            .then(i1.cmp(&i2))
    });
    let mut state_cluster = vec![usize::MAX; n];
    let mut room: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    for (i, c) in pairs {
        if state_cluster[i] == usize::MAX && room[c] > 0 {
            state_cluster[i] = c;
            room[c] -= 1;
        }
    }

    let mut energies = vec![0.0; n];
    let mut vectors = CMatrix::zeros(n, n);
    let mut worst: f64 = 1.0;
    for (c, g) in groups.iter().enumerate() {
        let mut members: Vec<usize> = (0..n).filter(|&i| state_cluster[i] == c).collect();
        members.sort_by(|&a, &b| {
            weight[b][c]
                .partial_cmp(&weight[a][c])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let energy = g.clone().map(|j| eig.values[j]).sum::<f64>() / g.len() as f64;
        let basis: Vec<DVector<Complex64>> =
            g.clone().map(|j| eig.vectors.column(j).into_owned()).collect();

        if g.len() == 1 {
            let i = members[0];
            vectors.set_column(i, &basis[0]);
            energies[i] = eig.values[g.start];
            worst = worst.min(weight[i][c]);
            continue;
        }

        // Degenerate cluster: keep each previous vector's projection,
        // orthonormalized in order of decreasing weight.
        let mut chosen: Vec<DVector<Complex64>> = Vec::with_capacity(g.len());
        let mut pending = Vec::new();
        for &i in &members {
            let mut p = DVector::<Complex64>::zeros(n);
            let prev_i = prev.vectors.column(i);
            for b in &basis {
                p += b * (b.adjoint() * prev_i)[(0, 0)];
            }
            for q in &chosen {
                p -= q * (q.adjoint() * &p)[(0, 0)];
            }
            let norm = p.norm();
            if norm > 1e-6 {
                let q = p / Complex64::new(norm, 0.0);
                vectors.set_column(i, &q);
                chosen.push(q);
            } else {
                pending.push(i);
            }
            energies[i] = energy;
            worst = worst.min(weight[i][c]);
        }
        // Fill anything left with the orthogonal complement inside the cluster.
        for i in pending {
            for b in &basis {
                let mut p = b.clone();
                for q in &chosen {
                    p -= q * (q.adjoint() * &p)[(0, 0)];
                }
                let norm = p.norm();
                if norm > 1e-6 {
                    let q = p / Complex64::new(norm, 0.0);
                    vectors.set_column(i, &q);
                    chosen.push(q);
                    break;
                }
            }
        }
    }

    LevelState {
        field: amplitude,
        energies,
        vectors,
        overlap: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::species::GAMMA_E;

    #[test]
    fn nv_labels_on_100() {
        let nv = SpinSpecies::nv();
        for o in OrientationClass::all() {
            let t = LevelTracker::new(&nv, o, Vector3::x()).unwrap();
            let names: Vec<String> = t.labels().iter().map(|l| l.to_string()).collect();
            assert_eq!(names, vec!["ms=0", "ms=-1", "ms=+1"], "class {}", o.label());
        }
    }

    #[test]
    fn axial_tracking_exact() {
        let nv = SpinSpecies::nv();
        let o = OrientationClass::all()[0];
        let t = LevelTracker::new(&nv, o, o.symmetry_axis()).unwrap();
        let zero = t.label_index(&StateLabel { manifold: Manifold(0), sublevel: None }).unwrap();
        let minus = t.label_index(&StateLabel { manifold: Manifold(-2), sublevel: None }).unwrap();
        let plus = t.label_index(&StateLabel { manifold: Manifold(2), sublevel: None }).unwrap();
        // Past the ms=0 / ms=-1 level crossing near 1024 G the labels must follow the states.
        for b in [10.0, 500.0, 1200.0] {
            let s = t.at(b);
            assert!(s.overlap > 0.99);
            let lo = s.energies[minus] - s.energies[zero];
            let hi = s.energies[plus] - s.energies[zero];
            assert!((lo - (2870.0 - GAMMA_E * b)).abs() < 1e-9 * 2870.0, "{b} {lo}");
            assert!((hi - (2870.0 + GAMMA_E * b)).abs() < 1e-9 * 2870.0);
        }
    }

    #[test]
    fn zero_field_reachable() {
        let nv = SpinSpecies::nv();
        let t = LevelTracker::new(&nv, OrientationClass::all()[1], Vector3::x()).unwrap();
        let s = t.at(0.0);
        assert!(s.overlap > 0.99, "{}", s.overlap);
        assert!(s.energies.iter().filter(|e| (*e - 2870.0).abs() < 1e-9).count() == 2);
    }

    #[test]
    fn manifold_display() {
        assert_eq!(Manifold(1).to_string(), "+1/2");
        assert_eq!(Manifold(-1).to_string(), "-1/2");
        assert_eq!(Manifold(-2).to_string(), "-1");
        let l = StateLabel { manifold: Manifold(2), sublevel: Some(1) };
        assert_eq!(l.to_string(), "ms=+1:1");
    }
}

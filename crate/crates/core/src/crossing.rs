//! Field sweeps and resonance search.
//!
//! A sweep tracks every labelled transition of a species along a fixed axis
//! on a uniform amplitude grid. Resonances between two curve sets are the
//! sign changes of their frequency difference on that grid, each refined by
//! bisection with fresh diagonalizations at the trial field.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::transitions::{frequency, transition_pairs};
use crate::spin::{
    LevelState, LevelTracker, OrientationClass, SelectionRule, SpinError, SpinSpecies,
};

pub const DEFAULT_STEP: f64 = 0.1;
/// Curves closer than this everywhere on the grid are the same curve, MHz.
const COINCIDENT_TOL: f64 = 1e-6;
/// A grid value of |fa - fb| at or below this counts as an exact hit, MHz.
const GRID_ZERO_TOL: f64 = 1e-6;
/// Bisection stops once the bracket is this narrow, G.
const BISECT_WIDTH: f64 = 1e-6;
/// Maximum frequency mismatch accepted after refinement, MHz.
pub const REFINED_TOL: f64 = 1e-3;
/// Events from one curve pair closer than this are merged, G.
pub const MERGE_DISTANCE: f64 = 0.05;
const SLOPE_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum CrossingError {
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("curves do not share a sweep grid")]
    GridMismatch,
    #[error("the three-body search needs a cubic <100> sweep axis")]
    NotCubicAxis,
}

/// Uniform amplitude grid along a fixed field axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    axis: Vector3<f64>,
    b_min: f64,
    b_max: f64,
    step: f64,
}

impl SweepSpec {
    pub fn new(axis: Vector3<f64>, b_min: f64, b_max: f64, step: f64) -> Result<Self, CrossingError> {
        let norm = axis.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(CrossingError::InvalidSweep("axis has zero length".into()));
        }
        if !(b_min >= 0.0) || !(b_min < b_max) || !b_max.is_finite() {
            return Err(CrossingError::InvalidSweep(format!(
                "need 0 <= B_min < B_max, got {b_min}..{b_max}"
            )));
        }
        if !(step > 0.0) || (b_max - b_min) / step < 2.0 {
            return Err(CrossingError::InvalidSweep(format!(
                "step {step} G leaves fewer than 3 grid points"
            )));
        }
        Ok(SweepSpec {
            axis: axis / norm,
            b_min,
            b_max,
            step,
        })
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn range(&self) -> (f64, f64) {
        (self.b_min, self.b_max)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Grid points; the last one is exactly `b_max`.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.b_max - self.b_min) / self.step - 1e-9).ceil() as usize;
        let mut g: Vec<f64> = (0..n).map(|k| self.b_min + self.step * k as f64).collect();
        g.push(self.b_max);
        g
    }

    pub fn with_step(&self, step: f64) -> Result<Self, CrossingError> {
        Self::new(self.axis, self.b_min, self.b_max, step)
    }
}

/// Tracked levels of one species instance at every grid point.
#[derive(Debug)]
struct TrackedSweep {
    tracker: LevelTracker,
    states: Vec<LevelState>,
}

impl TrackedSweep {
    fn run(species: &SpinSpecies, orientation: OrientationClass, grid: &[f64], axis: Vector3<f64>) -> Result<Self, SpinError> {
        let tracker = LevelTracker::new(species, orientation, axis)?;
        let mut states = Vec::with_capacity(grid.len());
        let mut cur = tracker.at(grid[0]);
        states.push(cur.clone());
        for &b in &grid[1..] {
            cur = tracker.advance(&cur, b);
            states.push(cur.clone());
        }
        Ok(TrackedSweep { tracker, states })
    }

    fn state_at(&self, b: f64, left: usize) -> LevelState {
        self.tracker.advance(&self.states[left], b)
    }
}

#[derive(Debug, Clone)]
enum CurveSource {
    Tracked {
        sweep: Arc<TrackedSweep>,
        pair: (usize, usize),
    },
    Difference(Box<CurveSource>, Box<CurveSource>),
}

impl CurveSource {
    /// Exact frequency at `b`, starting the label tracking from grid point `left`.
    fn eval(&self, b: f64, left: usize) -> f64 {
        match self {
            CurveSource::Tracked { sweep, pair } => frequency(&sweep.state_at(b, left), *pair),
            CurveSource::Difference(p, m) => p.eval(b, left) - m.eval(b, left),
        }
    }
}

/// One labelled transition sampled along a sweep.
#[derive(Debug, Clone)]
pub struct TransitionCurve {
    pub species: String,
    /// Orientation classes that produce this same curve.
    pub classes: Vec<u8>,
    pub from_state: String,
    pub to_state: String,
    /// (B in G, f in MHz), strictly increasing in B.
    pub samples: Vec<(f64, f64)>,
    /// Weakest eigenvector overlap met while tracking labels.
    pub min_overlap: f64,
    source: CurveSource,
}

impl TransitionCurve {
    pub fn multiplicity(&self) -> usize {
        self.classes.len()
    }

    pub fn label(&self) -> String {
        format!("{}->{}", self.from_state, self.to_state)
    }

    /// Label with the orientation classes appended, e.g. `ms=0->ms=-1 [c1,c2]`.
    pub fn qualified_label(&self) -> String {
        let classes: Vec<String> = self.classes.iter().map(|c| format!("c{c}")).collect();
        format!("{} [{}]", self.label(), classes.join(","))
    }

    pub fn tracking_ok(&self) -> bool {
        self.min_overlap >= crate::spin::tracking::OVERLAP_THRESHOLD
    }

    pub fn fields(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    /// Frequency at `b` from a fresh diagonalization.
    pub fn frequency_at(&self, b: f64) -> f64 {
        let left = self.left_index(b);
        self.source.eval(b, left)
    }

    fn left_index(&self, b: f64) -> usize {
        let n = self.samples.len();
        match self.samples.binary_search_by(|s| s.0.partial_cmp(&b).unwrap()) {
            Ok(k) => k,
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 1),
        }
    }

    fn same_identity(&self, other: &TransitionCurve) -> bool {
        self.species == other.species
            && self.classes == other.classes
            && self.from_state == other.from_state
            && self.to_state == other.to_state
    }

    /// Synthetic curve `self - other` on the shared grid.
    pub fn difference(&self, other: &TransitionCurve) -> Result<TransitionCurve, CrossingError> {
        if !same_grid(self, other) {
            return Err(CrossingError::GridMismatch);
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a.0, a.1 - b.1))
            .collect();
        Ok(TransitionCurve {
            species: self.species.clone(),
            classes: self.classes.clone(),
            from_state: format!("({})", self.label()),
            to_state: format!("({})", other.label()),
            samples,
            min_overlap: self.min_overlap.min(other.min_overlap),
            source: CurveSource::Difference(
                Box::new(self.source.clone()),
                Box::new(other.source.clone()),
            ),
        })
    }
}

impl fmt::Display for TransitionCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.species, self.qualified_label())
    }
}

fn same_grid(a: &TransitionCurve, b: &TransitionCurve) -> bool {
    a.samples.len() == b.samples.len() && a.samples.iter().zip(&b.samples).all(|(x, y)| x.0 == y.0)
}

/// One curve per (orientation, labelled transition); instances that give
/// the same curve are merged and their classes recorded.
pub fn sweep_curves(
    species: &SpinSpecies,
    spec: &SweepSpec,
    orientations: &[OrientationClass],
    rule: SelectionRule,
) -> Result<Vec<TransitionCurve>, CrossingError> {
    let grid = spec.grid();
    let allowed = species.classes();
    let mut curves: Vec<TransitionCurve> = Vec::new();
    for &o in orientations.iter().filter(|o| allowed.contains(o)) {
        let sweep = Arc::new(TrackedSweep::run(species, o, &grid, spec.axis())?);
        let min_overlap = sweep.states.iter().map(|s| s.overlap).fold(1.0, f64::min);
        let labels = sweep.tracker.labels().to_vec();
        for pair in transition_pairs(&sweep.tracker, rule)? {
            let samples: Vec<(f64, f64)> = grid
                .iter()
                .zip(&sweep.states)
                .map(|(&b, s)| (b, frequency(s, pair)))
                .collect();
            let curve = TransitionCurve {
                species: species.name.clone(),
                classes: vec![o.label()],
                from_state: labels[pair.0].to_string(),
                to_state: labels[pair.1].to_string(),
                samples,
                min_overlap,
                source: CurveSource::Tracked {
                    sweep: Arc::clone(&sweep),
                    pair,
                },
            };
            let twin = curves.iter_mut().find(|c| {
                c.from_state == curve.from_state
                    && c.to_state == curve.to_state
                    && c.samples
                        .iter()
                        .zip(&curve.samples)
                        .all(|(a, b)| (a.1 - b.1).abs() <= COINCIDENT_TOL)
            });
            match twin {
                Some(c) => {
                    c.classes.push(o.label());
                    c.min_overlap = c.min_overlap.min(curve.min_overlap);
                }
                None => curves.push(curve),
            }
        }
    }
    Ok(curves)
}

/// A resonance between two transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub species_a: String,
    pub transition_a: String,
    pub classes_a: Vec<u8>,
    pub species_b: String,
    pub transition_b: String,
    pub classes_b: Vec<u8>,
    /// G.
    pub b_star: f64,
    /// MHz.
    pub f_star: f64,
    /// |dfa/dB - dfb/dB| at `b_star`, MHz/G.
    pub slope_gap: f64,
}

impl CrossingEvent {
    fn involves(&self, a: &TransitionCurve, b: &TransitionCurve) -> bool {
        let matches = |s: &str, t: &str, c: &[u8], curve: &TransitionCurve| {
            s == curve.species && t == curve.label() && c == curve.classes.as_slice()
        };
        (matches(&self.species_a, &self.transition_a, &self.classes_a, a)
            && matches(&self.species_b, &self.transition_b, &self.classes_b, b))
            || (matches(&self.species_a, &self.transition_a, &self.classes_a, b)
                && matches(&self.species_b, &self.transition_b, &self.classes_b, a))
    }
}

/// Every transversal crossing between a curve of `curves_a` and one of `curves_b`.
pub fn find_crossings(
    curves_a: &[TransitionCurve],
    curves_b: &[TransitionCurve],
) -> Result<Vec<CrossingEvent>, CrossingError> {
    if let Some(first) = curves_a.first().or(curves_b.first()) {
        if !curves_a.iter().chain(curves_b).all(|c| same_grid(first, c)) {
            return Err(CrossingError::GridMismatch);
        }
    }
    let mut events: Vec<CrossingEvent> = Vec::new();
    for ca in curves_a {
        for cb in curves_b {
            if ca.same_identity(cb) {
                continue;
            }
            for ev in pair_crossings(ca, cb) {
                let dup = events
                    .iter()
                    .any(|e| e.involves(ca, cb) && (e.b_star - ev.b_star).abs() < MERGE_DISTANCE);
                if !dup {
                    events.push(ev);
                }
            }
        }
    }
    events.sort_by(|a, b| a.b_star.partial_cmp(&b.b_star).unwrap());
    Ok(events)
}

fn pair_crossings(ca: &TransitionCurve, cb: &TransitionCurve) -> Vec<CrossingEvent> {
    let n = ca.samples.len();
    let g: Vec<f64> = (0..n).map(|k| ca.samples[k].1 - cb.samples[k].1).collect();
    let b: Vec<f64> = ca.fields().collect();
    let zero = |v: f64| v.abs() <= GRID_ZERO_TOL;
    let diff = |x: f64, left: usize| ca.source.eval(x, left) - cb.source.eval(x, left);

    let mut roots: Vec<(f64, usize)> = Vec::new();
    for k in 0..n {
        if zero(g[k]) {
            let isolated = (k == 0 || !zero(g[k - 1])) && (k + 1 == n || !zero(g[k + 1]));
            let transversal = k == 0 || k + 1 == n || g[k - 1] * g[k + 1] < 0.0;
            if isolated && transversal {
                roots.push((b[k], k.min(n - 2)));
            }
        } else if k + 1 < n && !zero(g[k + 1]) && g[k] * g[k + 1] < 0.0 {
            let (mut lo, mut hi, mut g_lo) = (b[k], b[k + 1], g[k]);
            while hi - lo > BISECT_WIDTH {
                let mid = 0.5 * (lo + hi);
                let g_mid = diff(mid, k);
                if g_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if g_lo * g_mid < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    g_lo = g_mid;
                }
            }
            roots.push((0.5 * (lo + hi), k));
        }
    }

    let mut out: Vec<CrossingEvent> = Vec::new();
    for (b_star, left) in roots {
        let fa = ca.source.eval(b_star, left);
        let fb = cb.source.eval(b_star, left);
        if (fa - fb).abs() > REFINED_TOL {
            // a jump, not a crossing (only happens where tracking failed)
            continue;
        }
        if out.last().is_some_and(|e| (b_star - e.b_star).abs() < MERGE_DISTANCE) {
            continue;
        }
        let (lo, hi) = (b[0], b[n - 1]);
        let x0 = (b_star - SLOPE_STEP).max(lo);
        let x1 = (b_star + SLOPE_STEP).min(hi);
        let slope_gap = ((diff(x1, left) - diff(x0, left)) / (x1 - x0)).abs();
        out.push(CrossingEvent {
            species_a: ca.species.clone(),
            transition_a: ca.label(),
            classes_a: ca.classes.clone(),
            species_b: cb.species.clone(),
            transition_b: cb.label(),
            classes_b: cb.classes.clone(),
            b_star,
            f_star: 0.5 * (fa + fb),
            slope_gap,
        });
    }
    out
}

/// Fields where a P1 transition frequency equals the splitting between the
/// two NV probe lines, ν(0→+1) − ν(0→−1), for a sweep along a cubic axis.
pub fn p1_three_body_fields(
    nv: &SpinSpecies,
    p1: &SpinSpecies,
    spec: &SweepSpec,
) -> Result<Vec<CrossingEvent>, CrossingError> {
    let a = spec.axis();
    let cubic = [Vector3::x(), Vector3::y(), Vector3::z()]
        .iter()
        .any(|e| (a.dot(e).abs() - 1.0).abs() < 1e-9);
    if !cubic {
        return Err(CrossingError::NotCubicAxis);
    }
    // Along <100> every class is equivalent, so one instance of each suffices.
    let first = [OrientationClass::all()[0]];
    let nv_curves = sweep_curves(nv, spec, &first, SelectionRule::NvProbe)?;
    let upper = nv_curves
        .iter()
        .find(|c| c.to_state == "ms=+1")
        .expect("NV probe curves");
    let lower = nv_curves
        .iter()
        .find(|c| c.to_state == "ms=-1")
        .expect("NV probe curves");
    let splitting = upper.difference(lower)?;
    let p1_curves = sweep_curves(p1, spec, &first, SelectionRule::AllPairs)?;
    find_crossings(&p1_curves, std::slice::from_ref(&splitting))
}

/// Distinct resonance fields, merging events closer than `tol` G.
pub fn distinct_fields(events: &[CrossingEvent], tol: f64) -> Vec<f64> {
    let mut fields: Vec<f64> = events.iter().map(|e| e.b_star).collect();
    fields.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for f in fields {
        if out.last().is_none_or(|&l| f - l > tol) {
            out.push(f);
        }
    }
    out
}

use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::{MagneticField, OrientationClass};
use super::operators::SpinValue;
use super::species::SpinSpecies;
use super::tracking::{LevelState, LevelTracker, Manifold, StateLabel, OVERLAP_THRESHOLD};
use super::SpinError;

/// Which eigenstate pairs count as transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionRule {
    /// |0⟩ → |±1⟩ of a bare spin-1 defect.
    NvProbe,
    /// Every pair of distinct eigenstates.
    AllPairs,
    /// ms=0-like manifold to each ms=±1-like manifold of a spin-1 defect
    /// coupled to a nucleus.
    ComplexSplit,
}

impl SelectionRule {
    /// The rule a species is plotted with unless told otherwise.
    pub fn default_for(species: &SpinSpecies) -> Self {
        match (species.spin, &species.nuclear) {
            (SpinValue::One, None) => SelectionRule::NvProbe,
            (SpinValue::One, Some(_)) => SelectionRule::ComplexSplit,
            (SpinValue::Half, _) => SelectionRule::AllPairs,
        }
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionRule::NvProbe => "NV_PROBE",
            SelectionRule::AllPairs => "ALL_PAIRS",
            SelectionRule::ComplexSplit => "COMPLEX_SPLIT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTransition {
    pub species: String,
    pub orientation: u8,
    pub from_state: StateLabel,
    pub to_state: StateLabel,
    /// MHz, non-negative.
    pub frequency: f64,
}

impl LabeledTransition {
    pub fn label(&self) -> String {
        format!("{}->{}", self.from_state, self.to_state)
    }
}

/// Index pairs (from, to) into the tracker's label list selected by `rule`.
pub fn transition_pairs(
    tracker: &LevelTracker,
    rule: SelectionRule,
) -> Result<Vec<(usize, usize)>, SpinError> {
    let species = tracker.species();
    let labels = tracker.labels();
    let in_manifold = |m: i8| -> Vec<usize> {
        let mut v: Vec<usize> = (0..labels.len())
            .filter(|&k| labels[k].manifold == Manifold(m))
            .collect();
        v.sort_by_key(|&k| labels[k].sublevel);
        v
    };
    let unsupported = || SpinError::UnsupportedSelection {
        species: species.name.clone(),
        rule: rule.to_string(),
    };
    match rule {
        SelectionRule::NvProbe => {
            if species.spin != SpinValue::One || species.nuclear.is_some() {
                return Err(unsupported());
            }
            let zero = in_manifold(0)[0];
            Ok(vec![(zero, in_manifold(-2)[0]), (zero, in_manifold(2)[0])])
        }
        SelectionRule::ComplexSplit => {
            if species.spin != SpinValue::One || species.nuclear.is_none() {
                return Err(unsupported());
            }
            let zero = in_manifold(0);
            let mut out = Vec::new();
            for upper in [-2, 2] {
                for &z in &zero {
                    for u in in_manifold(upper) {
                        out.push((z, u));
                    }
                }
            }
            Ok(out)
        }
        SelectionRule::AllPairs => {
            let n = labels.len();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| labels[a].manifold.cmp(&labels[b].manifold).reverse()
                .then(labels[a].sublevel.cmp(&labels[b].sublevel)));
            let mut out = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    out.push((idx[i], idx[j]));
                }
            }
            Ok(out)
        }
    }
}

pub fn frequency(state: &LevelState, pair: (usize, usize)) -> f64 {
    (state.energies[pair.1] - state.energies[pair.0]).abs()
}

/// Labelled transition frequencies of one species instance at `field`.
///
/// Labels are tracked adiabatically from zero field along the field axis;
/// a lost label is an error rather than a silent relabelling.
pub fn transitions(
    species: &SpinSpecies,
    field: &MagneticField,
    orientation: OrientationClass,
    rule: SelectionRule,
) -> Result<Vec<LabeledTransition>, SpinError> {
    let tracker = LevelTracker::new(species, orientation, field.axis())?;
    let pairs = transition_pairs(&tracker, rule)?;
    let state = tracker.at(field.amplitude());
    if state.overlap < OVERLAP_THRESHOLD {
        return Err(SpinError::TrackingFailure {
            species: species.name.clone(),
            field: field.amplitude(),
            overlap: state.overlap,
        });
    }
    let labels = tracker.labels();
    Ok(pairs
        .into_iter()
        .map(|(a, b)| LabeledTransition {
            species: species.name.clone(),
            orientation: orientation.label(),
            from_state: labels[a].clone(),
            to_state: labels[b].clone(),
            frequency: frequency(&state, (a, b)),
        })
        .collect())
}

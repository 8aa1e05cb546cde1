//! Spin Hamiltonians, their eigensystems and labelled transition frequencies.
//!
//! Energies are in MHz, fields in gauss.

pub mod eigen;
pub mod geometry;
pub mod hamiltonian;
pub mod operators;
pub mod species;
pub mod tracking;
pub mod transitions;

use thiserror::Error;

pub use eigen::{eigensystem, eigensystem_of, Eigensystem};
pub use geometry::{parse_axis, DefectFrame, MagneticField, OrientationClass};
pub use hamiltonian::{build_hamiltonian, build_in_frame, HamiltonianMatrix};
pub use operators::{spin_operators, CMatrix, SpinOperators, SpinValue};
pub use species::{NuclearSpin, SpinSpecies, SymmetryKind, D_NV, GAMMA_C13, GAMMA_E};
pub use tracking::{LevelState, LevelTracker, Manifold, StateLabel};
pub use transitions::{transitions, LabeledTransition, SelectionRule};

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("unsupported spin value {0} (only 1/2 and 1)")]
    UnsupportedSpin(f64),
    #[error("invalid magnetic field: {0}")]
    InvalidField(String),
    #[error("orientation class must be 1..=4, got {0}")]
    InvalidOrientation(u8),
    #[error("species '{0}': {1}")]
    InvalidSpecies(String, String),
    #[error("matrix is not Hermitian (max deviation {0:e} MHz)")]
    NotHermitian(f64),
    #[error("selection rule {rule} does not apply to species '{species}'")]
    UnsupportedSelection { species: String, rule: String },
    #[error("label tracking lost for '{species}' at {field} G (overlap {overlap:.3})")]
    TrackingFailure {
        species: String,
        field: f64,
        overlap: f64,
    },
}

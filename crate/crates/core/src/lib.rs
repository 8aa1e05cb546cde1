//! Cross-relaxation resonance prediction for NV⁻ centers in diamond and
//! analysis of photoluminescence-vs-field scans.
//!
//! * [`spin`]: spin Hamiltonians, eigensystems, adiabatically labelled transitions.
//! * [`catalog`]: JSON species catalog.
//! * [`crossing`]: field sweeps and resonance (level-crossing) search.
//! * [`spectrum`]: scan calibration, baseline removal, dip fitting, ZFS inversion.
//! * [`angular`]: NV class-degeneracy maps versus field direction.
//! * [`output`]: deterministic CSV/JSON writers.

pub mod angular;
pub mod catalog;
pub mod crossing;
pub mod output;
pub mod spectrum;
pub mod spin;

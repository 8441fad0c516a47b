//! Experiment runner for `gil-core`: dataset builds, training grids,
//! learning curves and the end-to-end episode demo. The `gil` binary is a
//! thin command-line layer over this library.

pub mod episode;
pub mod experiment;
pub mod provenance;

pub use experiment::{ExperimentError, ExperimentSpec};
pub use provenance::Provenance;

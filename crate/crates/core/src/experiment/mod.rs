//! Config-driven experiments that write CSV records and a reproducibility
//! manifest.

pub mod config;
pub mod io;
mod run;

pub use config::{
    validate_document, EpsP, ExperimentConfig, ExperimentKind, LearnerKind, Precision, Shots, TaskChoice,
    ValidationReport,
};
pub use io::{Manifest, RunDir, Schema, MANIFEST_FILE};
pub use run::{rerun, resolved_seeds, run, RunSummary};

//! Density-matrix measurement theory: projective implementations of binary
//! POVMs, their approximate and threshold variants, the shift distance, and a
//! randomised checker for the standard measurement lemmas.

pub mod api;
pub mod lab;
pub mod lemmas;
pub mod linalg;
pub mod multi;
pub mod pi;
pub mod povm;
pub mod shift;
pub mod state;

pub use api::{api, api_reference, threshold, Api, ApiOutcome, MeasureParams, ThresholdKind};
pub use lab::{measurement_lab, LabCheck, LabConfig, LabReport};
pub use lemmas::{lemma_suite, lemma_suite_with, LemmaReport, LemmaResult};
pub use pi::{apply_projective, apply_projective_outcome, pi, PiMeasurement, PiOutcome, ProjectiveResult};
pub use povm::{mixture_to_povm, BinaryPovm, ProjectiveMixture};
pub use shift::{shift_distance, symmetric_shift_distance, FiniteDistribution};
pub use state::DensityMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("resource error: {0}")]
    Resource(String),
}

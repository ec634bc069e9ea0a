//! Sparse linear classification: logistic regression and linear SVMs, each
//! with and without an L1 penalty, plus a repeated-holdout evaluation
//! protocol with cross-validated penalty selection.

pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod objectives;
pub mod rng;
pub mod solvers;
pub mod synthgen;

pub use dataset::{Dataset, ModalitySpec, StandardizationParams};
pub use objectives::{ObjectiveKind, ObjectiveSpec, WeightVector};
pub use solvers::{LinearModel, SolverConfig};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! Scenario runner for `sgrobust`: scenario files, sweep manifests, and the
//! `run`, `compare` and `validate` verbs behind the `sgrobust` binary.

pub mod compare;
pub mod diag;
pub mod manifest;
pub mod run;
pub mod scenario;

pub use compare::{compare, Comparison, CompareError};
pub use diag::Diagnostic;
pub use manifest::RunManifest;
pub use run::{run, validate, RunError, RunOptions, RunOutcome};

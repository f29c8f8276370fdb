//! Experiment harness and command-line front end for the spectral
//! goodness-of-fit tests: plan files, Monte Carlo studies, CSV output and
//! SVG power curves.

pub mod cli;
pub mod data;
pub mod error;
pub mod manifest;
pub mod plan;
pub mod plot;
pub mod records;
pub mod studies;

pub use error::{HarnessError, Result};
pub use manifest::{load_plan, parse_plan, RunManifest};
pub use plan::{ExperimentPlan, Method, PlanFile, Study};
pub use records::{PowerRecord, VarianceRecord};

//! Scenario runner for multi-well spectra: JSON scenarios, separation
//! sweeps, decay-rate fits and the `multiwell` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod output;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use error::HarnessError;
pub use fit::{fit_decay_rate, Column, FitRecord};
pub use run::{run_scenario, RunRecord};
pub use scenario::Scenario;
pub use sweep::{sweep_separation, SweepRecord};

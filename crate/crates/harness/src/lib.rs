//! Experiment orchestration for occupation-time fluctuation studies.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod output;
pub mod spec;
pub mod targets;
pub mod verify;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ResultBundle};
pub use spec::{ExperimentId, ExperimentSpec};

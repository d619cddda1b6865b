//! Experiment harness: configuration, exact reference solvers, experiment
//! drivers and result output.

pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod output;
pub mod table;

pub use config::{Experiment, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiments::run_experiment;
pub use output::emit_outputs;
pub use table::{ExperimentOutput, Method, ResultRow, ResultTable};

//! Experiment orchestration: configs, feasible starts, replicated runs, CSV and SVG output.

pub mod config;
pub mod plot;
pub mod run;
pub mod start;

pub use config::{ExperimentConfig, ExperimentKind};
pub use run::{run_experiment, write_outputs, ExperimentOutput, Summary};
pub use start::{build_feasible_start, inner_chain_length, FeasibleStart};

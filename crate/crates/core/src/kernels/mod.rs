//! Coordinate-wise transition kernels.

pub mod ars;
pub mod chains;
pub mod mode;
pub mod sampler;
pub mod scan;
pub mod update;

pub use ars::{ars_sample, ArsWorkspace};
pub use chains::{hier_kernel, logreg_kernel, HierState, LogRegState};
pub use mode::find_mode;
pub use sampler::{SamplerKind, SamplerSpec};
pub use scan::{BlockUpdate, RandomScanKernel, StepTelemetry};
pub use update::{ConditionalUpdate, EvalCache, ProposalSpec, StepSize, UpdateOutcome, Workspace};

//! Exact finite-state twins of the samplers: assembled kernels, conductance,
//! discrepancies, mixing times and inequality checks.

pub mod collapse;
pub mod conductance;
pub mod discrepancy;
pub mod io;
pub mod kernel;
pub mod mixing;
pub mod product;
pub mod rules;
pub mod target;
pub mod verify;

pub use conductance::{conductance, conductance_profile, kappa_of, s_conductance, SConductance};
pub use discrepancy::kernel_discrepancy;
pub use kernel::DiscreteKernel;
pub use mixing::{exact_tv_mixing_time, tv_curve, Start};
pub use rules::{gibbs, random_scan, DiscreteRule, RandomScanMatrix};
pub use target::DiscreteTarget;

pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod lab;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use error::{Error, Result};

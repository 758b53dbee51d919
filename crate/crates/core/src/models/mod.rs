//! Statistical targets with block structure.

pub mod blocks;
pub mod conditional;
pub mod diffusion;
pub mod hier;
pub mod logreg;
pub mod prior;

pub use blocks::BlockSpec;
pub use conditional::{Conditional, Curvature, GaussianConditional};
pub use diffusion::{DiffusionModel, Drift, ThetaPrior};
pub use hier::{generate_dataset, Design, HierDataset, HierDiscreteModel, HierSpec, Psi};
pub use logreg::{generate_logreg, LogRegAlphaModel, Parametrization};
pub use prior::{GaussianStats, NormalGammaPrior};

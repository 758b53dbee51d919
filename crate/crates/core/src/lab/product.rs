//! Tensor products of independent kernels.

use super::conductance::conductance;
use super::kernel::DiscreteKernel;
use super::target::MAX_STATES;
use crate::error::{Error, Result};
use serde::Serialize;

/// ⊗P_j with π = ⊗π_j; the first factor varies slowest.
pub fn product_kernel(factors: &[DiscreteKernel]) -> Result<DiscreteKernel> {
    let Some(first) = factors.first() else {
        return Err(Error::Domain("empty product".into()));
    };
    let n: usize = factors.iter().map(|k| k.len()).product();
    if n > MAX_STATES {
        return Err(Error::Unsupported(format!("product space has {n} states, limit {MAX_STATES}")));
    }
    let mut p = first.p.clone();
    let mut pi = first.pi.clone();
    for k in &factors[1..] {
        p = p.kronecker(&k.p);
        pi = pi.iter().flat_map(|a| k.pi.iter().map(move |b| a * b)).collect();
    }
    DiscreteKernel::new(p, pi)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductCheck {
    pub factor_phi: Vec<f64>,
    pub product_phi: f64,
    /// min_j Φ(P_j)² / 4
    pub bound: f64,
    pub holds: bool,
}

/// Φ(⊗P_j) against min_j Φ²(P_j)/4, all by exact enumeration.
pub fn verify_product_bound(factors: &[DiscreteKernel], tol: f64) -> Result<ProductCheck> {
    let factor_phi = factors.iter().map(conductance).collect::<Result<Vec<_>>>()?;
    let product_phi = conductance(&product_kernel(factors)?)?;
    let bound = factor_phi.iter().map(|p| p * p / 4.0).fold(f64::INFINITY, f64::min);
    Ok(ProductCheck { holds: product_phi >= bound - tol, factor_phi, product_phi, bound })
}

//! Worst-case one-step discrepancy between two kernels over warm starts.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Vertex enumeration visits 2^n subsets times n remainder states.
pub const MAX_DELTA_STATES: usize = 12;

const CAP_EPS: f64 = 1e-12;

/// Calls `visit` with every vertex of {μ : 0 ≤ μ ≤ Mπ, Σμ = 1}: a set filled to
/// capacity plus at most one partially filled state.
pub fn for_each_warm_vertex<F: FnMut(&[f64])>(pi: &[f64], m: f64, mut visit: F) -> Result<()> {
    let n = pi.len();
    if n > MAX_DELTA_STATES {
        return Err(Error::Unsupported(format!("{n} states: warm-start vertex enumeration is limited to {MAX_DELTA_STATES}")));
    }
    if !(m >= 1.0) {
        return Err(Error::Domain(format!("warmness M must be at least 1, got {m}")));
    }
    let cap: Vec<f64> = pi.iter().map(|p| (m * p).min(1.0)).collect();
    let mut mu = vec![0.0; n];
    for mask in 0u64..1 << n {
        let full: f64 = (0..n).filter(|&k| mask >> k & 1 == 1).map(|k| cap[k]).sum();
        let rem = 1.0 - full;
        if rem < -CAP_EPS {
            continue;
        }
        for k in 0..n {
            mu[k] = if mask >> k & 1 == 1 { cap[k] } else { 0.0 };
        }
        if rem.abs() <= CAP_EPS {
            visit(&mu);
            continue;
        }
        for r in (0..n).filter(|&r| mask >> r & 1 == 0) {
            if rem <= cap[r] + CAP_EPS {
                mu[r] = rem.min(cap[r]);
                visit(&mu);
                mu[r] = 0.0;
            }
        }
    }
    Ok(())
}

/// TV distance between μP1 and μP2.
fn tv_after(mu: &[f64], p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> f64 {
    let n = mu.len();
    let mut s = 0.0;
    for y in 0..n {
        let d: f64 = (0..n).map(|x| mu[x] * (p1[(x, y)] - p2[(x, y)])).sum();
        s += d.abs();
    }
    0.5 * s
}

/// Δ(P1, P2, M) = sup over μ ∈ N(π1, M) of ‖μP1 − μP2‖_TV. TV is convex in μ, so the
/// supremum is attained at a vertex of the warm-start polytope.
pub fn kernel_discrepancy(p1: &DMatrix<f64>, p2: &DMatrix<f64>, pi1: &[f64], m: f64) -> Result<f64> {
    let n = pi1.len();
    if p1.shape() != (n, n) || p2.shape() != (n, n) {
        return Err(Error::Domain("kernels and target must share a state space".into()));
    }
    let mut best: f64 = 0.0;
    for_each_warm_vertex(pi1, m, |mu| best = best.max(tv_after(mu, p1, p2)))?;
    Ok(best)
}

//! Feasible starting states for the hierarchical samplers: ψ perturbed around the
//! marginal MLE, then t_J steps of the local kernel with ψ held fixed.

use crate::error::{Error, Result};
use crate::kernels::chains::{HierLocalBlock, HierState};
use crate::kernels::ConditionalUpdate;
use crate::models::{HierDiscreteModel, Psi};
use rand::{Rng, RngCore};
use std::sync::Arc;

/// t_J = ⌈log J / (−log(1 − κ²/2))⌉.
pub fn inner_chain_length(groups: usize, kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Config(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    if groups == 0 {
        return Err(Error::Domain("need at least one group".into()));
    }
    let t = (groups as f64).ln() / -(1.0 - 0.5 * kappa * kappa).ln();
    Ok(t.ceil() as usize)
}

#[derive(Debug)]
pub struct FeasibleStart {
    /// Centre ψ̂ of the ball (MLE, or the moment estimate when the optimiser fails).
    pub center: Psi,
    pub used_mle: bool,
    pub psi: Psi,
    pub inner_steps: usize,
    pub state: HierState,
}

/// Uniform draw from the Euclidean ball of radius r around (μ̂, τ̂); τ is clamped positive.
fn perturb(center: &Psi, radius: f64, rng: &mut dyn RngCore) -> Psi {
    let dim = 2 * center.mu.len();
    let mut v: Vec<f64> = loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            break v;
        }
    };
    v.iter_mut().for_each(|x| *x *= radius);
    let l = center.mu.len();
    let mu = (0..l).map(|k| center.mu[k] + v[k]).collect();
    let tau = (0..l).map(|k| (center.tau[k] + v[l + k]).max(1e-3 * center.tau[k])).collect();
    Psi { mu, tau }
}

/// For ℓ = 1 the centre is the marginal MLE; for ℓ > 1 (no quadrature MLE) it is the
/// caller-supplied `fallback`.
pub fn build_feasible_start(
    model: &Arc<HierDiscreteModel>,
    rule: &ConditionalUpdate,
    c: f64,
    kappa: f64,
    fallback: &Psi,
    rng: &mut dyn RngCore,
) -> Result<FeasibleStart> {
    let j = model.groups();
    let l = model.dim();
    let (center, used_mle) = if l == 1 {
        match model.mle() {
            Ok(p) => (p, true),
            Err(e) => {
                log::warn!("marginal MLE failed ({e}); starting from the moment estimate");
                (model.moment_estimate(), false)
            }
        }
    } else {
        (fallback.clone(), false)
    };
    let radius = c / (j as f64).sqrt();
    let psi = if radius > 0.0 { perturb(&center, radius, rng) } else { center.clone() };
    let mut theta = vec![0.0; j * l];
    for g in 0..j {
        for k in 0..l {
            let sd = psi.tau[k].sqrt().recip();
            theta[g * l + k] = psi.mu[k] + rng.random_range(-3.0..=3.0) * sd;
        }
    }
    let mut state = HierState::new(model, psi.clone(), theta)?;
    let inner_steps = inner_chain_length(j, kappa)?;
    let block = HierLocalBlock { model: model.clone(), rule: rule.clone() };
    for g in 0..j {
        for _ in 0..inner_steps {
            block.update_group(&mut state, g, rng)?;
        }
    }
    Ok(FeasibleStart { center, used_mle, psi, inner_steps, state })
}

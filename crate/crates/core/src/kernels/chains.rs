//! Block updates for the hierarchical and logistic-regression targets.
//!
//! Hierarchical: P = ½ P_ψ + ½ P_θ, where P_ψ is the exact Normal–Gamma draw and P_θ
//! applies the local rule to every group in turn (the θ_j are conditionally independent
//! given ψ). Logistic regression: P = ½ P_α + ½ P_coef.

use super::scan::{BlockUpdate, RandomScanKernel};
use super::update::{ConditionalUpdate, EvalCache, StepSize, UpdateOutcome, Workspace};
use crate::error::{Error, Result};
use crate::models::{HierDiscreteModel, LogRegAlphaModel, Parametrization, Psi};
use rand::RngCore;
use std::sync::Arc;

/// Step size of the random walk on log α in the non-centred parametrisation.
pub const LOG_ALPHA_SIGMA: f64 = 1.0;

#[derive(Debug)]
pub struct HierState {
    pub psi: Psi,
    /// J×ℓ row-major.
    pub theta: Vec<f64>,
    caches: Vec<EvalCache>,
    ws: Workspace,
}

impl HierState {
    pub fn new(model: &HierDiscreteModel, psi: Psi, theta: Vec<f64>) -> Result<Self> {
        psi.validate()?;
        if psi.mu.len() != model.dim() {
            return Err(Error::Domain(format!("psi has {} coordinates, model has {}", psi.mu.len(), model.dim())));
        }
        if theta.len() != model.groups() * model.dim() {
            return Err(Error::Domain(format!("theta has {} entries, expected {}", theta.len(), model.groups() * model.dim())));
        }
        crate::error::ensure_finite(&theta, "theta")?;
        Ok(HierState { psi, theta, caches: vec![EvalCache::default(); model.groups()], ws: Workspace::default() })
    }

    /// Number of traced parameters: Jℓ local values then μ and τ per coordinate.
    pub fn param_count(&self) -> usize {
        self.theta.len() + 2 * self.psi.mu.len()
    }

    pub fn record(&self, out: &mut [f64]) {
        let n = self.theta.len();
        let l = self.psi.mu.len();
        out[..n].copy_from_slice(&self.theta);
        out[n..n + l].copy_from_slice(&self.psi.mu);
        out[n + l..n + 2 * l].copy_from_slice(&self.psi.tau);
    }

    fn invalidate(&mut self) {
        self.caches.iter_mut().for_each(EvalCache::invalidate);
    }
}

pub struct HierPsiBlock {
    pub model: Arc<HierDiscreteModel>,
}

impl BlockUpdate<HierState> for HierPsiBlock {
    fn label(&self) -> String {
        "psi".into()
    }

    fn update(&self, s: &mut HierState, rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
        let (j, l) = (self.model.groups(), self.model.dim());
        let mut col = vec![0.0; j];
        for k in 0..l {
            for g in 0..j {
                col[g] = s.theta[g * l + k];
            }
            let (mu, tau) = self.model.prior[k].update(&col, rng)?;
            s.psi.mu[k] = mu;
            s.psi.tau[k] = tau;
        }
        s.invalidate();
        // no likelihood evaluations are involved in the conjugate draw
        Ok(UpdateOutcome { proposals: 1, accepted: 1, evals: 0 })
    }
}

pub struct HierLocalBlock {
    pub model: Arc<HierDiscreteModel>,
    pub rule: ConditionalUpdate,
}

impl HierLocalBlock {
    /// Applies the rule to group `g` only.
    pub fn update_group(&self, s: &mut HierState, g: usize, rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
        let l = self.model.dim();
        let HierState { psi, theta, caches, ws } = s;
        let cond = self.model.local_conditional(g, psi);
        self.rule.apply(&cond, &mut theta[g * l..(g + 1) * l], &mut caches[g], ws, rng)
    }
}

impl BlockUpdate<HierState> for HierLocalBlock {
    fn label(&self) -> String {
        "theta".into()
    }

    fn update(&self, s: &mut HierState, rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
        let mut total = UpdateOutcome::default();
        for g in 0..self.model.groups() {
            total += self.update_group(s, g, rng)?;
        }
        Ok(total)
    }
}

pub fn hier_kernel(model: Arc<HierDiscreteModel>, rule: ConditionalUpdate) -> Result<RandomScanKernel<HierState>> {
    rule.validate()?;
    RandomScanKernel::uniform(vec![Box::new(HierPsiBlock { model: model.clone() }), Box::new(HierLocalBlock { model, rule })])
}

#[derive(Debug)]
pub struct LogRegState {
    pub alpha: f64,
    /// θ (centred) or β (non-centred).
    pub coef: Vec<f64>,
    coef_cache: EvalCache,
    alpha_cache: EvalCache,
    ws: Workspace,
}

impl LogRegState {
    pub fn new(model: &LogRegAlphaModel, alpha: f64, coef: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        if coef.len() != model.d() {
            return Err(Error::Domain(format!("coefficient vector has {} entries, expected {}", coef.len(), model.d())));
        }
        crate::error::ensure_finite(&coef, "coefficients")?;
        Ok(LogRegState { alpha, coef, coef_cache: EvalCache::default(), alpha_cache: EvalCache::default(), ws: Workspace::default() })
    }

    pub fn param_count(&self) -> usize {
        self.coef.len() + 1
    }

    pub fn record(&self, out: &mut [f64]) {
        let d = self.coef.len();
        out[..d].copy_from_slice(&self.coef);
        out[d] = self.alpha;
    }
}

pub struct AlphaBlock {
    pub model: Arc<LogRegAlphaModel>,
}

impl BlockUpdate<LogRegState> for AlphaBlock {
    fn label(&self) -> String {
        "alpha".into()
    }

    fn update(&self, s: &mut LogRegState, rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
        let out = match self.model.param {
            Parametrization::Centered => {
                s.alpha = self.model.sample_alpha_centered(&s.coef, rng)?;
                UpdateOutcome { proposals: 1, accepted: 1, evals: 0 }
            }
            Parametrization::NonCentered => {
                let LogRegState { alpha, coef, alpha_cache, ws, .. } = s;
                let cond = self.model.log_alpha_conditional(coef);
                let mut u = [alpha.ln()];
                let rule = ConditionalUpdate::Rwm(StepSize::Fixed { sigma: LOG_ALPHA_SIGMA });
                let o = rule.apply(&cond, &mut u, alpha_cache, ws, rng)?;
                *alpha = u[0].exp();
                o
            }
        };
        if out.accepted > 0 {
            s.coef_cache.invalidate();
        }
        Ok(out)
    }
}

pub struct CoefBlock {
    pub model: Arc<LogRegAlphaModel>,
    pub rule: ConditionalUpdate,
}

impl BlockUpdate<LogRegState> for CoefBlock {
    fn label(&self) -> String {
        "coef".into()
    }

    fn update(&self, s: &mut LogRegState, rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
        let LogRegState { alpha, coef, coef_cache, alpha_cache, ws } = s;
        let cond = self.model.coef_conditional(*alpha)?;
        let out = self.rule.apply(&cond, coef, coef_cache, ws, rng)?;
        if out.accepted > 0 {
            alpha_cache.invalidate();
        }
        Ok(out)
    }
}

pub fn logreg_kernel(model: Arc<LogRegAlphaModel>, rule: ConditionalUpdate) -> Result<RandomScanKernel<LogRegState>> {
    rule.validate()?;
    RandomScanKernel::uniform(vec![Box::new(AlphaBlock { model: model.clone() }), Box::new(CoefBlock { model, rule })])
}

//! Conditional update rules: one π_i(·|x_{-i})-invariant step on a single block.

use super::ars::{ars_sample, ArsWorkspace};
use super::mode::find_mode;
use crate::error::{Error, Result};
use crate::models::Conditional;
use crate::special::{log1pexp, sigmoid};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

/// Default RWM scale, 2.38².
pub const RWM_ETA: f64 = 5.6644;
pub const BARKER_ETA: f64 = 1.0;
pub const MODE_TOL: f64 = 1e-10;
pub const MODE_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum ProposalSpec {
    /// Whatever the conditional supplies through `independent_proposal` (the group prior
    /// for hierarchical local updates).
    FromConditional,
    /// Independent N(mean_k, 1/prec_k) per coordinate.
    Gaussian { mean: Vec<f64>, prec: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// σ² = η/(d L) from the conditional's smoothness certificate.
    Scaled {
        eta: f64,
    },
    Fixed {
        sigma: f64,
    },
}

impl StepSize {
    pub fn sigma<C: Conditional + ?Sized>(&self, cond: &C) -> Result<f64> {
        match *self {
            StepSize::Fixed { sigma } => Ok(sigma),
            StepSize::Scaled { eta } => {
                let curv = cond.curvature().ok_or_else(|| Error::Precondition("scaled step size needs a smoothness certificate".into()))?;
                if !(curv.l > 0.0 && curv.l.is_finite()) {
                    return Err(Error::Precondition(format!("smoothness constant must be positive, got {}", curv.l)));
                }
                Ok(scaled_variance(eta, cond.dim(), curv.l).sqrt())
            }
        }
    }
}

/// σ² = η / (d L).
pub fn scaled_variance(eta: f64, dim: usize, l: f64) -> f64 {
    eta / (dim as f64 * l)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalUpdate {
    Exact,
    Ars,
    Imh(ProposalSpec),
    ImhAtMode,
    Rwm(StepSize),
    Barker(StepSize),
    Repeated { k: usize, inner: Box<ConditionalUpdate> },
    Lazy(Box<ConditionalUpdate>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateOutcome {
    /// MH proposals made (exact draws count as one accepted proposal).
    pub proposals: u32,
    pub accepted: u32,
    /// Conditional log-density evaluations, gradients included.
    pub evals: u64,
}

impl std::ops::AddAssign for UpdateOutcome {
    fn add_assign(&mut self, o: Self) {
        self.proposals += o.proposals;
        self.accepted += o.accepted;
        self.evals += o.evals;
    }
}

/// Log-density (and gradient) of the current block value, kept across rejections.
#[derive(Debug, Clone, Default)]
pub struct EvalCache {
    lp: Option<f64>,
    grad: Option<Vec<f64>>,
}

impl EvalCache {
    pub fn invalidate(&mut self) {
        self.lp = None;
        self.grad = None;
    }

    pub fn log_density(&self) -> Option<f64> {
        self.lp
    }

    fn ensure_lp<C: Conditional + ?Sized>(&mut self, cond: &C, x: &[f64], evals: &mut u64) -> f64 {
        match self.lp {
            Some(v) => v,
            None => {
                let v = cond.log_density(x);
                *evals += 1;
                self.lp = Some(v);
                v
            }
        }
    }

    fn ensure_grad<C: Conditional + ?Sized>(&mut self, cond: &C, x: &[f64], evals: &mut u64) -> f64 {
        if let (Some(lp), Some(_)) = (self.lp, &self.grad) {
            return lp;
        }
        let mut g = self.grad.take().unwrap_or_default();
        g.resize(x.len(), 0.0);
        let lp = cond.log_density_grad(x, &mut g);
        *evals += 1;
        self.lp = Some(lp);
        self.grad = Some(g);
        lp
    }
}

/// Scratch buffers reused across updates.
#[derive(Debug, Default)]
pub struct Workspace {
    pub ars: ArsWorkspace,
    y: Vec<f64>,
    gy: Vec<f64>,
    mean: Vec<f64>,
    prec: Vec<f64>,
}

impl Workspace {
    fn size(&mut self, d: usize) {
        for v in [&mut self.y, &mut self.gy, &mut self.mean, &mut self.prec] {
            v.resize(d, 0.0);
        }
    }
}

fn std_normal(rng: &mut dyn RngCore) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

fn accept(log_ratio: f64, rng: &mut dyn RngCore) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Σ_k log N(x_k; mean_k, 1/prec_k) up to a constant.
fn gauss_log_q(x: &[f64], mean: &[f64], prec: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        let d = x[k] - mean[k];
        s -= 0.5 * prec[k] * d * d;
    }
    s
}

fn ensure_finite_grad(g: &[f64]) -> Result<()> {
    if let Some(v) = g.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite gradient component {v}")));
    }
    Ok(())
}

impl ConditionalUpdate {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConditionalUpdate::Rwm(s) | ConditionalUpdate::Barker(s) => match *s {
                StepSize::Scaled { eta } if !(eta > 0.0 && eta.is_finite()) => {
                    Err(Error::Config(format!("step scale must be positive, got {eta}")))
                }
                StepSize::Fixed { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                    Err(Error::Config(format!("step size must be positive, got {sigma}")))
                }
                _ => Ok(()),
            },
            ConditionalUpdate::Imh(ProposalSpec::Gaussian { mean, prec }) => {
                if mean.len() != prec.len() || prec.iter().any(|p| !(*p > 0.0)) {
                    Err(Error::Config("Gaussian proposal needs matching positive precisions".into()))
                } else {
                    Ok(())
                }
            }
            ConditionalUpdate::Repeated { k, inner } => {
                if *k == 0 {
                    return Err(Error::Config("repeat count must be at least 1".into()));
                }
                inner.validate()
            }
            ConditionalUpdate::Lazy(inner) => inner.validate(),
            _ => Ok(()),
        }
    }

    /// Applies the rule to block value `x` in place.
    pub fn apply<C: Conditional + ?Sized>(
        &self,
        cond: &C,
        x: &mut [f64],
        cache: &mut EvalCache,
        ws: &mut Workspace,
        rng: &mut dyn RngCore,
    ) -> Result<UpdateOutcome> {
        let d = x.len();
        if cond.dim() != d {
            return Err(Error::Precondition(format!("block has {d} coordinates, conditional has {}", cond.dim())));
        }
        ws.size(d);
        let mut out = UpdateOutcome::default();
        match self {
            ConditionalUpdate::Exact => {
                if !cond.sample_exact(rng, x) {
                    return Err(Error::Unsupported("conditional has no closed-form sampler".into()));
                }
                cache.invalidate();
                out.proposals = 1;
                out.accepted = 1;
                out.evals = 1;
            }
            ConditionalUpdate::Ars => {
                let draw = ars_sample(cond, x[0], &mut ws.ars, rng)?;
                x[0] = draw.value;
                cache.invalidate();
                out.proposals = 1;
                out.accepted = 1;
                out.evals = draw.evals;
            }
            ConditionalUpdate::Imh(spec) => {
                match spec {
                    ProposalSpec::FromConditional => {
                        if !cond.independent_proposal(&mut ws.mean, &mut ws.prec) {
                            return Err(Error::Unsupported("conditional supplies no independence proposal".into()));
                        }
                    }
                    ProposalSpec::Gaussian { mean, prec } => {
                        if mean.len() != d {
                            return Err(Error::Precondition("proposal dimension mismatch".into()));
                        }
                        ws.mean.copy_from_slice(mean);
                        ws.prec.copy_from_slice(prec);
                    }
                }
                out = independence_step(cond, x, cache, ws, rng)?;
            }
            ConditionalUpdate::ImhAtMode => {
                let curv = cond
                    .curvature()
                    .ok_or_else(|| Error::Precondition("IMH at the mode needs a strong log-concavity certificate".into()))?;
                cond.location_hint(&mut ws.mean);
                let res = find_mode(cond, &mut ws.mean, MODE_TOL, MODE_MAX_ITER)?;
                ws.prec.iter_mut().for_each(|p| *p = curv.m);
                out = independence_step(cond, x, cache, ws, rng)?;
                out.evals += res.evals;
            }
            ConditionalUpdate::Rwm(step) => {
                let sigma = step.sigma(cond)?;
                let lx = cache.ensure_lp(cond, x, &mut out.evals);
                for k in 0..d {
                    ws.y[k] = x[k] + sigma * std_normal(rng);
                }
                let ly = cond.log_density(&ws.y);
                out.evals += 1;
                out.proposals = 1;
                if ly > f64::NEG_INFINITY && accept(ly - lx, rng) {
                    x.copy_from_slice(&ws.y);
                    cache.lp = Some(ly);
                    cache.grad = None;
                    out.accepted = 1;
                }
            }
            ConditionalUpdate::Barker(step) => {
                let sigma = step.sigma(cond)?;
                let lx = cache.ensure_grad(cond, x, &mut out.evals);
                let gx = cache.grad.as_ref().expect("gradient cached");
                ensure_finite_grad(gx)?;
                for k in 0..d {
                    let z = sigma * std_normal(rng);
                    let w = if rng.random::<f64>() < sigmoid(z * gx[k]) { z } else { -z };
                    ws.y[k] = x[k] + w;
                }
                let ly = cond.log_density_grad(&ws.y, &mut ws.gy);
                out.evals += 1;
                out.proposals = 1;
                if ly > f64::NEG_INFINITY {
                    ensure_finite_grad(&ws.gy)?;
                    let mut log_ratio = ly - lx;
                    for k in 0..d {
                        let w = ws.y[k] - x[k];
                        log_ratio += log1pexp(-w * gx[k]) - log1pexp(w * ws.gy[k]);
                    }
                    if accept(log_ratio, rng) {
                        x.copy_from_slice(&ws.y);
                        cache.lp = Some(ly);
                        cache.grad.as_mut().expect("gradient cached").copy_from_slice(&ws.gy);
                        out.accepted = 1;
                    }
                }
            }
            ConditionalUpdate::Repeated { k, inner } => {
                if *k == 0 {
                    return Err(Error::Config("repeat count must be at least 1".into()));
                }
                for _ in 0..*k {
                    out += inner.apply(cond, x, cache, ws, rng)?;
                }
            }
            ConditionalUpdate::Lazy(inner) => {
                if rng.random::<bool>() {
                    out = inner.apply(cond, x, cache, ws, rng)?;
                }
            }
        }
        Ok(out)
    }
}

/// IMH step with the diagonal Gaussian proposal held in `ws.mean`, `ws.prec`.
fn independence_step<C: Conditional + ?Sized>(
    cond: &C,
    x: &mut [f64],
    cache: &mut EvalCache,
    ws: &mut Workspace,
    rng: &mut dyn RngCore,
) -> Result<UpdateOutcome> {
    let d = x.len();
    let mut out = UpdateOutcome { proposals: 1, ..Default::default() };
    let lx = cache.ensure_lp(cond, x, &mut out.evals);
    for k in 0..d {
        ws.y[k] = ws.mean[k] + std_normal(rng) / ws.prec[k].sqrt();
    }
    let ly = cond.log_density(&ws.y);
    out.evals += 1;
    if ly == f64::NEG_INFINITY {
        return Ok(out);
    }
    let log_ratio = ly - lx + gauss_log_q(x, &ws.mean, &ws.prec) - gauss_log_q(&ws.y, &ws.mean, &ws.prec);
    if accept(log_ratio, rng) {
        x.copy_from_slice(&ws.y);
        cache.lp = Some(ly);
        cache.grad = None;
        out.accepted = 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::conditional::FnConditional;
    use crate::models::{Curvature, GaussianConditional};
    use rand::SeedableRng;

    fn rng() -> crate::rng::Stream {
        crate::rng::Stream::seed_from_u64(99)
    }

    #[test]
    fn rwm_scale_arithmetic() {
        assert!((scaled_variance(RWM_ETA, 5, 10.0) - 0.113288).abs() < 1e-12);
    }

    #[test]
    fn imh_with_exact_proposal_always_accepts() {
        let cond = GaussianConditional { mean: vec![0.3, -1.0], prec: 2.0 };
        let mut x = vec![5.0, 5.0];
        let mut cache = EvalCache::default();
        let mut ws = Workspace::default();
        let mut r = rng();
        let rule = ConditionalUpdate::Imh(ProposalSpec::FromConditional);
        for _ in 0..1000 {
            let o = rule.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap();
            assert_eq!(o.accepted, 1);
        }
    }

    #[test]
    fn imh_at_mode_on_gaussian_is_exact() {
        let cond = GaussianConditional { mean: vec![2.0], prec: 4.0 };
        let mut x = vec![-3.0];
        let mut cache = EvalCache::default();
        let mut ws = Workspace::default();
        let mut r = rng();
        for _ in 0..500 {
            let o = ConditionalUpdate::ImhAtMode.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap();
            assert_eq!(o.accepted, 1);
        }
    }

    #[test]
    fn rwm_acceptance_tends_to_one_for_tiny_steps() {
        let cond = GaussianConditional { mean: vec![0.0], prec: 1.0 };
        let rule = ConditionalUpdate::Rwm(StepSize::Fixed { sigma: 1e-6 });
        let mut x = vec![0.5];
        let mut cache = EvalCache::default();
        let mut ws = Workspace::default();
        let mut r = rng();
        let mut acc = 0;
        for _ in 0..10_000 {
            acc += rule.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap().accepted;
        }
        assert!(acc >= 9990, "{acc}");
    }

    #[test]
    fn barker_preserves_gaussian_moments() {
        let (mu, prec) = (1.5, 0.25);
        let cond = GaussianConditional { mean: vec![mu], prec };
        let rule = ConditionalUpdate::Barker(StepSize::Scaled { eta: BARKER_ETA });
        let mut x = vec![mu];
        let mut cache = EvalCache::default();
        let mut ws = Workspace::default();
        let mut r = rng();
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut trace = Vec::with_capacity(n);
        for _ in 0..n {
            rule.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap();
            s1 += x[0];
            s2 += x[0] * x[0];
            trace.push(x[0]);
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let iat = crate::diagnostics::iat(&trace).unwrap().iat;
        let sd = prec.sqrt().recip();
        let se_mean = sd * (iat / n as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se_mean, "mean {mean}");
        // Var(x²) for a Gaussian is 2σ⁴; use it as the standard error scale of the variance
        let se_var = (2.0 / (prec * prec) * iat / n as f64).sqrt();
        assert!((var - 1.0 / prec).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn barker_with_zero_gradient_is_symmetric_rwm() {
        // flat on (−1, 1): the acceptance ratio is then the density ratio only
        let cond = FnConditional {
            logpdf: |_x: f64| 0.0,
            dlogpdf: |_x: f64| 0.0,
            support: (-1.0, 1.0),
            hint: 0.0,
            curvature: Some(Curvature { m: 1.0, l: 1.0 }),
        };
        let rule = ConditionalUpdate::Barker(StepSize::Fixed { sigma: 0.3 });
        let mut x = vec![0.0];
        let mut cache = EvalCache::default();
        let mut ws = Workspace::default();
        let mut r = rng();
        for _ in 0..2000 {
            let before = x[0];
            let o = rule.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap();
            if o.accepted == 0 {
                assert_eq!(x[0], before);
            }
            assert!(x[0] > -1.0 && x[0] < 1.0);
        }
    }

    #[test]
    fn repeated_once_matches_inner_stream() {
        let cond = GaussianConditional { mean: vec![0.0, 1.0], prec: 3.0 };
        let inner = ConditionalUpdate::Rwm(StepSize::Scaled { eta: RWM_ETA });
        let rep = ConditionalUpdate::Repeated { k: 1, inner: Box::new(inner.clone()) };
        let (mut a, mut b) = (vec![0.2, 0.2], vec![0.2, 0.2]);
        let (mut ca, mut cb) = (EvalCache::default(), EvalCache::default());
        let mut ws = Workspace::default();
        let (mut ra, mut rb) = (rng(), rng());
        for _ in 0..100 {
            inner.apply(&cond, &mut a, &mut ca, &mut ws, &mut ra).unwrap();
            rep.apply(&cond, &mut b, &mut cb, &mut ws, &mut rb).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn non_finite_gradient_is_a_domain_error() {
        let cond = FnConditional {
            logpdf: |_x: f64| 0.0,
            dlogpdf: |_x: f64| f64::NAN,
            support: (f64::NEG_INFINITY, f64::INFINITY),
            hint: 0.0,
            curvature: None,
        };
        let rule = ConditionalUpdate::Barker(StepSize::Fixed { sigma: 1.0 });
        let err = rule.apply(&cond, &mut [0.0], &mut EvalCache::default(), &mut Workspace::default(), &mut rng()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn rejections_keep_cached_gradient() {
        let cond = GaussianConditional { mean: vec![0.0], prec: 1.0 };
        let rule = ConditionalUpdate::Barker(StepSize::Fixed { sigma: 50.0 });
        let mut x = vec![0.0];
        let mut cache = EvalCache::default();
        let mut ws = Workspace::default();
        let mut r = rng();
        let first = rule.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap();
        assert_eq!(first.evals, 2);
        // huge steps are nearly always rejected; each rejected step costs one evaluation
        let mut total = 0;
        let mut rejected = 0;
        for _ in 0..50 {
            let o = rule.apply(&cond, &mut x, &mut cache, &mut ws, &mut r).unwrap();
            total += o.evals;
            rejected += 1 - o.accepted as u64;
        }
        assert!(rejected > 40);
        assert_eq!(total, 50);
    }
}

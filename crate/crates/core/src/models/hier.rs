//! Hierarchical logistic models: θ_j | ψ ~ ⊗_k N(μ_k, 1/τ_k), Y_ij | θ_j ~ Bernoulli(σ(x_iᵀθ_j)).

use super::conditional::{Conditional, Curvature};
use super::prior::NormalGammaPrior;
use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::{integrate, GaussHermite};
use crate::special::{ln_choose, log1pexp, sigmoid};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// How the linear predictor is formed from θ_j.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    /// ℓ = 1 and x ≡ 1: group counts are binomial.
    Intercept,
    /// One m×ℓ row-major matrix used by every group.
    Shared(Vec<f64>),
    /// J stacked m×ℓ row-major matrices.
    PerGroup(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct HierDiscreteModel {
    groups: usize,
    obs: usize,
    dim: usize,
    design: Design,
    /// Outcomes, J×m row-major, each 0 or 1.
    y: Vec<u8>,
    successes: Vec<u32>,
    /// Per-group Σ_i (y_ij) x_i, J×ℓ.
    xty: Vec<f64>,
    /// Per-group λ_max(Σ_i x_i x_iᵀ) / 4.
    lik_smoothness: Vec<f64>,
    pub prior: Vec<NormalGammaPrior>,
}

/// Global parameters ψ = (μ_1..μ_ℓ, τ_1..τ_ℓ).
#[derive(Debug, Clone, PartialEq)]
pub struct Psi {
    pub mu: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Psi {
    pub fn scalar(mu: f64, tau: f64) -> Self {
        Psi { mu: vec![mu], tau: vec![tau] }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite(&self.mu, "mu")?;
        if self.mu.len() != self.tau.len() {
            return Err(Error::Domain("mu and tau lengths differ".into()));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::Domain(format!("precision must be positive and finite, got {t}")));
        }
        Ok(())
    }
}

fn lambda_max_gram(x: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 0 {
        return 0.0;
    }
    let xm = DMatrix::from_row_slice(rows, cols, x);
    let gram = xm.transpose() * &xm;
    SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(0.0, f64::max)
}

impl HierDiscreteModel {
    pub fn new(groups: usize, obs: usize, dim: usize, design: Design, y: Vec<u8>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("local dimension must be at least 1".into()));
        }
        if y.len() != groups * obs {
            return Err(Error::Domain(format!("expected {} outcomes, got {}", groups * obs, y.len())));
        }
        if let Some(v) = y.iter().find(|&&v| v > 1) {
            return Err(Error::Domain(format!("outcome {v} outside {{0, 1}}")));
        }
        match &design {
            Design::Intercept if dim != 1 => return Err(Error::Domain("intercept design requires dimension 1".into())),
            Design::Shared(x) if x.len() != obs * dim => return Err(Error::Domain(format!("shared design needs {}x{} entries", obs, dim))),
            Design::PerGroup(x) if x.len() != groups * obs * dim => return Err(Error::Domain("per-group design has wrong size".into())),
            Design::Shared(x) | Design::PerGroup(x) => ensure_finite(x, "covariates")?,
            Design::Intercept => {}
        }
        let successes: Vec<u32> = y.chunks(obs.max(1)).take(groups).map(|c| c.iter().map(|&v| v as u32).sum()).collect();
        let successes = if obs == 0 { vec![0; groups] } else { successes };
        let mut xty = vec![0.0; groups * dim];
        let mut lik_smoothness = vec![0.0; groups];
        let shared_l = match &design {
            Design::Intercept => Some(obs as f64 / 4.0),
            Design::Shared(x) => Some(lambda_max_gram(x, obs, dim) / 4.0),
            Design::PerGroup(_) => None,
        };
        for j in 0..groups {
            lik_smoothness[j] = match (&design, shared_l) {
                (_, Some(l)) => l,
                (Design::PerGroup(x), None) => lambda_max_gram(&x[j * obs * dim..(j + 1) * obs * dim], obs, dim) / 4.0,
                _ => unreachable!(),
            };
            for i in 0..obs {
                if y[j * obs + i] == 1 {
                    for k in 0..dim {
                        xty[j * dim + k] += Self::x_at(&design, obs, dim, j, i, k);
                    }
                }
            }
        }
        Ok(HierDiscreteModel { groups, obs, dim, design, y, successes, xty, lik_smoothness, prior: vec![NormalGammaPrior::default(); dim] })
    }

    pub fn with_prior(mut self, prior: NormalGammaPrior) -> Self {
        self.prior = vec![prior; self.dim];
        self
    }

    #[inline]
    fn x_at(design: &Design, obs: usize, dim: usize, j: usize, i: usize, k: usize) -> f64 {
        match design {
            Design::Intercept => 1.0,
            Design::Shared(x) => x[i * dim + k],
            Design::PerGroup(x) => x[(j * obs + i) * dim + k],
        }
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn obs(&self) -> usize {
        self.obs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.y
    }

    pub fn successes(&self) -> &[u32] {
        &self.successes
    }

    pub fn covariate(&self, j: usize, i: usize, k: usize) -> f64 {
        Self::x_at(&self.design, self.obs, self.dim, j, i, k)
    }

    fn x_row(&self, j: usize, i: usize) -> &[f64] {
        match &self.design {
            Design::Intercept => &[1.0],
            Design::Shared(x) => &x[i * self.dim..(i + 1) * self.dim],
            Design::PerGroup(x) => &x[(j * self.obs + i) * self.dim..(j * self.obs + i + 1) * self.dim],
        }
    }

    /// Number of likelihood terms evaluated by one call of a group conditional.
    pub fn local_cost(&self) -> u64 {
        1
    }

    /// log f(Y_j | θ_j) and optionally its gradient.
    pub fn group_loglik(&self, j: usize, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match self.design {
            Design::Intercept => {
                let t = theta[0];
                let m = self.obs as f64;
                let s = self.successes[j] as f64;
                if let Some(g) = grad {
                    g[0] = s - m * sigmoid(t);
                }
                s * t - m * log1pexp(t)
            }
            _ => {
                let d = self.dim;
                let mut ll = 0.0;
                for k in 0..d {
                    ll += self.xty[j * d + k] * theta[k];
                }
                match grad {
                    None => {
                        for i in 0..self.obs {
                            let x = self.x_row(j, i);
                            let eta: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
                            ll -= log1pexp(eta);
                        }
                    }
                    Some(g) => {
                        g.copy_from_slice(&self.xty[j * d..(j + 1) * d]);
                        for i in 0..self.obs {
                            let x = self.x_row(j, i);
                            let eta: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
                            ll -= log1pexp(eta);
                            let p = sigmoid(eta);
                            for k in 0..d {
                                g[k] -= p * x[k];
                            }
                        }
                    }
                }
                ll
            }
        }
    }

    /// Negative Hessian of the group log-likelihood.
    pub fn group_fisher(&self, j: usize, theta: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|v| *v = 0.0);
        match self.design {
            Design::Intercept => {
                let p = sigmoid(theta[0]);
                out[0] = self.obs as f64 * p * (1.0 - p);
            }
            _ => {
                for i in 0..self.obs {
                    let x = self.x_row(j, i);
                    let eta: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
                    let p = sigmoid(eta);
                    let w = p * (1.0 - p);
                    for a in 0..d {
                        for b in 0..d {
                            out[a * d + b] += w * x[a] * x[b];
                        }
                    }
                }
            }
        }
    }

    pub fn local_conditional<'a>(&'a self, j: usize, psi: &'a Psi) -> LocalConditional<'a> {
        LocalConditional { model: self, group: j, psi }
    }

    /// Unnormalised log posterior of (ψ, θ), θ stored group-major (J×ℓ).
    pub fn log_posterior(&self, psi: &Psi, theta: &[f64]) -> Result<f64> {
        psi.validate()?;
        ensure_finite(theta, "theta")?;
        let d = self.dim;
        let mut lp = 0.0;
        for k in 0..d {
            lp += self.prior[k].log_density(psi.mu[k], psi.tau[k]);
        }
        for j in 0..self.groups {
            let t = &theta[j * d..(j + 1) * d];
            lp += self.group_loglik(j, t, None);
            for k in 0..d {
                lp += crate::special::normal_logpdf(t[k], psi.mu[k], psi.tau[k]);
            }
        }
        Ok(lp)
    }

    fn group_mode_1d(&self, j: usize, mu: f64, tau: f64) -> (f64, f64) {
        let mut t = mu;
        let mut g = [0.0];
        for _ in 0..200 {
            self.group_loglik(j, &[t], Some(&mut g));
            let grad = g[0] - tau * (t - mu);
            let mut h = [0.0];
            self.group_fisher(j, &[t], &mut h);
            let curv = h[0] + tau;
            let step = grad / curv;
            t += step;
            if step.abs() < 1e-12 * (1.0 + t.abs()) {
                break;
            }
        }
        let mut h = [0.0];
        self.group_fisher(j, &[t], &mut h);
        (t, h[0] + tau)
    }

    /// Σ_j log ∫ f(Y_j|θ) N(θ; μ, 1/τ) dθ for ℓ = 1.
    pub fn log_marginal_likelihood(&self, psi: &Psi) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::Unsupported(format!(
                "marginal likelihood by quadrature needs a scalar local parameter, model has dimension {}",
                self.dim
            )));
        }
        psi.validate()?;
        if self.obs == 0 {
            return Ok(0.0);
        }
        let (mu, tau) = (psi.mu[0], psi.tau[0]);
        let gh128 = GaussHermite::new(128)?;
        let gh64 = GaussHermite::new(64)?;
        let group_term = |j: usize| -> Result<f64> {
            let (mode, curv) = self.group_mode_1d(j, mu, tau);
            let scale = curv.sqrt().recip();
            let g = |t: f64| self.group_loglik(j, &[t], None) + crate::special::normal_logpdf(t, mu, tau);
            let v128 = gh128.log_integrate(g, mode, scale);
            let v64 = gh64.log_integrate(g, mode, scale);
            // both are log-integrals; compare on the integral scale relative to its size
            if (v128 - v64).abs() <= 1e-8 {
                return Ok(v128);
            }
            let peak = g(mode);
            let r = integrate(|t| (g(t) - peak).exp(), mode - 40.0 * scale, mode + 40.0 * scale, 1e-8, 1e-12)
                .map_err(|e| Error::Numeric(format!("group {j}, psi=({mu}, {tau}): {e}")))?;
            Ok(peak + r.value.ln())
        };
        let mut total = 0.0;
        match self.design {
            Design::Intercept => {
                // groups with equal counts share the integral
                let mut cache: Vec<Option<f64>> = vec![None; self.obs + 1];
                for j in 0..self.groups {
                    let s = self.successes[j] as usize;
                    let v = match cache[s] {
                        Some(v) => v,
                        None => {
                            let v = group_term(j)?;
                            cache[s] = Some(v);
                            v
                        }
                    };
                    total += v + ln_choose(self.obs as u32, s as u32);
                }
            }
            _ => {
                for j in 0..self.groups {
                    total += group_term(j)?;
                }
            }
        }
        Ok(total)
    }

    /// Crude moment estimate of (μ, τ) from empirical logits.
    pub fn moment_estimate(&self) -> Psi {
        let m = self.obs as f64;
        let logits: Vec<f64> = self.successes.iter().map(|&s| ((s as f64 + 0.5) / (m - s as f64 + 0.5)).ln()).collect();
        let n = logits.len().max(1) as f64;
        let mean = logits.iter().sum::<f64>() / n;
        let var = logits.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let p = sigmoid(mean);
        let noise = 1.0 / (m.max(1.0) * p * (1.0 - p));
        let tau = 1.0 / (var - noise).max(0.05);
        Psi::scalar(mean, tau)
    }

    /// Marginal maximum-likelihood estimate of ψ for ℓ = 1 (Nelder–Mead on (μ, log τ)).
    pub fn mle(&self) -> Result<Psi> {
        use argmin::core::{CostFunction, Executor};
        use argmin::solver::neldermead::NelderMead;

        struct Negll<'a>(&'a HierDiscreteModel);
        impl CostFunction for Negll<'_> {
            type Param = Vec<f64>;
            type Output = f64;
            fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
                if !(p[1].abs() < 30.0) {
                    return Ok(f64::INFINITY);
                }
                match self.0.log_marginal_likelihood(&Psi::scalar(p[0], p[1].exp())) {
                    Ok(v) => Ok(-v),
                    Err(_) => Ok(f64::INFINITY),
                }
            }
        }

        if self.dim != 1 {
            return Err(Error::Unsupported("marginal MLE needs a scalar local parameter".into()));
        }
        let start = self.moment_estimate();
        let (m0, lt0) = (start.mu[0], start.tau[0].ln());
        let simplex = vec![vec![m0, lt0], vec![m0 + 0.3, lt0], vec![m0, lt0 + 0.3]];
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-9).map_err(|e| Error::Numeric(e.to_string()))?;
        let res = Executor::new(Negll(self), solver)
            .configure(|s| s.max_iters(500))
            .run()
            .map_err(|e| Error::Numeric(format!("marginal MLE: {e}")))?;
        let best = res.state.best_param.ok_or_else(|| Error::Numeric("marginal MLE returned no parameter".into()))?;
        if !res.state.best_cost.is_finite() {
            return Err(Error::Numeric("marginal MLE stuck at infinite cost".into()));
        }
        Ok(Psi::scalar(best[0], best[1].exp()))
    }
}

/// π(θ_j | ψ, Y_j).
pub struct LocalConditional<'a> {
    model: &'a HierDiscreteModel,
    group: usize,
    psi: &'a Psi,
}

impl Conditional for LocalConditional<'_> {
    fn dim(&self) -> usize {
        self.model.dim
    }

    #[inline]
    fn log_density(&self, x: &[f64]) -> f64 {
        let mut lp = self.model.group_loglik(self.group, x, None);
        for k in 0..x.len() {
            let d = x[k] - self.psi.mu[k];
            lp -= 0.5 * self.psi.tau[k] * d * d;
        }
        lp
    }

    #[inline]
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = self.model.group_loglik(self.group, x, Some(grad));
        for k in 0..x.len() {
            let d = x[k] - self.psi.mu[k];
            lp -= 0.5 * self.psi.tau[k] * d * d;
            grad[k] -= self.psi.tau[k] * d;
        }
        lp
    }

    fn neg_hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.model.dim;
        self.model.group_fisher(self.group, x, out);
        for k in 0..d {
            out[k * d + k] += self.psi.tau[k];
        }
    }

    fn curvature(&self) -> Option<Curvature> {
        let m = self.psi.tau.iter().cloned().fold(f64::INFINITY, f64::min);
        let tmax = self.psi.tau.iter().cloned().fold(0.0, f64::max);
        Some(Curvature { m, l: tmax + self.model.lik_smoothness[self.group] })
    }

    fn independent_proposal(&self, mean: &mut [f64], prec: &mut [f64]) -> bool {
        mean.copy_from_slice(&self.psi.mu);
        prec.copy_from_slice(&self.psi.tau);
        true
    }

    fn location_hint(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.psi.mu);
    }
}

/// How covariates are laid out when generating data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateLayout {
    Intercept,
    Shared,
    PerGroup,
}

#[derive(Debug, Clone)]
pub struct HierSpec {
    pub groups: usize,
    pub obs: usize,
    pub dim: usize,
    pub layout: CovariateLayout,
    /// Covariates other than the intercept are Unif[-range, range].
    pub covariate_range: f64,
}

impl HierSpec {
    pub fn intercept(groups: usize, obs: usize) -> Self {
        HierSpec { groups, obs, dim: 1, layout: CovariateLayout::Intercept, covariate_range: 5.0 }
    }

    pub fn covariates(groups: usize, obs: usize, dim: usize) -> Self {
        let layout = if dim == 1 { CovariateLayout::Intercept } else { CovariateLayout::Shared };
        HierSpec { groups, obs, dim, layout, covariate_range: 5.0 }
    }
}

#[derive(Debug, Clone)]
pub struct HierDataset {
    pub model: HierDiscreteModel,
    pub theta_true: Vec<f64>,
    pub psi_true: Psi,
}

/// Draws θ_j ~ N(μ*, 1/τ*) and Bernoulli outcomes; the first covariate column is the intercept.
pub fn generate_dataset(spec: &HierSpec, psi: &Psi, seed: u64) -> Result<HierDataset> {
    psi.validate()?;
    if psi.mu.len() != spec.dim {
        return Err(Error::Domain(format!("psi has {} coordinates, model has {}", psi.mu.len(), spec.dim)));
    }
    if spec.layout == CovariateLayout::Intercept && spec.dim != 1 {
        return Err(Error::Domain("intercept layout needs dimension 1".into()));
    }
    let mut rng = crate::rng::stream(seed, &[0x4441_5441]);
    let (d, m, jn) = (spec.dim, spec.obs, spec.groups);
    let r = spec.covariate_range;
    let draw_matrix = |rng: &mut crate::rng::Stream| -> Vec<f64> {
        let mut x = vec![1.0; m * d];
        for i in 0..m {
            for k in 1..d {
                x[i * d + k] = rng.random_range(-r..=r);
            }
        }
        x
    };
    let design = match spec.layout {
        CovariateLayout::Intercept => Design::Intercept,
        CovariateLayout::Shared => Design::Shared(draw_matrix(&mut rng)),
        CovariateLayout::PerGroup => {
            let mut all = Vec::with_capacity(jn * m * d);
            for _ in 0..jn {
                all.extend(draw_matrix(&mut rng));
            }
            Design::PerGroup(all)
        }
    };
    let mut theta = vec![0.0; jn * d];
    let mut y = vec![0u8; jn * m];
    for j in 0..jn {
        for k in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            theta[j * d + k] = psi.mu[k] + z / psi.tau[k].sqrt();
        }
        for i in 0..m {
            let eta: f64 = (0..d).map(|k| HierDiscreteModel::x_at(&design, m, d, j, i, k) * theta[j * d + k]).sum();
            y[j * m + i] = (rng.random::<f64>() < sigmoid(eta)) as u8;
        }
    }
    let model = HierDiscreteModel::new(jn, m, d, design, y)?;
    Ok(HierDataset { model, theta_true: theta, psi_true: psi.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn fd_check<C: Conditional>(c: &C, x: &[f64]) {
        let d = x.len();
        let mut g = vec![0.0; d];
        c.log_density_grad(x, &mut g);
        for k in 0..d {
            let h = 1e-5;
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fd = (c.log_density(&xp) - c.log_density(&xm)) / (2.0 * h);
            let scale = g[k].abs().max(1.0);
            assert!((fd - g[k]).abs() / scale < 1e-5, "coord {k}: fd {fd} analytic {}", g[k]);
        }
    }

    #[test]
    fn all_successes_gradient_at_zero() {
        let m = 10;
        let model = HierDiscreteModel::new(1, m, 1, Design::Intercept, vec![1; m]).unwrap();
        let psi = Psi::scalar(0.0, 1.0);
        let c = model.local_conditional(0, &psi);
        let mut g = [0.0];
        c.log_density_grad(&[0.0], &mut g);
        assert!((g[0] - m as f64 / 2.0).abs() < 1e-14);
        fd_check(&c, &[0.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let psi = Psi { mu: vec![0.3, -0.5, 1.0], tau: vec![0.5, 2.0, 1.3] };
        let data = generate_dataset(&HierSpec::covariates(5, 12, 3), &psi, 3).unwrap();
        let mut rng = crate::rng::Stream::seed_from_u64(9);
        for _ in 0..100 {
            let j = rng.random_range(0..5);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            fd_check(&data.model.local_conditional(j, &psi), &x);
        }
    }

    #[test]
    fn degenerate_likelihood_has_zero_log_marginal() {
        let model = HierDiscreteModel::new(3, 0, 1, Design::Intercept, vec![]).unwrap();
        assert_eq!(model.log_marginal_likelihood(&Psi::scalar(0.2, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn concentrated_prior_limit() {
        let model = HierDiscreteModel::new(1, 1, 1, Design::Intercept, vec![0]).unwrap();
        let v = model.log_marginal_likelihood(&Psi::scalar(0.0, 1e6)).unwrap();
        assert!((v.exp() - 0.5).abs() < 1e-6, "{}", v.exp());
    }

    #[test]
    fn marginal_requires_scalar_local_parameter() {
        let psi = Psi { mu: vec![0.0, 0.0], tau: vec![1.0, 1.0] };
        let data = generate_dataset(&HierSpec::covariates(2, 4, 2), &psi, 1).unwrap();
        assert!(matches!(data.model.log_marginal_likelihood(&psi), Err(Error::Unsupported(_))));
    }

    #[test]
    fn marginal_matches_monte_carlo() {
        let model = HierDiscreteModel::new(1, 10, 1, Design::Intercept, [vec![1u8; 7], vec![0u8; 3]].concat()).unwrap();
        let psi = Psi::scalar(0.4, 0.8);
        let exact = model.log_marginal_likelihood(&psi).unwrap().exp();
        let mut rng = crate::rng::Stream::seed_from_u64(11);
        let n = 2_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let t = 0.4 + z / 0.8f64.sqrt();
            let f = (model.group_loglik(0, &[t], None) + ln_choose(10, 7)).exp();
            s += f;
            s2 += f * f;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mc {mean} ± {se}, quad {exact}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = HierSpec::intercept(20, 10);
        let a = generate_dataset(&spec, &Psi::scalar(1.0, 1.0), 5).unwrap();
        let b = generate_dataset(&spec, &Psi::scalar(1.0, 1.0), 5).unwrap();
        assert_eq!(a.model.outcomes(), b.model.outcomes());
        assert_eq!(a.theta_true, b.theta_true);
        let empty = generate_dataset(&HierSpec::intercept(0, 10), &Psi::scalar(1.0, 1.0), 5).unwrap();
        assert_eq!(empty.model.groups(), 0);
        assert!(generate_dataset(&spec, &Psi::scalar(1.0, 0.0), 5).is_err());
    }

    #[test]
    fn empirical_logits_centre_on_expected_value() {
        // E[logit((S+1/2)/(m-S+1/2))] under the generative model, by quadrature over θ
        let m = 10u32;
        let expected = integrate(
            |t| {
                let p = sigmoid(t);
                let phi = (-(t - 1.0) * (t - 1.0) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
                (0..=m)
                    .map(|s| {
                        let pr = (ln_choose(m, s) + s as f64 * p.ln() + (m - s) as f64 * (1.0 - p).ln()).exp();
                        pr * ((s as f64 + 0.5) / (m as f64 - s as f64 + 0.5)).ln()
                    })
                    .sum::<f64>()
                    * phi
            },
            -12.0,
            14.0,
            1e-12,
            1e-12,
        )
        .unwrap()
        .value;
        let data = generate_dataset(&HierSpec::intercept(10_000, m as usize), &Psi::scalar(1.0, 1.0), 42).unwrap();
        let logits: Vec<f64> = data.model.successes().iter().map(|&s| ((s as f64 + 0.5) / (m as f64 - s as f64 + 0.5)).ln()).collect();
        let n = logits.len() as f64;
        let mean = logits.iter().sum::<f64>() / n;
        let sd = (logits.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - expected).abs() < 3.0 * sd / n.sqrt(), "mean {mean} expected {expected}");
    }

    #[test]
    fn mle_is_near_truth_for_many_groups() {
        let data = generate_dataset(&HierSpec::intercept(2000, 10), &Psi::scalar(1.0, 1.0), 8).unwrap();
        let psi = data.model.mle().unwrap();
        assert!((psi.mu[0] - 1.0).abs() < 0.15, "{psi:?}");
        assert!((psi.tau[0].ln()).abs() < 0.4, "{psi:?}");
        // stationarity: the likelihood does not improve in any axis direction
        let base = data.model.log_marginal_likelihood(&psi).unwrap();
        for (dm, dt) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
            let p = Psi::scalar(psi.mu[0] + dm, psi.tau[0] * (1.0 + dt));
            assert!(data.model.log_marginal_likelihood(&p).unwrap() <= base + 1e-6);
        }
    }
}

//! Logistic regression with an unknown prior precision α, centred or non-centred.

use super::conditional::{Conditional, Curvature};
use crate::error::{ensure_finite, Error, Result};
use crate::special::{gamma_logpdf, log1pexp, sigmoid};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parametrization {
    /// θ | α ~ N(0, α⁻¹Σ), linear predictor xᵀθ.
    Centered,
    /// β ~ N(0, Σ), linear predictor xᵀβ/√α.
    NonCentered,
}

#[derive(Debug, Clone)]
pub struct LogRegAlphaModel {
    n: usize,
    d: usize,
    x: DMatrix<f64>,
    y: Vec<u8>,
    xty: DVector<f64>,
    sigma_chol: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    prec_eig: (f64, f64),
    lik_smoothness: f64,
    pub a: f64,
    pub b: f64,
    pub param: Parametrization,
}

impl LogRegAlphaModel {
    pub fn new(x: DMatrix<f64>, y: Vec<u8>, sigma: DMatrix<f64>, a: f64, b: f64, param: Parametrization) -> Result<Self> {
        let (n, d) = x.shape();
        if y.len() != n {
            return Err(Error::Domain(format!("{} outcomes for {} rows", y.len(), n)));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::Domain("outcomes must be 0 or 1".into()));
        }
        ensure_finite(x.as_slice(), "design matrix")?;
        if sigma.shape() != (d, d) {
            return Err(Error::Domain(format!("covariance must be {d}x{d}")));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Domain("gamma hyperparameters must be positive".into()));
        }
        if (&sigma - sigma.transpose()).abs().max() > 1e-12 * sigma.abs().max().max(1.0) {
            return Err(Error::Domain("covariance is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(sigma.clone()).eigenvalues;
        let emin = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(emin > 0.0) {
            return Err(Error::Domain(format!("covariance has non-positive eigenvalue {emin}")));
        }
        let emax = eig.iter().cloned().fold(0.0, f64::max);
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| Error::Domain("covariance not positive definite".into()))?;
        let sigma_inv = chol.inverse();
        let yv = DVector::from_iterator(n, y.iter().map(|&v| v as f64));
        let xty = x.transpose() * yv;
        let gram = x.transpose() * &x;
        let lmax = SymmetricEigen::new(gram).eigenvalues.iter().cloned().fold(0.0, f64::max);
        Ok(LogRegAlphaModel {
            n,
            d,
            x,
            y,
            xty,
            sigma_chol: chol.l(),
            sigma_inv,
            prec_eig: (1.0 / emax, 1.0 / emin),
            lik_smoothness: lmax / 4.0,
            a,
            b,
            param,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.y
    }

    pub fn with_param(&self, param: Parametrization) -> Self {
        LogRegAlphaModel { param, ..self.clone() }
    }

    /// Smallest and largest eigenvalue of Σ⁻¹.
    pub fn precision_eigen_bounds(&self) -> (f64, f64) {
        self.prec_eig
    }

    /// θᵀΣ⁻¹θ.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let d = self.d;
        let mut s = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += self.sigma_inv[(r, c)] * v[c];
            }
            s += v[r] * row;
        }
        s
    }

    fn sigma_inv_times(&self, v: &[f64], out: &mut [f64]) {
        for r in 0..self.d {
            out[r] = (0..self.d).map(|c| self.sigma_inv[(r, c)] * v[c]).sum();
        }
    }

    /// Σ_i [y_i η_i − log(1+e^{η_i})] with η = scale·Xv; gradient wrt v if requested.
    pub fn loglik(&self, v: &[f64], scale: f64, grad: Option<&mut [f64]>) -> f64 {
        let mut ll = scale * (0..self.d).map(|k| self.xty[k] * v[k]).sum::<f64>();
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            for k in 0..self.d {
                g[k] = scale * self.xty[k];
            }
        }
        for i in 0..self.n {
            let mut eta = 0.0;
            for k in 0..self.d {
                eta += self.x[(i, k)] * v[k];
            }
            eta *= scale;
            ll -= log1pexp(eta);
            if let Some(g) = g.as_deref_mut() {
                let p = sigmoid(eta) * scale;
                for k in 0..self.d {
                    g[k] -= p * self.x[(i, k)];
                }
            }
        }
        ll
    }

    fn fisher(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.d;
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n {
            let eta: f64 = scale * (0..d).map(|k| self.x[(i, k)] * v[k]).sum::<f64>();
            let p = sigmoid(eta);
            let w = p * (1.0 - p) * scale * scale;
            for a in 0..d {
                for b in 0..d {
                    out[a * d + b] += w * self.x[(i, a)] * self.x[(i, b)];
                }
            }
        }
    }

    /// Conditional of the coefficient vector (θ or β) given α.
    pub fn coef_conditional(&self, alpha: f64) -> Result<CoefConditional<'_>> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(CoefConditional { model: self, alpha })
    }

    /// Conditional of log α given the coefficients (non-centred case).
    pub fn log_alpha_conditional<'a>(&'a self, coef: &'a [f64]) -> LogAlphaConditional<'a> {
        LogAlphaConditional { model: self, coef }
    }

    /// Exact draw of α | θ in the centred parametrisation.
    pub fn sample_alpha_centered(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<f64> {
        ensure_finite(theta, "theta")?;
        let t = self.quad_form(theta);
        let shape = self.a + 0.5 * self.d as f64;
        let rate = self.b + 0.5 * t;
        Ok(Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Numeric(e.to_string()))?.sample(rng))
    }

    /// Unnormalised joint log posterior of (α, coefficients).
    pub fn log_posterior(&self, alpha: f64, coef: &[f64]) -> f64 {
        if alpha <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let prior_alpha = gamma_logpdf(alpha, self.a, self.b);
        let q = self.quad_form(coef);
        let d = self.d as f64;
        match self.param {
            Parametrization::Centered => prior_alpha + 0.5 * d * alpha.ln() - 0.5 * alpha * q + self.loglik(coef, 1.0, None),
            Parametrization::NonCentered => prior_alpha - 0.5 * q + self.loglik(coef, alpha.sqrt().recip(), None),
        }
    }

    /// Draws a coefficient vector from its prior at precision α (Σ/α, or Σ when non-centred).
    pub fn sample_prior_coef(&self, alpha: f64, rng: &mut dyn RngCore) -> Vec<f64> {
        let z = DVector::from_iterator(self.d, (0..self.d).map(|_| StandardNormal.sample(rng)));
        let v = &self.sigma_chol * z;
        let s = match self.param {
            Parametrization::Centered => alpha.sqrt().recip(),
            Parametrization::NonCentered => 1.0,
        };
        v.iter().map(|x| x * s).collect()
    }
}

pub struct CoefConditional<'a> {
    model: &'a LogRegAlphaModel,
    alpha: f64,
}

impl CoefConditional<'_> {
    fn lik_scale(&self) -> f64 {
        match self.model.param {
            Parametrization::Centered => 1.0,
            Parametrization::NonCentered => self.alpha.sqrt().recip(),
        }
    }

    fn prior_scale(&self) -> f64 {
        match self.model.param {
            Parametrization::Centered => self.alpha,
            Parametrization::NonCentered => 1.0,
        }
    }
}

impl Conditional for CoefConditional<'_> {
    fn dim(&self) -> usize {
        self.model.d
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.model.loglik(x, self.lik_scale(), None) - 0.5 * self.prior_scale() * self.model.quad_form(x)
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let ll = self.model.loglik(x, self.lik_scale(), Some(grad));
        let mut si = vec![0.0; self.model.d];
        self.model.sigma_inv_times(x, &mut si);
        let ps = self.prior_scale();
        let mut q = 0.0;
        for k in 0..self.model.d {
            grad[k] -= ps * si[k];
            q += x[k] * si[k];
        }
        ll - 0.5 * ps * q
    }

    fn neg_hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.model.d;
        self.model.fisher(x, self.lik_scale(), out);
        let ps = self.prior_scale();
        for a in 0..d {
            for b in 0..d {
                out[a * d + b] += ps * self.model.sigma_inv[(a, b)];
            }
        }
    }

    fn curvature(&self) -> Option<Curvature> {
        let (lo, hi) = self.model.prec_eig;
        let ps = self.prior_scale();
        let s = self.lik_scale();
        Some(Curvature { m: ps * lo, l: ps * hi + s * s * self.model.lik_smoothness })
    }
}

/// Density of u = log α given β (non-centred), including the Jacobian e^u.
pub struct LogAlphaConditional<'a> {
    model: &'a LogRegAlphaModel,
    coef: &'a [f64],
}

impl Conditional for LogAlphaConditional<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let u = x[0];
        self.model.a * u - self.model.b * u.exp() + self.model.loglik(self.coef, (-0.5 * u).exp(), None)
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let u = x[0];
        let s = (-0.5 * u).exp();
        // d/du of Σ[y η − log(1+e^η)] with η = s·xᵀβ is −½ Σ (y − σ(η)) η
        let m = self.model;
        let mut ll = 0.0;
        let mut dl = 0.0;
        for i in 0..m.n {
            let eta: f64 = s * (0..m.d).map(|k| m.x[(i, k)] * self.coef[k]).sum::<f64>();
            let yi = m.y[i] as f64;
            ll += yi * eta - log1pexp(eta);
            dl += -0.5 * (yi - sigmoid(eta)) * eta;
        }
        grad[0] = m.a - m.b * u.exp() + dl;
        m.a * u - m.b * u.exp() + ll
    }

    fn neg_hessian(&self, x: &[f64], out: &mut [f64]) {
        let h = 1e-5;
        let mut gp = [0.0];
        let mut gm = [0.0];
        self.log_density_grad(&[x[0] + h], &mut gp);
        self.log_density_grad(&[x[0] - h], &mut gm);
        out[0] = -(gp[0] - gm[0]) / (2.0 * h);
    }
}

#[derive(Debug, Clone)]
pub struct LogRegDataset {
    pub model: LogRegAlphaModel,
    pub theta_true: Vec<f64>,
}

/// Design entries N(0,1), θ* ~ N(0, Σ/α*), outcomes Bernoulli(σ(xᵀθ*)); Σ = I/d.
pub fn generate_logreg(n: usize, d: usize, alpha_true: f64, param: Parametrization, seed: u64) -> Result<LogRegDataset> {
    if !(alpha_true > 0.0) {
        return Err(Error::Domain(format!("alpha* must be positive, got {alpha_true}")));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let mut rng = crate::rng::stream(seed, &[0x4c4f_4752]);
    let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
    let sd = (1.0 / (d as f64 * alpha_true)).sqrt();
    let theta: Vec<f64> = (0..d).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
    let y: Vec<u8> = (0..n)
        .map(|i| {
            let eta: f64 = (0..d).map(|k| x[(i, k)] * theta[k]).sum();
            (rng.random::<f64>() < sigmoid(eta)) as u8
        })
        .collect();
    let sigma = DMatrix::identity(d, d) / d as f64;
    let model = LogRegAlphaModel::new(x, y, sigma, 1.0, 1.0, param)?;
    Ok(LogRegDataset { model, theta_true: theta })
}

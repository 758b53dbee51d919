use crate::error::{Error, Result};
use rand::RngCore;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// μ | τ ~ N(m0, 1/(κ0 τ)), τ ~ Gamma(a, b) (rate parametrisation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalGammaPrior {
    pub a: f64,
    pub b: f64,
    pub kappa0: f64,
    pub m0: f64,
}

impl Default for NormalGammaPrior {
    fn default() -> Self {
        NormalGammaPrior { a: 1.0, b: 1.0, kappa0: 1e-3, m0: 0.0 }
    }
}

/// Sufficient statistics of a sample for the Normal–Gamma update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianStats {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl GaussianStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        crate::error::ensure_finite(values, "normal-gamma update")?;
        Ok(GaussianStats { n: values.len(), sum: values.iter().sum(), sum_sq: values.iter().map(|v| v * v).sum() })
    }
}

/// Normal–Gamma posterior parameters: τ ~ Gamma(shape, rate), μ | τ ~ N(mean, 1/(kappa τ)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGammaPosterior {
    pub shape: f64,
    pub rate: f64,
    pub mean: f64,
    pub kappa: f64,
}

impl NormalGammaPrior {
    pub fn new(a: f64, b: f64, kappa0: f64, m0: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && kappa0 > 0.0 && m0.is_finite()) {
            return Err(Error::Domain(format!("normal-gamma prior needs a, b, kappa0 > 0 (got a={a}, b={b}, kappa0={kappa0}, m0={m0})")));
        }
        Ok(NormalGammaPrior { a, b, kappa0, m0 })
    }

    pub fn posterior(&self, stats: GaussianStats) -> NormalGammaPosterior {
        if stats.n == 0 {
            return NormalGammaPosterior { shape: self.a, rate: self.b, mean: self.m0, kappa: self.kappa0 };
        }
        let n = stats.n as f64;
        let mean = stats.sum / n;
        let ss = (stats.sum_sq - stats.sum * mean).max(0.0);
        let kappa = self.kappa0 + n;
        NormalGammaPosterior {
            shape: self.a + 0.5 * n,
            rate: self.b + 0.5 * ss + self.kappa0 * n * (mean - self.m0).powi(2) / (2.0 * kappa),
            mean: (self.kappa0 * self.m0 + n * mean) / kappa,
            kappa,
        }
    }

    /// One exact draw of (μ, τ) given θ-values, through their sufficient statistics.
    pub fn update(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<(f64, f64)> {
        let stats = GaussianStats::from_values(theta)?;
        Ok(self.posterior(stats).sample(rng))
    }

    /// Joint log-density of (μ, τ), normalised.
    pub fn log_density(&self, mu: f64, tau: f64) -> f64 {
        NormalGammaPosterior { shape: self.a, rate: self.b, mean: self.m0, kappa: self.kappa0 }.log_density(mu, tau)
    }
}

impl NormalGammaPosterior {
    pub fn sample(&self, rng: &mut dyn RngCore) -> (f64, f64) {
        let tau = Gamma::new(self.shape, 1.0 / self.rate).expect("validated gamma parameters").sample(rng);
        let z: f64 = StandardNormal.sample(rng);
        (self.mean + z / (tau * self.kappa).sqrt(), tau)
    }

    pub fn log_density(&self, mu: f64, tau: f64) -> f64 {
        crate::special::gamma_logpdf(tau, self.shape, self.rate) + crate::special::normal_logpdf(mu, self.mean, self.kappa * tau)
    }
}

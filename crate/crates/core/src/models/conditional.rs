use rand::RngCore;

/// Strong log-concavity (`m`) and smoothness (`l`) constants of a conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    pub m: f64,
    pub l: f64,
}

impl Curvature {
    pub fn condition_number(&self) -> f64 {
        self.l / self.m
    }
}

/// A full conditional π_i(· | x_{-i}) with everything but x_i frozen.
///
/// Log-densities are unnormalised. Implementations count nothing; the update rules
/// do the evaluation accounting.
pub trait Conditional {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    /// Returns the log-density and writes its gradient into `grad`.
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Negative Hessian of the log-density, row-major `dim × dim`.
    fn neg_hessian(&self, x: &[f64], out: &mut [f64]);

    fn curvature(&self) -> Option<Curvature> {
        None
    }

    /// Diagonal Gaussian independence proposal (mean, precision) used by plain IMH.
    fn independent_proposal(&self, _mean: &mut [f64], _prec: &mut [f64]) -> bool {
        false
    }

    /// A point near the bulk of the conditional, used to start mode searches.
    fn location_hint(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Closed-form draw, when one exists.
    fn sample_exact(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) -> bool {
        false
    }

    /// Open support interval for one-dimensional conditionals.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// N(mean, 1/prec · I); the reference conditional for kernel tests.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: Vec<f64>,
    pub prec: f64,
}

impl Conditional for GaussianConditional {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * self.prec * x.iter().zip(&self.mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        for k in 0..x.len() {
            grad[k] = -self.prec * (x[k] - self.mean[k]);
        }
        self.log_density(x)
    }

    fn neg_hessian(&self, _x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..d {
            out[k * d + k] = self.prec;
        }
    }

    fn curvature(&self) -> Option<Curvature> {
        Some(Curvature { m: self.prec, l: self.prec })
    }

    fn independent_proposal(&self, mean: &mut [f64], prec: &mut [f64]) -> bool {
        mean.copy_from_slice(&self.mean);
        prec.iter_mut().for_each(|p| *p = self.prec);
        true
    }

    fn location_hint(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.mean);
    }

    fn sample_exact(&self, rng: &mut dyn RngCore, out: &mut [f64]) -> bool {
        use rand_distr::{Distribution, StandardNormal};
        let sd = self.prec.sqrt().recip();
        for (o, m) in out.iter_mut().zip(&self.mean) {
            let z: f64 = StandardNormal.sample(rng);
            *o = m + sd * z;
        }
        true
    }
}

/// Wraps a closure pair as a one-dimensional conditional (gradient by the caller).
pub struct FnConditional<F, G>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    pub logpdf: F,
    pub dlogpdf: G,
    pub support: (f64, f64),
    pub hint: f64,
    pub curvature: Option<Curvature>,
}

impl<F, G> Conditional for FnConditional<F, G>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if x[0] <= self.support.0 || x[0] >= self.support.1 {
            return f64::NEG_INFINITY;
        }
        (self.logpdf)(x[0])
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = (self.dlogpdf)(x[0]);
        self.log_density(x)
    }

    fn neg_hessian(&self, x: &[f64], out: &mut [f64]) {
        let h = 1e-5 * x[0].abs().max(1.0);
        out[0] = -((self.dlogpdf)(x[0] + h) - (self.dlogpdf)(x[0] - h)) / (2.0 * h);
    }

    fn curvature(&self) -> Option<Curvature> {
        self.curvature
    }

    fn location_hint(&self, out: &mut [f64]) {
        out[0] = self.hint;
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }
}

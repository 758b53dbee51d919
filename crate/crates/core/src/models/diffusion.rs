//! Scalar diffusions dX = θ h(X) dt + dB observed on a uniform grid.

use crate::error::{ensure_finite, Error, Result};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drift {
    /// h(x) = sin x
    Sine,
    /// h(x) = −x (Ornstein–Uhlenbeck)
    Ou,
}

impl Drift {
    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        match self {
            Drift::Sine => x.sin(),
            Drift::Ou => -x,
        }
    }

    /// dh/dx
    #[inline]
    pub fn dh(&self, x: f64) -> f64 {
        match self {
            Drift::Sine => x.cos(),
            Drift::Ou => -1.0,
        }
    }

    /// Antiderivative H with H' = h.
    #[inline]
    pub fn big_h(&self, x: f64) -> f64 {
        match self {
            Drift::Sine => -x.cos(),
            Drift::Ou => -0.5 * x * x,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sine" | "sin" => Ok(Drift::Sine),
            "ou" => Ok(Drift::Ou),
            other => Err(Error::Config(format!("unknown drift '{other}' (expected sine or ou)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaPrior {
    Flat,
    /// N(mean, 1/prec) restricted to the support.
    Gaussian {
        mean: f64,
        prec: f64,
    },
}

#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub drift: Drift,
    /// Spacing Δ between observation times.
    pub delta: f64,
    /// Observed values X_{t_0}, ..., X_{t_N}.
    pub obs: Vec<f64>,
    pub support: (f64, f64),
    pub prior: ThetaPrior,
}

impl DiffusionModel {
    pub fn new(drift: Drift, delta: f64, obs: Vec<f64>, support: (f64, f64), prior: ThetaPrior) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("observation spacing must be positive, got {delta}")));
        }
        if obs.len() < 2 {
            return Err(Error::Domain("need at least two observations (N >= 1)".into()));
        }
        ensure_finite(&obs, "observations")?;
        if !(support.0 < support.1) {
            return Err(Error::Domain(format!("empty prior support [{}, {}]", support.0, support.1)));
        }
        if let ThetaPrior::Gaussian { prec, .. } = prior {
            if !(prec > 0.0) {
                return Err(Error::Domain("prior precision must be positive".into()));
            }
        }
        Ok(DiffusionModel { drift, delta, obs, support, prior })
    }

    /// Number of inter-observation intervals N.
    pub fn intervals(&self) -> usize {
        self.obs.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.delta * self.intervals() as f64
    }

    pub fn log_prior(&self, theta: f64) -> f64 {
        if theta < self.support.0 || theta > self.support.1 {
            return f64::NEG_INFINITY;
        }
        match self.prior {
            ThetaPrior::Flat => 0.0,
            ThetaPrior::Gaussian { mean, prec } => -0.5 * prec * (theta - mean).powi(2),
        }
    }
}

/// Euler–Maruyama simulation on a fine grid, recorded at N+1 equally spaced times on [0, T].
pub fn simulate_observations(drift: Drift, theta: f64, x0: f64, horizon: f64, n: usize, substeps: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || substeps == 0 || !(horizon > 0.0) {
        return Err(Error::Domain("need N >= 1, substeps >= 1 and a positive horizon".into()));
    }
    let mut rng = crate::rng::stream(seed, &[0x5344_4521]);
    let dt = horizon / (n * substeps) as f64;
    let sd = dt.sqrt();
    let mut x = x0;
    let mut out = Vec::with_capacity(n + 1);
    out.push(x);
    for _ in 0..n {
        for _ in 0..substeps {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += theta * drift.h(x) * dt + sd * z;
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antiderivatives_are_consistent() {
        for drift in [Drift::Sine, Drift::Ou] {
            for &x in &[-2.0, -0.3, 0.0, 1.1, 2.7] {
                let h = 1e-6;
                let fd = (drift.big_h(x + h) - drift.big_h(x - h)) / (2.0 * h);
                assert!((fd - drift.h(x)).abs() < 1e-8);
                let fd2 = (drift.h(x + h) - drift.h(x - h)) / (2.0 * h);
                assert!((fd2 - drift.dh(x)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn validates_inputs() {
        assert!(DiffusionModel::new(Drift::Sine, 0.0, vec![0.0, 1.0], (0.0, 2.0), ThetaPrior::Flat).is_err());
        assert!(DiffusionModel::new(Drift::Sine, 0.1, vec![0.0], (0.0, 2.0), ThetaPrior::Flat).is_err());
        assert!(DiffusionModel::new(Drift::Sine, 0.1, vec![0.0, 1.0], (2.0, 2.0), ThetaPrior::Flat).is_err());
        assert!(Drift::parse("cubic").is_err());
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = simulate_observations(Drift::Sine, 1.0, 0.0, 1.0, 8, 50, 3).unwrap();
        let b = simulate_observations(Drift::Sine, 1.0, 0.0, 1.0, 8, 50, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 9);
    }
}

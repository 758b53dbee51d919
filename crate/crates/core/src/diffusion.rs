//! Data augmentation for discretely observed scalar diffusions: Brownian-bridge
//! independence proposals for the missing paths and an exact update of θ.
//!
//! Path functional: log G(Y, θ) = −½ ∫ [b²(θ, Y_t) − b′(θ, Y_t)] dt with the left-endpoint
//! rule on the imputation grid. With b = θh this is −½(θ²A − θC), A = ∫h², C = ∫h′.
//! The endpoint term θ[H(X_{t_i}) − H(X_{t_{i−1}})] of the full likelihood does not
//! depend on the path, so it only enters the θ update.
//!
//! `Convention::Ito` uses −½∫[b² + b′] instead, which is what Itô's formula gives for
//! ∫b dX − ½∫b² after removing the endpoint term. The default keeps the form above.

use crate::error::{Error, Result};
use crate::models::diffusion::{DiffusionModel, Drift, ThetaPrior};
use crate::special::{normal_cdf, normal_quantile};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;

pub const DEFAULT_RESOLUTION: usize = 32;
const REJECTION_TRIES: usize = 16;

/// One imputed inter-observation path on a uniform grid of R+1 points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl PathSegment {
    /// A segment with given grid values; the first and last entries are the endpoints.
    pub fn from_values(t0: f64, length: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Precondition(format!("a segment needs R >= 2, got R = {}", values.len().saturating_sub(1))));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Domain(format!("segment length must be positive, got {length}")));
        }
        crate::error::ensure_finite(&values, "path values")?;
        let r = values.len() - 1;
        Ok(PathSegment { t0, dt: length / r as f64, values })
    }

    pub fn resolution(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn length(&self) -> f64 {
        self.dt * self.resolution() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn end(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.t0 + k as f64 * self.dt)
    }

    /// Replaces the interior, keeping the endpoints.
    fn set_interior(&mut self, other: &PathSegment) {
        let r = self.resolution();
        self.values[1..r].copy_from_slice(&other.values[1..r]);
    }
}

/// Brownian bridge from `endpoints.0` at `interval.0` to `endpoints.1` at `interval.1`,
/// sampled on R+1 grid points by sequential conditioning on the previous point.
pub fn sample_brownian_bridge(endpoints: (f64, f64), interval: (f64, f64), r: usize, rng: &mut dyn RngCore) -> Result<PathSegment> {
    let length = interval.1 - interval.0;
    if r < 2 {
        return Err(Error::Precondition(format!("bridge needs R >= 2 grid steps, got {r}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::Domain(format!("bridge interval must have positive length, got {length}")));
    }
    if !(endpoints.0.is_finite() && endpoints.1.is_finite()) {
        return Err(Error::Domain("bridge endpoints must be finite".into()));
    }
    let mut values = vec![0.0; r + 1];
    fill_bridge(&mut values, endpoints, length / r as f64, rng);
    Ok(PathSegment { t0: interval.0, dt: length / r as f64, values })
}

fn fill_bridge(values: &mut [f64], endpoints: (f64, f64), dt: f64, rng: &mut dyn RngCore) {
    let r = values.len() - 1;
    values[0] = endpoints.0;
    values[r] = endpoints.1;
    for k in 1..r {
        // remaining time from t_{k-1} to the right end
        let rem = (r - k + 1) as f64 * dt;
        let y = values[k - 1];
        let mean = y + (endpoints.1 - y) * dt / rem;
        let var = dt * (rem - dt) / rem;
        let z: f64 = StandardNormal.sample(rng);
        values[k] = mean + var.sqrt() * z;
    }
}

/// Sign of the b′ term in the path functional.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// −½∫[b² − b′]
    #[default]
    Reduced,
    /// −½∫[b² + b′]
    Ito,
}

impl Convention {
    fn sign(self) -> f64 {
        match self {
            Convention::Reduced => 1.0,
            Convention::Ito => -1.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(Convention::Reduced),
            "ito" => Ok(Convention::Ito),
            other => Err(Error::Config(format!("unknown Girsanov convention '{other}' (expected reduced or ito)"))),
        }
    }
}

/// Left-endpoint Riemann sums A = Σ h²(Y_k)dt and C = Σ h′(Y_k)dt, k = 0..R−1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathStats {
    pub a: f64,
    pub c: f64,
}

impl PathStats {
    pub fn of(seg: &PathSegment, drift: Drift) -> Result<Self> {
        let r = seg.resolution();
        let (mut a, mut c) = (0.0, 0.0);
        for &y in &seg.values[..r] {
            let h = drift.h(y);
            a += h * h;
            c += drift.dh(y);
        }
        let out = PathStats { a: a * seg.dt, c: c * seg.dt };
        if !(out.a.is_finite() && out.c.is_finite()) {
            return Err(Error::Domain("non-finite drift values along the path".into()));
        }
        Ok(out)
    }

    pub fn log_weight(&self, theta: f64, conv: Convention) -> f64 {
        -0.5 * (theta * theta * self.a - conv.sign() * theta * self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GirsanovWeight {
    pub log_weight: f64,
    /// Grid steps R used for the Riemann sum.
    pub resolution: usize,
    pub dt: f64,
}

pub fn girsanov_log_weight(seg: &PathSegment, theta: f64, drift: Drift) -> Result<GirsanovWeight> {
    girsanov_log_weight_with(seg, theta, drift, Convention::Reduced)
}

pub fn girsanov_log_weight_with(seg: &PathSegment, theta: f64, drift: Drift, conv: Convention) -> Result<GirsanovWeight> {
    if !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be finite, got {theta}")));
    }
    let lw = PathStats::of(seg, drift)?.log_weight(theta, conv);
    if !lw.is_finite() {
        return Err(Error::Domain(format!("non-finite Girsanov weight at theta = {theta}")));
    }
    Ok(GirsanovWeight { log_weight: lw, resolution: seg.resolution(), dt: seg.dt })
}

/// MH accept step in log space; always consumes one uniform.
#[inline]
fn accept(log_ratio: f64, rng: &mut dyn RngCore) -> bool {
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Independence MH step with a fresh bridge proposal and a caller-supplied log G.
pub fn bridge_imh_update_with<F>(seg: &mut PathSegment, rng: &mut dyn RngCore, mut log_g: F) -> Result<bool>
where
    F: FnMut(&PathSegment) -> Result<f64>,
{
    let mut prop = seg.clone();
    fill_bridge(&mut prop.values, (seg.start(), seg.end()), seg.dt, rng);
    let cur = log_g(seg)?;
    let new = log_g(&prop)?;
    let ok = accept(new - cur, rng);
    if ok {
        seg.set_interior(&prop);
    }
    Ok(ok)
}

/// Bridge IMH step targeting the conditional path law given θ and the endpoints.
pub fn bridge_imh_update(seg: &mut PathSegment, theta: f64, drift: Drift, rng: &mut dyn RngCore) -> Result<bool> {
    bridge_imh_update_with(seg, rng, |s| Ok(girsanov_log_weight(s, theta, drift)?.log_weight))
}

/// Gaussian N(mean, 1/prec) restricted to [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedGaussian {
    pub mean: f64,
    pub prec: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedGaussian {
    pub fn new(mean: f64, prec: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(prec > 0.0 && prec.is_finite()) {
            return Err(Error::Numeric(format!("theta posterior has non-positive precision {prec} (degenerate path)")));
        }
        if !mean.is_finite() || !(lo < hi) {
            return Err(Error::Domain(format!("bad truncated Gaussian: mean {mean} on [{lo}, {hi}]")));
        }
        Ok(TruncatedGaussian { mean, prec, lo, hi })
    }

    fn sd(&self) -> f64 {
        self.prec.sqrt().recip()
    }

    fn z_bounds(&self) -> (f64, f64) {
        let sd = self.sd();
        ((self.lo - self.mean) / sd, (self.hi - self.mean) / sd)
    }

    /// Mass of the untruncated Gaussian inside [lo, hi].
    pub fn mass(&self) -> f64 {
        let (a, b) = self.z_bounds();
        if a > 0.0 {
            normal_cdf(-a) - normal_cdf(-b)
        } else {
            normal_cdf(b) - normal_cdf(a)
        }
    }

    pub fn mean_truncated(&self) -> f64 {
        let (a, b) = self.z_bounds();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        self.mean + self.sd() * (phi(a) - phi(b)) / self.mass()
    }

    /// Rejection from the untruncated Gaussian, then inverse CDF.
    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let sd = self.sd();
        for _ in 0..REJECTION_TRIES {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.mean + sd * z;
            if x >= self.lo && x <= self.hi {
                return x;
            }
        }
        let (a, b) = self.z_bounds();
        // work in the lower tail where the CDF keeps its relative precision
        let (a, b, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
        let (fa, fb) = (normal_cdf(a), normal_cdf(b));
        let z = if fb - fa > 0.0 && fb > f64::MIN_POSITIVE * 1e3 {
            let u: f64 = rng.random();
            normal_quantile(fa + u * (fb - fa)).clamp(a, b)
        } else {
            -upper_tail(-b, -a, rng)
        };
        self.mean + sd * if flip { -z } else { z }
    }
}

/// Exponential-proposal rejection for N(0,1) on [a, b], a far in the upper tail.
fn upper_tail(a: f64, b: f64, rng: &mut dyn RngCore) -> f64 {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(lambda).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        let u: f64 = rng.random();
        if z <= b && u.ln() <= -0.5 * (z - lambda).powi(2) {
            return z;
        }
    }
}

/// θ | paths ∝ prior(θ) exp(θB − ½θ²A) on the support.
pub fn theta_posterior(a: f64, b: f64, prior: ThetaPrior, support: (f64, f64)) -> Result<TruncatedGaussian> {
    let (prec, shift) = match prior {
        ThetaPrior::Flat => (a, b),
        ThetaPrior::Gaussian { mean, prec } => (a + prec, b + prec * mean),
    };
    if !(prec > 0.0) {
        return Err(Error::Numeric(format!("quadratic coefficient {prec} <= 0: theta likelihood is not integrable")));
    }
    TruncatedGaussian::new(shift / prec, prec, support.0, support.1)
}

/// Quadratic coefficients (A, B) of the θ log-likelihood given all imputed segments.
pub fn theta_coefficients(model: &DiffusionModel, stats: &[PathStats], conv: Convention) -> (f64, f64) {
    let end_term = model.drift.big_h(model.obs[model.obs.len() - 1]) - model.drift.big_h(model.obs[0]);
    let a: f64 = stats.iter().map(|s| s.a).sum();
    let c: f64 = stats.iter().map(|s| s.c).sum();
    (a, end_term + 0.5 * conv.sign() * c)
}

/// Exact draw of θ given the imputed paths.
pub fn theta_update(model: &DiffusionModel, segments: &[PathSegment], conv: Convention, rng: &mut dyn RngCore) -> Result<f64> {
    let stats = segments.iter().map(|s| PathStats::of(s, model.drift)).collect::<Result<Vec<_>>>()?;
    let (a, b) = theta_coefficients(model, &stats, conv);
    Ok(theta_posterior(a, b, model.prior, model.support)?.sample(rng))
}

/// x ↦ ∫_z^x du/σ(u), which maps dX = μ dt + σ(X) dB to a unit-diffusion process.
pub fn lamperti<F: Fn(f64) -> f64>(values: &[f64], sigma: F, z: f64) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&x| {
            let (lo, hi, sign) = if x >= z { (z, x, 1.0) } else { (x, z, -1.0) };
            let v = crate::quadrature::integrate(
                |u| {
                    let s = sigma(u);
                    if s > 0.0 {
                        1.0 / s
                    } else {
                        f64::NAN
                    }
                },
                lo,
                hi,
                1e-12,
                1e-12,
            )
            .map_err(|e| Error::Domain(format!("Lamperti transform at x = {x}: {e}")))?;
            Ok(sign * v.value)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DaCounters {
    pub theta_updates: u64,
    pub path_sweeps: u64,
    pub proposals: u64,
    pub accepted: u64,
}

impl DaCounters {
    pub fn acceptance(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// Random-scan DA kernel ½G_θ + ½P_paths; P_paths updates every segment by bridge IMH.
#[derive(Debug, Clone)]
pub struct DaSampler {
    model: DiffusionModel,
    segments: Vec<PathSegment>,
    stats: Vec<PathStats>,
    theta: f64,
    conv: Convention,
    pub counters: DaCounters,
}

impl DaSampler {
    /// Starts from fresh bridges between the observations and the given θ.
    pub fn new(model: DiffusionModel, r: usize, theta: f64, rng: &mut dyn RngCore) -> Result<Self> {
        if model.log_prior(theta) == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("initial theta {theta} outside the prior support")));
        }
        let mut segments = Vec::with_capacity(model.intervals());
        for i in 0..model.intervals() {
            let t0 = i as f64 * model.delta;
            segments.push(sample_brownian_bridge((model.obs[i], model.obs[i + 1]), (t0, t0 + model.delta), r, rng)?);
        }
        let stats = segments.iter().map(|s| PathStats::of(s, model.drift)).collect::<Result<Vec<_>>>()?;
        Ok(DaSampler { model, segments, stats, theta, conv: Convention::Reduced, counters: DaCounters::default() })
    }

    pub fn with_convention(mut self, conv: Convention) -> Self {
        self.conv = conv;
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn update_theta(&mut self, rng: &mut dyn RngCore) -> Result<()> {
        let (a, b) = theta_coefficients(&self.model, &self.stats, self.conv);
        self.theta = theta_posterior(a, b, self.model.prior, self.model.support)?.sample(rng);
        self.counters.theta_updates += 1;
        Ok(())
    }

    /// Bridge IMH on every segment at the current θ; returns the number accepted.
    pub fn update_paths(&mut self, rng: &mut dyn RngCore) -> Result<usize> {
        let mut n_acc = 0;
        let drift = self.model.drift;
        for (seg, st) in self.segments.iter_mut().zip(self.stats.iter_mut()) {
            let mut prop = seg.clone();
            fill_bridge(&mut prop.values, (seg.start(), seg.end()), seg.dt, rng);
            let ps = PathStats::of(&prop, drift)?;
            if accept(ps.log_weight(self.theta, self.conv) - st.log_weight(self.theta, self.conv), rng) {
                seg.set_interior(&prop);
                *st = ps;
                n_acc += 1;
            }
        }
        self.counters.path_sweeps += 1;
        self.counters.proposals += self.segments.len() as u64;
        self.counters.accepted += n_acc as u64;
        Ok(n_acc)
    }

    /// One step of the random-scan kernel; returns the block updated (0 = θ, 1 = paths).
    pub fn step(&mut self, rng: &mut dyn RngCore) -> Result<usize> {
        if rng.random::<f64>() < 0.5 {
            self.update_theta(rng)?;
            Ok(0)
        } else {
            self.update_paths(rng)?;
            Ok(1)
        }
    }

    /// Runs `iters` steps and records θ after each step past `burnin`.
    pub fn run(&mut self, iters: usize, burnin: usize, rng: &mut dyn RngCore) -> Result<DaRun> {
        let mut trace = Vec::with_capacity(iters.saturating_sub(burnin));
        let mut kept = DaCounters::default();
        for it in 0..iters {
            if it == burnin {
                kept = self.counters;
            }
            self.step(rng)?;
            if it >= burnin {
                trace.push(self.theta);
            }
        }
        let c = self.counters;
        let window = DaCounters {
            theta_updates: c.theta_updates - kept.theta_updates,
            path_sweeps: c.path_sweeps - kept.path_sweeps,
            proposals: c.proposals - kept.proposals,
            accepted: c.accepted - kept.accepted,
        };
        Ok(DaRun { theta: trace, counters: window })
    }
}

#[derive(Debug, Clone)]
pub struct DaRun {
    pub theta: Vec<f64>,
    /// Counters over the recorded window only.
    pub counters: DaCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceRow {
    pub n: usize,
    pub delta: f64,
    pub acceptance: f64,
    pub theta_mean: f64,
}

#[derive(Debug, Clone)]
pub struct AcceptanceStudy {
    pub drift: Drift,
    pub theta_true: f64,
    pub horizon: f64,
    pub support: (f64, f64),
    pub r: usize,
    pub iters: usize,
    pub burnin: usize,
    pub seed: u64,
    pub convention: Convention,
}

impl AcceptanceStudy {
    /// Observes one simulated path at the coarsest common grid and subsamples it, so
    /// every N sees the same trajectory on [0, T]. Each N must divide max(ns).
    pub fn run(&self, ns: &[usize]) -> Result<Vec<AcceptanceRow>> {
        let n_max = *ns.iter().max().ok_or_else(|| Error::Config("empty list of N".into()))?;
        if let Some(n) = ns.iter().find(|&&n| n == 0 || n_max % n != 0) {
            return Err(Error::Config(format!("N = {n} does not divide the finest grid N = {n_max}")));
        }
        let fine = crate::models::diffusion::simulate_observations(self.drift, self.theta_true, 0.0, self.horizon, n_max, 50, self.seed)?;
        let mut rows = Vec::with_capacity(ns.len());
        for (gi, &n) in ns.iter().enumerate() {
            let stride = n_max / n;
            let obs: Vec<f64> = fine.iter().step_by(stride).copied().collect();
            let model = DiffusionModel::new(self.drift, self.horizon / n as f64, obs, self.support, ThetaPrior::Flat)?;
            let mut rng = crate::rng::stream(self.seed, &[0xDA, gi as u64]);
            let start = self.theta_true.clamp(self.support.0, self.support.1);
            let mut s = DaSampler::new(model, self.r, start, &mut rng)?.with_convention(self.convention);
            let run = s.run(self.iters, self.burnin, &mut rng)?;
            let theta_mean = run.theta.iter().sum::<f64>() / run.theta.len().max(1) as f64;
            rows.push(AcceptanceRow { n, delta: self.horizon / n as f64, acceptance: run.counters.acceptance(), theta_mean });
        }
        Ok(rows)
    }
}

//! Chain-output analysis: autocorrelation, IAT/ESS, replicate aggregation.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use std::io::Write;

/// Lags computed directly before switching to an FFT of the whole series.
const DIRECT_LAGS: usize = 24;

/// Recommended minimum number of post-burn-in draws.
pub const MIN_SAMPLES: usize = 1000;

/// Iterations × parameters, row-major.
#[derive(Debug, Clone)]
pub struct TraceMatrix {
    params: usize,
    data: Vec<f64>,
    pub burn_in: usize,
    pub sampler: String,
    pub seed: u64,
    pub spec_hash: u64,
    /// Likelihood evaluations summed over all recorded iterations.
    pub evals: u64,
}

impl TraceMatrix {
    pub fn new(params: usize, capacity: usize) -> Self {
        TraceMatrix {
            params,
            data: Vec::with_capacity(params * capacity),
            burn_in: 0,
            sampler: String::new(),
            seed: 0,
            spec_hash: 0,
            evals: 0,
        }
    }

    pub fn params(&self) -> usize {
        self.params
    }

    pub fn iterations(&self) -> usize {
        if self.params == 0 {
            0
        } else {
            self.data.len() / self.params
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.params {
            return Err(Error::Domain(format!("row has {} entries, trace has {} parameters", row.len(), self.params)));
        }
        crate::error::ensure_finite(row, "trace row")?;
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.params..(i + 1) * self.params]
    }

    /// Post-burn-in values of parameter `p`.
    pub fn column(&self, p: usize) -> Vec<f64> {
        (self.burn_in..self.iterations()).map(|i| self.data[i * self.params + p]).collect()
    }

    /// Average evaluations per iteration divided by the per-iteration unit (J for
    /// hierarchical models, N for diffusions, 1 otherwise).
    pub fn cost_multiplier(&self, unit: f64) -> f64 {
        let n = self.iterations();
        if n == 0 {
            return f64::NAN;
        }
        self.evals as f64 / (n as f64 * unit)
    }

    /// IAT of every parameter, and the maximum.
    pub fn iat_all(&self) -> Result<TraceIat> {
        if self.burn_in >= self.iterations() {
            return Err(Error::Domain(format!("burn-in {} not below iterations {}", self.burn_in, self.iterations())));
        }
        let mut per_param = Vec::with_capacity(self.params);
        for p in 0..self.params {
            per_param.push(iat(&self.column(p))?);
        }
        let (argmax, max) =
            per_param.iter().enumerate().map(|(i, e)| (i, e.iat)).fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        Ok(TraceIat { per_param, max, argmax })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IatEstimate {
    pub iat: f64,
    pub ess: f64,
    /// Largest autocorrelation lag included in the sum.
    pub lag: usize,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct TraceIat {
    pub per_param: Vec<IatEstimate>,
    pub max: f64,
    pub argmax: usize,
}

fn autocov_direct(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for t in 0..n - lag {
        s += (x[t] - mean) * (x[t + lag] - mean);
    }
    s / n as f64
}

/// Biased autocovariances γ_0..γ_{n-1} via zero-padded FFT.
fn autocov_fft(x: &[f64], mean: f64) -> Vec<f64> {
    let n = x.len();
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Integrated autocorrelation time by Geyer's initial positive sequence: pairs
/// γ_{2k} + γ_{2k+1} are summed while they stay positive.
pub fn iat(x: &[f64]) -> Result<IatEstimate> {
    let n = x.len();
    if n < 4 {
        return Err(Error::Precondition(format!("IAT needs at least 4 samples, got {n}")));
    }
    if n < MIN_SAMPLES {
        static SHORT: std::sync::Once = std::sync::Once::new();
        SHORT.call_once(|| log::warn!("IAT from only {n} samples; estimates below {MIN_SAMPLES} are unreliable"));
        log::debug!("IAT from only {n} samples; estimates below {MIN_SAMPLES} are unreliable");
    }
    crate::error::ensure_finite(x, "trace")?;
    let mean = x.iter().sum::<f64>() / n as f64;
    let g0 = autocov_direct(x, mean, 0);
    // relative to the scale of the values, a zero-variance trace is flagged
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if g0 <= (1e-14 * scale).powi(2) {
        return Err(Error::Numeric("constant trace: autocorrelation undefined (zero variance)".into()));
    }
    let mut fft: Option<Vec<f64>> = None;
    let mut gamma = |lag: usize| -> f64 {
        if lag < DIRECT_LAGS {
            autocov_direct(x, mean, lag)
        } else {
            fft.get_or_insert_with(|| autocov_fft(x, mean))[lag]
        }
    };
    let mut sum = -g0;
    let mut k = 0;
    let mut last_lag = 0;
    while 2 * k + 1 < n {
        let pair = gamma(2 * k) + gamma(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        sum += 2.0 * pair;
        last_lag = 2 * k + 1;
        k += 1;
    }
    let tau = sum / g0;
    Ok(IatEstimate { iat: tau, ess: n as f64 / tau, lag: last_lag, n })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

/// Median and quartiles over replicates of max-IAT × cost multiplier.
pub fn aggregate_median(iats: &[f64], costs: &[f64]) -> Result<MedianSummary> {
    if iats.is_empty() || iats.len() != costs.len() {
        return Err(Error::Domain(format!("{} IATs and {} cost multipliers", iats.len(), costs.len())));
    }
    let mut v: Vec<f64> = iats.iter().zip(costs).map(|(a, c)| a * c).collect();
    v.sort_by(f64::total_cmp);
    Ok(MedianSummary { median: quantile(&v, 0.5), q1: quantile(&v, 0.25), q3: quantile(&v, 0.75), count: v.len() })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IatRow {
    pub config_id: String,
    pub sampler: String,
    #[serde(rename = "J")]
    pub j: usize,
    pub l: usize,
    pub param: String,
    pub iat: f64,
    pub ess: f64,
    pub cost: f64,
    pub iat_x_cost: f64,
}

pub fn write_iat_rows<W: Write>(out: W, rows: &[IatRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

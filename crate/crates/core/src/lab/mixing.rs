//! Exact total-variation mixing times on small state spaces.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Largest space for which the warm-start supremum is computed (2^n sets B per time).
pub const MAX_MIX_STATES: usize = 16;
pub const MAX_MIX_TIME: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Worst case over N(π, M).
    Warm(f64),
    Explicit(Vec<f64>),
}

/// sup over μ ≤ Mπ, Σμ = 1 of Σ μ(x) f(x).
fn warm_sup(f: &[f64], cap: &[f64], order: &mut [usize]) -> f64 {
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    let mut left = 1.0;
    let mut v = 0.0;
    for &k in order.iter() {
        let take = cap[k].min(left);
        v += take * f[k];
        left -= take;
        if left <= 0.0 {
            break;
        }
    }
    v
}

/// sup over M-warm μ of ‖μQ − π‖_TV for a fixed matrix Q (= P^t):
/// max over B of sup_μ μQ(B) − π(B), walking the sets B in Gray-code order.
pub fn warm_tv(q: &DMatrix<f64>, pi: &[f64], m: f64) -> Result<f64> {
    let n = pi.len();
    if n > MAX_MIX_STATES {
        return Err(Error::Unsupported(format!("{n} states: worst-case warm-start TV is limited to {MAX_MIX_STATES}")));
    }
    if !(m >= 1.0) {
        return Err(Error::Domain(format!("warmness M must be at least 1, got {m}")));
    }
    let cap: Vec<f64> = pi.iter().map(|p| m * p).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut f = vec![0.0; n];
    let mut mass = 0.0;
    let mut mask = 0u64;
    let mut best: f64 = 0.0;
    for step in 1u64..1 << n {
        let k = step.trailing_zeros() as usize;
        let sign = if mask >> k & 1 == 0 { 1.0 } else { -1.0 };
        mask ^= 1 << k;
        mass += sign * pi[k];
        for (x, fx) in f.iter_mut().enumerate() {
            *fx += sign * q[(x, k)];
        }
        if step % 4096 == 0 {
            mass = (0..n).filter(|&y| mask >> y & 1 == 1).map(|y| pi[y]).sum();
            for (x, fx) in f.iter_mut().enumerate() {
                *fx = (0..n).filter(|&y| mask >> y & 1 == 1).map(|y| q[(x, y)]).sum();
            }
        }
        best = best.max(warm_sup(&f, &cap, &mut order) - mass);
    }
    Ok(best)
}

pub fn tv_to(mu: &[f64], pi: &[f64]) -> f64 {
    0.5 * mu.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn check_start(start: &Start, pi: &[f64]) -> Result<()> {
    match start {
        Start::Warm(m) if !(*m >= 1.0) => Err(Error::Domain(format!("warmness M must be at least 1, got {m}"))),
        Start::Explicit(mu) => {
            if mu.len() != pi.len() || mu.iter().any(|v| !(*v >= 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                Err(Error::Domain("starting distribution must be a probability vector on the state space".into()))
            } else {
                Ok(())
            }
        }
        _ => Ok(()),
    }
}

fn vec_step(mu: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    let n = mu.len();
    (0..n).map(|y| (0..n).map(|x| mu[x] * p[(x, y)]).sum()).collect()
}

/// Worst-case TV distance after t steps, for t = 0..=t_max.
pub fn tv_curve(p: &DMatrix<f64>, pi: &[f64], start: &Start, t_max: usize) -> Result<Vec<f64>> {
    check_start(start, pi)?;
    let n = pi.len();
    let mut out = Vec::with_capacity(t_max + 1);
    match start {
        Start::Warm(m) => {
            let mut q = DMatrix::identity(n, n);
            for t in 0..=t_max {
                if t > 0 {
                    q = &q * p;
                }
                out.push(warm_tv(&q, pi, *m)?);
            }
        }
        Start::Explicit(mu) => {
            let mut cur = mu.clone();
            for t in 0..=t_max {
                if t > 0 {
                    cur = vec_step(&cur, p);
                }
                out.push(tv_to(&cur, pi));
            }
        }
    }
    Ok(out)
}

fn power(p: &DMatrix<f64>, mut e: u64) -> DMatrix<f64> {
    let n = p.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut base = p.clone();
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

/// Smallest t with sup over the start class of ‖μP^t − π‖_TV < ε. The distance is
/// non-increasing in t (warm classes are P-invariant), so the warm case uses doubling
/// then bisection on matrix powers.
pub fn exact_tv_mixing_time(p: &DMatrix<f64>, pi: &[f64], eps: f64, start: &Start) -> Result<u64> {
    check_start(start, pi)?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    match start {
        Start::Explicit(mu) => {
            let mut cur = mu.clone();
            for t in 0..=MAX_MIX_TIME {
                let d = tv_to(&cur, pi);
                if d < eps {
                    return Ok(t);
                }
                cur = vec_step(&cur, p);
            }
            Err(Error::NonConvergence(format!("TV from the given start still {} >= {eps} after {MAX_MIX_TIME} steps", tv_to(&cur, pi))))
        }
        Start::Warm(m) => {
            let d = |t: u64| warm_tv(&power(p, t), pi, *m);
            if d(0)? < eps {
                return Ok(0);
            }
            let mut hi = 1u64;
            let mut dh = d(hi)?;
            while dh >= eps {
                if hi >= MAX_MIX_TIME {
                    return Err(Error::NonConvergence(format!("worst {m}-warm TV still {dh} >= {eps} after {MAX_MIX_TIME} steps")));
                }
                hi = (hi * 2).min(MAX_MIX_TIME);
                dh = d(hi)?;
            }
            let mut lo = hi / 2; // d(lo) >= eps (or lo = 0)
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if d(mid)? < eps {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

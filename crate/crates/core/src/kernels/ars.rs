//! Adaptive rejection sampling for one-dimensional log-concave densities
//! (tangent-line envelope, no squeeze).

use crate::error::{Error, Result};
use crate::models::Conditional;
use crate::special::logsumexp;
use rand::{Rng, RngCore};

const CONCAVITY_TOL: f64 = 1e-9;
const MAX_ABSCISSAE: usize = 64;

#[derive(Debug, Default, Clone)]
pub struct ArsWorkspace {
    xs: Vec<f64>,
    hs: Vec<f64>,
    dhs: Vec<f64>,
    z: Vec<f64>,
    log_mass: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ArsDraw {
    pub value: f64,
    pub evals: u64,
    pub rejections: u32,
}

fn eval<C: Conditional + ?Sized>(cond: &C, x: f64, evals: &mut u64) -> (f64, f64) {
    let mut g = [0.0];
    let h = cond.log_density_grad(&[x], &mut g);
    *evals += 1;
    (h, g[0])
}

impl ArsWorkspace {
    fn clear(&mut self) {
        self.xs.clear();
        self.hs.clear();
        self.dhs.clear();
    }

    fn insert(&mut self, x: f64, h: f64, dh: f64) -> Result<()> {
        let pos = self.xs.partition_point(|&v| v < x);
        if pos < self.xs.len() && self.xs[pos] == x {
            return Ok(());
        }
        // derivatives of a concave function are non-increasing
        if pos > 0 && dh > self.dhs[pos - 1] + CONCAVITY_TOL * (1.0 + dh.abs()) {
            return Err(Error::Integrity(format!(
                "derivative increases between x={} ({}) and x={x} ({dh})",
                self.xs[pos - 1],
                self.dhs[pos - 1]
            )));
        }
        if pos < self.xs.len() && dh < self.dhs[pos] - CONCAVITY_TOL * (1.0 + dh.abs()) {
            return Err(Error::Integrity(format!("derivative increases between x={x} ({dh}) and x={} ({})", self.xs[pos], self.dhs[pos])));
        }
        self.xs.insert(pos, x);
        self.hs.insert(pos, h);
        self.dhs.insert(pos, dh);
        Ok(())
    }

    /// Tangent intersections and log-masses of the envelope pieces.
    fn build(&mut self, lo: f64, hi: f64) -> Result<()> {
        let k = self.xs.len();
        self.z.clear();
        self.z.push(lo);
        for i in 0..k - 1 {
            let (x0, x1) = (self.xs[i], self.xs[i + 1]);
            let (h0, h1) = (self.hs[i], self.hs[i + 1]);
            let (d0, d1) = (self.dhs[i], self.dhs[i + 1]);
            let denom = d0 - d1;
            let zi = if denom.abs() <= 1e-14 * (d0.abs() + d1.abs()).max(1e-300) {
                0.5 * (x0 + x1)
            } else {
                ((h1 - h0) - x1 * d1 + x0 * d0) / denom
            };
            self.z.push(zi.clamp(x0, x1));
        }
        self.z.push(hi);
        self.log_mass.clear();
        for i in 0..k {
            let lm = piece_log_mass(self.xs[i], self.hs[i], self.dhs[i], self.z[i], self.z[i + 1]);
            if lm.is_nan() || lm == f64::INFINITY {
                return Err(Error::Integrity(format!(
                    "envelope piece {i} on [{}, {}] has infinite mass (slope {})",
                    self.z[i],
                    self.z[i + 1],
                    self.dhs[i]
                )));
            }
            self.log_mass.push(lm);
        }
        Ok(())
    }
}

/// log ∫_{zl}^{zr} exp(h + s(x − x0)) dx.
fn piece_log_mass(x0: f64, h: f64, s: f64, zl: f64, zr: f64) -> f64 {
    let w = zr - zl;
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if s == 0.0 || (w.is_finite() && (s * w).abs() < 1e-12) {
        return h + s * (0.5 * (zl + zr) - x0) + w.ln();
    }
    if s > 0.0 {
        if zr == f64::INFINITY {
            return f64::INFINITY;
        }
        // anchored at the right end: e^{s(zr−x0)} (1 − e^{−s w}) / s
        h + s * (zr - x0) + (-(-s * w).exp_m1()).ln() - s.ln()
    } else {
        if zl == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        h + s * (zl - x0) + (-(s * w).exp_m1()).ln() - (-s).ln()
    }
}

/// Inverse-CDF draw from the density ∝ e^{s x} on [zl, zr].
fn sample_piece(s: f64, zl: f64, zr: f64, u: f64) -> f64 {
    let w = zr - zl;
    if s == 0.0 || (w.is_finite() && (s * w).abs() < 1e-12) {
        return zl + u * w;
    }
    let a = s.abs();
    let tail = if w.is_finite() { -(-a * w).exp_m1() } else { 1.0 };
    let dist = -(-u * tail).ln_1p() / a;
    if s < 0.0 {
        zl + dist
    } else {
        zr - dist
    }
}

/// Initial abscissae: the mode and mode ± 2/√m when a strong-concavity constant is known,
/// otherwise a doubling search outward from `start` until the slopes bracket the mode.
fn initialise<C: Conditional + ?Sized>(cond: &C, start: f64, ws: &mut ArsWorkspace, evals: &mut u64) -> Result<()> {
    let (lo, hi) = cond.support();
    ws.clear();
    if let Some(curv) = cond.curvature() {
        let mut x = [start];
        if let Ok(res) = super::mode::find_mode(cond, &mut x, 1e-8, 100) {
            *evals += res.evals;
            let delta = 2.0 / curv.m.sqrt();
            for p in [x[0] - delta, x[0], x[0] + delta] {
                if p > lo && p < hi {
                    let (h, dh) = eval(cond, p, evals);
                    if h.is_finite() {
                        ws.insert(p, h, dh)?;
                    }
                }
            }
        }
    }
    let brackets = |ws: &ArsWorkspace| {
        !ws.xs.is_empty() && (lo > f64::NEG_INFINITY || ws.dhs[0] > 0.0) && (hi < f64::INFINITY || *ws.dhs.last().unwrap() < 0.0)
    };
    if brackets(ws) {
        return Ok(());
    }
    let mut x0 = start;
    if !(x0 > lo && x0 < hi) {
        x0 = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + 1.0,
            (false, true) => hi - 1.0,
            (false, false) => 0.0,
        };
    }
    let (h, dh) = eval(cond, x0, evals);
    if !h.is_finite() {
        return Err(Error::Domain(format!("log-density is {h} at the starting abscissa {x0}")));
    }
    ws.insert(x0, h, dh)?;
    let mut step = 1.0;
    for _ in 0..60 {
        if brackets(ws) {
            return Ok(());
        }
        let need_left = lo == f64::NEG_INFINITY && ws.dhs[0] <= 0.0;
        let p = if need_left {
            let p = ws.xs[0] - step;
            if p <= lo {
                0.5 * (lo + ws.xs[0])
            } else {
                p
            }
        } else {
            let last = *ws.xs.last().unwrap();
            let p = last + step;
            if p >= hi {
                0.5 * (hi + last)
            } else {
                p
            }
        };
        let (h, dh) = eval(cond, p, evals);
        if h.is_finite() {
            ws.insert(p, h, dh)?;
        }
        step *= 2.0;
    }
    Err(Error::Numeric("ARS doubling search failed to bracket the mode".into()))
}

/// One exact draw from a log-concave one-dimensional conditional.
pub fn ars_sample<C: Conditional + ?Sized>(cond: &C, start: f64, ws: &mut ArsWorkspace, rng: &mut dyn RngCore) -> Result<ArsDraw> {
    if cond.dim() != 1 {
        return Err(Error::Precondition(format!(
            "adaptive rejection sampling needs a one-dimensional conditional, got dimension {}",
            cond.dim()
        )));
    }
    let (lo, hi) = cond.support();
    let mut evals = 0u64;
    initialise(cond, start, ws, &mut evals)?;
    let mut rejections = 0u32;
    loop {
        ws.build(lo, hi)?;
        let total = logsumexp(&ws.log_mass);
        let mut u = rng.random::<f64>();
        let mut piece = ws.log_mass.len() - 1;
        for (i, lm) in ws.log_mass.iter().enumerate() {
            let p = (lm - total).exp();
            if u < p {
                piece = i;
                break;
            }
            u -= p;
        }
        let s = ws.dhs[piece];
        let x = sample_piece(s, ws.z[piece], ws.z[piece + 1], rng.random::<f64>());
        let upper = ws.hs[piece] + s * (x - ws.xs[piece]);
        let (h, dh) = eval(cond, x, &mut evals);
        if h > upper + CONCAVITY_TOL * (1.0 + upper.abs()) {
            return Err(Error::Integrity(format!("log-density {h} exceeds its tangent envelope {upper} at x={x}: not log-concave")));
        }
        let v: f64 = rng.random();
        if v.ln() <= h - upper {
            return Ok(ArsDraw { value: x, evals, rejections });
        }
        rejections += 1;
        if ws.xs.len() < MAX_ABSCISSAE && h.is_finite() {
            ws.insert(x, h, dh)?;
        }
        if rejections > 10_000 {
            return Err(Error::Numeric(format!("ARS rejected 10000 proposals; envelope has {} pieces", ws.xs.len())));
        }
    }
}

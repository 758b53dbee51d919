//! Exact checks of the conductance inequalities on small random instances.

use super::conductance::{
    conductance, conductance_profile, conductance_profile_of, for_each_subset, for_each_subset_multi, kappa_of, SConductance,
};
use super::discrepancy::kernel_discrepancy;
use super::kernel::DiscreteKernel;
use super::mixing::{exact_tv_mixing_time, tv_curve, tv_to, Start};
use super::product::verify_product_bound;
use super::rules::{gibbs, random_scan, DiscreteRule, RandomScanMatrix};
use super::target::DiscreteTarget;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

pub const VERIFY_TOL: f64 = 1e-10;
const KEEP_VIOLATIONS: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub instance: usize,
    pub detail: String,
    pub lhs: f64,
    pub rhs: f64,
}

/// Tally of one inequality (lhs ≥ rhs) over many instances.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub checks: u64,
    pub violation_count: u64,
    /// min of lhs − rhs over finite comparisons.
    pub worst_slack: f64,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            instances: 0,
            checks: 0,
            violation_count: 0,
            worst_slack: f64::INFINITY,
            violations: Vec::new(),
        }
    }

    /// Records lhs ≥ rhs − tol. An infinite lhs always passes.
    pub fn ge<F: FnOnce() -> String>(&mut self, instance: usize, lhs: f64, rhs: f64, tol: f64, detail: F) {
        self.checks += 1;
        if lhs == f64::INFINITY || rhs == f64::NEG_INFINITY {
            return;
        }
        let slack = lhs - rhs;
        if slack.is_finite() {
            self.worst_slack = self.worst_slack.min(slack);
        }
        if !(slack >= -tol) {
            self.violation_count += 1;
            if self.violations.len() < KEEP_VIOLATIONS {
                self.violations.push(Violation { instance, detail: detail(), lhs, rhs });
            }
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.instances += other.instances;
        self.checks += other.checks;
        self.violation_count += other.violation_count;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
        for v in other.violations {
            if self.violations.len() < KEEP_VIOLATIONS {
                self.violations.push(v);
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0 && self.checks > 0
    }
}

fn mass_of(mask: u64, pi: &[f64]) -> f64 {
    pi.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, p)| p).sum()
}

fn set_mask(set: &[bool]) -> u64 {
    set.iter().enumerate().filter(|(_, b)| **b).fold(0, |m, (k, _)| m | 1 << k)
}

/// κ_i(P_i, K): inf over slices meeting K of the conditional conductance of the slice
/// kernel read off the full block matrix. Zero-mass slices are skipped.
pub fn block_kappa(target: &DiscreteTarget, block: &DMatrix<f64>, i: usize, k_set: Option<&[bool]>) -> Result<f64> {
    let n = target.len();
    let mut best = f64::INFINITY;
    let mut skipped = 0;
    for idx in (0..n).filter(|&idx| target.coord(idx, i) == 0) {
        let slice = target.slice(idx, i);
        if let Some(k) = k_set {
            if !slice.iter().any(|&s| k[s]) {
                continue;
            }
        }
        let Some(pc) = target.conditional(idx, i) else {
            skipped += 1;
            continue;
        };
        let m = DMatrix::from_fn(slice.len(), slice.len(), |a, b| block[(slice[a], slice[b])]);
        best = best.min(kappa_of(&m, &pc)?);
    }
    if skipped > 0 {
        log::warn!("block {i}: {skipped} zero-mass conditional slices excluded from kappa");
    }
    Ok(best)
}

pub fn block_kappas(target: &DiscreteTarget, p: &RandomScanMatrix, k_set: Option<&[bool]>) -> Result<Vec<f64>> {
    (0..target.dims()).map(|i| block_kappa(target, &p.blocks[i], i, k_set)).collect()
}

/// P_i(∂A) ≥ κ_i(P_i,K)(G_i(∂A) − π(A∩K^c)) and G_i(∂A) ≥ P_i(∂A) for every A and i.
pub fn check_flux_bound(
    target: &DiscreteTarget,
    p: &RandomScanMatrix,
    g: &RandomScanMatrix,
    k_set: Option<&[bool]>,
    instance: usize,
    lower: &mut CheckReport,
    upper: &mut CheckReport,
) -> Result<()> {
    let d = target.dims();
    let kappa = block_kappas(target, p, k_set)?;
    let outside = !k_set.map_or(u64::MAX, set_mask);
    let pi = &target.pi;
    let mats: Vec<&DMatrix<f64>> = p.blocks.iter().chain(g.blocks.iter()).collect();
    for_each_subset_multi(&mats, pi, |mask, _, fl| {
        let off = mass_of(mask & outside, pi);
        for i in 0..d {
            let (pf, gf) = (fl[i], fl[d + i]);
            let rhs = if kappa[i].is_finite() { kappa[i] * (gf - off) } else { f64::NEG_INFINITY };
            lower.ge(instance, pf, rhs, VERIFY_TOL, || format!("block {i}, A = {mask:#b}, kappa {}", kappa[i]));
            upper.ge(instance, gf, pf, VERIFY_TOL, || format!("block {i}, A = {mask:#b}"));
        }
    })?;
    lower.instances += 1;
    upper.instances += 1;
    Ok(())
}

/// Corollary-level checks for one (P, G) pair sharing weights: the unrestricted and
/// K-restricted lower bounds, Φ_s(G) ≥ Φ_s(P), and the Φ̃ version.
pub fn check_corollary(
    target: &DiscreteTarget,
    p: &RandomScanMatrix,
    g: &RandomScanMatrix,
    grid: &[f64],
    k_set: Option<&[bool]>,
    instance: usize,
    rep: &mut CheckReport,
) -> Result<()> {
    if p.weights != g.weights {
        return Err(Error::Precondition("P and G must use the same selection weights".into()));
    }
    let kap_x = block_kappas(target, p, None)?;
    let kx = kap_x.iter().cloned().fold(f64::INFINITY, f64::min);
    let pp = conductance_profile(&p.kernel, grid)?;
    let gp = conductance_profile(&g.kernel, grid)?;
    let k_terms = match k_set {
        Some(k) => {
            let kap = block_kappas(target, p, Some(k))?;
            let kk = kap.iter().cloned().fold(f64::INFINITY, f64::min);
            let avg: f64 = kap.iter().zip(&p.weights).map(|(a, w)| a * w).sum();
            let out: f64 = target.pi.iter().zip(k).filter(|(_, b)| !**b).map(|(v, _)| v).sum();
            Some((kk, avg, out))
        }
        None => None,
    };
    for (a, b) in pp.iter().zip(&gp) {
        let s = a.s;
        if b.phi.is_infinite() {
            continue;
        }
        rep.ge(instance, a.phi, kx * b.phi, VERIFY_TOL, || format!("Phi_s(P) >= kappa Phi_s(G), s = {s}"));
        rep.ge(instance, b.phi, a.phi, VERIFY_TOL, || format!("Phi_s(G) >= Phi_s(P), s = {s}"));
        rep.ge(instance, a.phi_tilde, kx * b.phi_tilde, VERIFY_TOL, || format!("tilde Phi_s(P) >= kappa tilde Phi_s(G), s = {s}"));
        if let (Some((kk, avg, out)), true) = (k_terms, s > 0.0) {
            if kk.is_finite() {
                rep.ge(instance, a.phi, kk * b.phi - out / s * avg, VERIFY_TOL, || {
                    format!("K-restricted bound, s = {s}, kappa_K {kk}, pi(K^c) {out}")
                });
            }
        }
    }
    rep.instances += 1;
    Ok(())
}

/// Φ_s(cG + (1−c)I) − c·Φ_s(G) and κ − c, both maximised in absolute value.
pub fn tightness_gap(target: &DiscreteTarget, c: f64, grid: &[f64]) -> Result<(f64, f64)> {
    let d = target.dims();
    let g = gibbs(target, None)?;
    let p = random_scan(target, &vec![DiscreteRule::Mixture(c); d], None)?;
    let gp = conductance_profile(&g.kernel, grid)?;
    let pp = conductance_profile(&p.kernel, grid)?;
    let mut phi_err: f64 = 0.0;
    for (a, b) in pp.iter().zip(&gp) {
        if b.phi.is_finite() {
            phi_err = phi_err.max((a.phi - c * b.phi).abs());
        }
    }
    let kap_err = block_kappas(target, &p, None)?.iter().map(|k| (k - c).abs()).fold(0.0, f64::max);
    Ok((phi_err, kap_err))
}

/// Perturbation checks on a pair of targets at TV distance δ.
pub fn check_perturbation(
    t1: &DiscreteTarget,
    t2: &DiscreteTarget,
    rules: &[DiscreteRule],
    grid: &[f64],
    warm: &[f64],
    instance: usize,
    perturbed: &mut CheckReport,
    discrepancy: &mut CheckReport,
    perturbed_gibbs: &mut CheckReport,
) -> Result<()> {
    let delta = t1.tv(t2)?;
    let p1 = random_scan(t1, rules, None)?;
    let p2 = random_scan(t2, rules, None)?;
    let g1 = gibbs(t1, None)?;
    let g2 = gibbs(t2, None)?;
    let s_ok: Vec<f64> = grid.iter().cloned().filter(|&s| s >= delta && s > 0.0).collect();
    let shifted: Vec<f64> = s_ok.iter().map(|s| s - delta).collect();
    let pp1 = conductance_profile(&p1.kernel, &s_ok)?;
    let pp2 = conductance_profile(&p2.kernel, &shifted)?;
    let gp1 = conductance_profile(&g1.kernel, &s_ok)?;
    let gp2 = conductance_profile(&g2.kernel, &shifted)?;
    for k in 0..s_ok.len() {
        let s = s_ok[k];
        let dd = kernel_discrepancy(&p1.kernel.p, &p2.kernel.p, &t1.pi, 1.0 / s)?;
        perturbed
            .ge(instance, pp1[k].phi, pp2[k].phi - dd - 2.0 * delta / s, VERIFY_TOL, || format!("s = {s}, delta = {delta}, Delta = {dd}"));
        perturbed_gibbs.ge(instance, gp1[k].phi, gp2[k].phi - 4.0 * delta / s, VERIFY_TOL, || format!("s = {s}, delta = {delta}"));
    }
    for i in 0..t1.dims() {
        for &m in warm {
            let dd = kernel_discrepancy(&g1.blocks[i], &g2.blocks[i], &t1.pi, m)?;
            discrepancy.ge(instance, 2.0 * m * delta, dd, VERIFY_TOL, || format!("block {i}, M = {m}, delta = {delta}"));
        }
    }
    perturbed.instances += 1;
    discrepancy.instances += 1;
    perturbed_gibbs.instances += 1;
    Ok(())
}

/// Warm-start mixing bound, its pointwise TV form, the flux lower bound on TV and the
/// mixing-time lower bound on Φ_s, for one reversible kernel.
pub fn check_mixing(
    k: &DiscreteKernel,
    eps: &[f64],
    warm: &[f64],
    horizon: usize,
    instance: usize,
    mix_bound: &mut CheckReport,
    flux_lb: &mut CheckReport,
) -> Result<()> {
    if !k.reversible {
        return Err(Error::Precondition("mixing checks need a reversible kernel".into()));
    }
    if k.psd {
        for &e in eps {
            for &m in warm {
                let s = e / (2.0 * m);
                let phi = conductance_profile(k, &[s])?[0].phi;
                let rate = 1.0 - phi * phi / 2.0;
                let t = exact_tv_mixing_time(&k.p, &k.pi, e, &Start::Warm(m))? as f64;
                let bound = ((2.0 * m).ln() - e.ln()) / -rate.ln();
                mix_bound.ge(instance, bound, t, 1e-9, || format!("eps {e}, M {m}, Phi_s {phi}"));
                let curve = tv_curve(&k.p, &k.pi, &Start::Warm(m), horizon)?;
                for (t, v) in curve.iter().enumerate() {
                    mix_bound.ge(instance, m * s + m * rate.powi(t as i32), *v, VERIFY_TOL, || format!("TV bound at t = {t}, M {m}"));
                }
            }
        }
        mix_bound.instances += 1;
    }
    let n = k.len();
    let powers: Vec<DMatrix<f64>> = (1..=horizon as u32).map(|t| k.power(t)).collect();
    for_each_subset(&k.p, &k.pi, |mask, mass, flux| {
        if mass <= 0.0 || mass > 0.5 + 1e-12 {
            return;
        }
        let mu: Vec<f64> = (0..n).map(|x| if mask >> x & 1 == 1 { k.pi[x] / mass } else { 0.0 }).collect();
        for (t, q) in powers.iter().enumerate() {
            let t1 = (t + 1) as f64;
            let nu: Vec<f64> = (0..n).map(|y| (0..n).map(|x| mu[x] * q[(x, y)]).sum()).collect();
            flux_lb.ge(instance, tv_to(&nu, &k.pi), 0.5 - t1 * flux / mass, VERIFY_TOL, || format!("A = {mask:#b}, t = {t1}"));
        }
    })?;
    for &s in &[0.05, 0.1, 0.2] {
        for &e in &[0.1, 0.25] {
            let phi = conductance_profile(k, &[s])?[0].phi;
            let t = exact_tv_mixing_time(&k.p, &k.pi, e, &Start::Warm(1.0 / s))?;
            if t > 0 {
                flux_lb.ge(instance, phi, (0.5 - e) / t as f64, VERIFY_TOL, || format!("Phi_s vs mixing time, s {s}, eps {e}, t {t}"));
            }
        }
    }
    flux_lb.instances += 1;
    Ok(())
}

/// gap/2 ≤ Φ ≤ √(2·gap).
pub fn check_cheeger(k: &DiscreteKernel, instance: usize, rep: &mut CheckReport) -> Result<()> {
    let gap = k.spectral_gap()?;
    let phi = conductance(k)?;
    rep.ge(instance, phi, gap / 2.0, 1e-9, || format!("gap {gap}"));
    rep.ge(instance, (2.0 * gap).sqrt(), phi, 1e-9, || format!("gap {gap}"));
    rep.instances += 1;
    Ok(())
}

/// max over conditionals of π(x)/q(x).
pub fn density_ratio_bound(pc: &[f64], q: &[f64]) -> f64 {
    pc.iter().zip(q).map(|(p, q)| if *p > 0.0 { p / q } else { 0.0 }).fold(0.0, f64::max)
}

/// κ(IMH) ≥ 1/M for one conditional, plus Φ(P) ≥ Φ(G)/M for the whole scan when a
/// target is given.
pub fn check_imh(target: &DiscreteTarget, q: &[Vec<f64>], instance: usize, rep: &mut CheckReport) -> Result<()> {
    let d = target.dims();
    let rules: Vec<DiscreteRule> = q.iter().map(|v| DiscreteRule::Imh(v.clone())).collect();
    let p = random_scan(target, &rules, None)?;
    let g = gibbs(target, None)?;
    let mut m_all: f64 = 0.0;
    for i in 0..d {
        for idx in (0..target.len()).filter(|&idx| target.coord(idx, i) == 0) {
            let Some(pc) = target.conditional(idx, i) else { continue };
            let m = density_ratio_bound(&pc, &q[i]);
            m_all = m_all.max(m);
            let k = kappa_of(&DiscreteRule::Imh(q[i].clone()).conditional_matrix(&pc)?, &pc)?;
            rep.ge(instance, k, 1.0 / m, VERIFY_TOL, || format!("block {i}, slice {idx}, M = {m}"));
        }
    }
    let (pp, gp) = (conductance(&p.kernel)?, conductance(&g.kernel)?);
    rep.ge(instance, pp, gp / m_all, VERIFY_TOL, || format!("Phi(P) >= Phi(G)/M, M = {m_all}"));
    rep.instances += 1;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerRow {
    pub corner_mass: f64,
    pub tv_to_limit: f64,
    pub phi: f64,
    pub phi_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CornerReport {
    pub s: f64,
    pub rows: Vec<CornerRow>,
    pub limit_phi: f64,
    pub limit_phi_s: f64,
}

/// Discrete analogue of the truncated-normal example: on a k×k grid the targets put
/// mass ε on the corner (k−1, k−1) and the rest on an independent product over the
/// remaining (k−1)×(k−1) block. The corner is closed under Gibbs moves, so Φ(G_ε) = 0,
/// while the limit ε → 0 is an independent product.
pub fn corner_sequence(k: usize, corner: &[f64], s: f64) -> Result<CornerReport> {
    if k < 3 {
        return Err(Error::Domain("grid must be at least 3x3".into()));
    }
    let m = k - 1;
    // discretised standard normal marginal on m points
    let w: Vec<f64> = (0..m).map(|i| (-0.5 * (i as f64 - (m as f64 - 1.0) / 2.0).powi(2)).exp()).collect();
    let ws: f64 = w.iter().sum();
    let base = |eps: f64| -> Result<DiscreteTarget> {
        let mut pi = vec![0.0; k * k];
        for a in 0..m {
            for b in 0..m {
                pi[a * k + b] = (1.0 - eps) * w[a] * w[b] / (ws * ws);
            }
        }
        pi[k * k - 1] = eps;
        DiscreteTarget::new(vec![k, k], pi)
    };
    let limit = base(0.0)?;
    let lg = gibbs(&limit, None)?.kernel;
    let lp = conductance_profile(&lg, &[0.0, s])?;
    let mut rows = Vec::new();
    for &eps in corner {
        let t = base(eps)?;
        let g = gibbs(&t, None)?.kernel;
        let prof = conductance_profile(&g, &[0.0, s])?;
        rows.push(CornerRow { corner_mass: eps, tv_to_limit: t.tv(&limit)?, phi: prof[0].phi, phi_s: prof[1].phi });
    }
    Ok(CornerReport { s, rows, limit_phi: lp[0].phi, limit_phi_s: lp[1].phi })
}

/// Flux symmetry P(∂A) = P(∂A^c) on a reversible kernel; returns the worst gap.
pub fn flux_symmetry_residual(k: &DiscreteKernel) -> Result<f64> {
    let n = k.len();
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut fluxes = vec![0.0; 1 << n];
    for_each_subset(&k.p, &k.pi, |mask, _, f| fluxes[mask as usize] = f)?;
    let mut worst: f64 = 0.0;
    for mask in 1..full {
        worst = worst.max((fluxes[mask as usize] - fluxes[(full ^ mask) as usize]).abs());
    }
    Ok(worst)
}

// ---- random instances ----

fn dirichlet(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let t = DiscreteTarget::random_dirichlet(vec![n], 1.0, rng).expect("positive size");
    t.pi
}

/// Two-block target with each cardinality drawn from 2..=max_card and Dirichlet(1) mass.
pub fn random_two_block(rng: &mut dyn RngCore, max_card: usize) -> Result<DiscreteTarget> {
    let a = rng.random_range(2..=max_card);
    let b = rng.random_range(2..=max_card);
    DiscreteTarget::random_dirichlet(vec![a, b], 1.0, rng)
}

/// Per block: IMH with a random full-support proposal, uniform IMH, or lazy random walk.
pub fn random_mwg_rules(target: &DiscreteTarget, rng: &mut dyn RngCore) -> Vec<DiscreteRule> {
    target
        .card()
        .iter()
        .map(|&c| match rng.random_range(0..3) {
            0 => DiscreteRule::Imh(dirichlet(c, rng).iter().map(|v| v + 0.05).collect()),
            1 => DiscreteRule::ImhUniform,
            _ => DiscreteRule::Lazy(Box::new(DiscreteRule::Rwm)),
        })
        .collect()
}

/// Random K containing each state with probability 0.8 (never empty).
pub fn random_k(n: usize, rng: &mut dyn RngCore) -> Vec<bool> {
    let mut k: Vec<bool> = (0..n).map(|_| rng.random_bool(0.8)).collect();
    if !k.iter().any(|b| *b) {
        k[0] = true;
    }
    k
}

/// Perturbation of a target toward a random one, on a space small enough for Δ.
pub fn random_perturbed_pair(rng: &mut dyn RngCore) -> Result<(DiscreteTarget, DiscreteTarget)> {
    const SHAPES: [[usize; 2]; 5] = [[2, 2], [2, 3], [3, 3], [3, 4], [2, 6]];
    let card = SHAPES[rng.random_range(0..SHAPES.len())].to_vec();
    let t1 = DiscreteTarget::random_dirichlet(card.clone(), 1.0, rng)?;
    let other = DiscreteTarget::random_dirichlet(card, 1.0, rng)?;
    let lambda = rng.random_range(0.005..0.1);
    let t2 = t1.blend(&other, lambda)?;
    Ok((t1, t2))
}

/// Reversible PSD factor: random-scan Gibbs on a 2×2 target, or a two-state chain with
/// both switching probabilities summing to at most 1.
pub fn random_psd_factor(rng: &mut dyn RngCore, small: bool) -> Result<DiscreteKernel> {
    if small {
        let a: f64 = rng.random_range(0.01..0.99);
        let b: f64 = rng.random_range(0.01..(1.0 - a));
        DiscreteKernel::new(DMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]), vec![b / (a + b), a / (a + b)])
    } else {
        let t = DiscreteTarget::random_dirichlet(vec![2, 2], 1.0, rng)?;
        Ok(gibbs(&t, None)?.kernel)
    }
}

// ---- suite ----

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub flux_instances: usize,
    pub perturbation_instances: usize,
    pub mixing_instances: usize,
    pub product_instances: usize,
    pub imh_instances: usize,
    pub grid: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 20240501,
            flux_instances: 200,
            perturbation_instances: 200,
            mixing_instances: 100,
            product_instances: 100,
            imh_instances: 100,
            grid: vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.45],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckReport>,
    pub tightness_max_phi_error: f64,
    pub tightness_max_kappa_error: f64,
    pub corner: CornerReport,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_FLUX_LOWER: &str = "flux lower bound (per block)";
pub const CHECK_FLUX_UPPER: &str = "exact flux dominates (per block)";
pub const CHECK_COROLLARY: &str = "conductance corollary (uniform weights)";
pub const CHECK_WEIGHTED: &str = "conductance corollary (weights 0.9/0.1)";
pub const CHECK_PERTURBED: &str = "perturbed s-conductance";
pub const CHECK_DISCREPANCY: &str = "Gibbs block discrepancy <= 2 M delta";
pub const CHECK_PERTURBED_GIBBS: &str = "perturbed Gibbs s-conductance";
pub const CHECK_PRODUCT: &str = "product conductance";
pub const CHECK_MIXING: &str = "warm-start mixing bound";
pub const CHECK_FLUX_TV: &str = "flux lower bound on TV";
pub const CHECK_CHEEGER: &str = "Cheeger sandwich";
pub const CHECK_IMH: &str = "IMH conditional conductance >= 1/M";

fn par_instances<F>(count: usize, names: &[&str], f: F) -> Result<Vec<CheckReport>>
where
    F: Fn(usize, &mut [CheckReport]) -> Result<()> + Sync,
{
    let parts = (0..count)
        .into_par_iter()
        .map(|inst| {
            let mut reps: Vec<CheckReport> = names.iter().map(|n| CheckReport::new(n)).collect();
            f(inst, &mut reps)?;
            Ok(reps)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<CheckReport> = names.iter().map(|n| CheckReport::new(n)).collect();
    for part in parts {
        for (o, p) in out.iter_mut().zip(part) {
            o.merge(p);
        }
    }
    Ok(out)
}

/// Flux and corollary checks on random 2-block MwG instances.
pub fn run_flux_suite(seed: u64, instances: usize, grid: &[f64]) -> Result<Vec<CheckReport>> {
    par_instances(instances, &[CHECK_FLUX_LOWER, CHECK_FLUX_UPPER, CHECK_COROLLARY, CHECK_WEIGHTED], |inst, r| {
        let mut rng = crate::rng::stream(seed, &[1, inst as u64]);
        let t = random_two_block(&mut rng, 4)?;
        let rules = random_mwg_rules(&t, &mut rng);
        let k = random_k(t.len(), &mut rng);
        let p = random_scan(&t, &rules, None)?;
        let g = gibbs(&t, None)?;
        let (lo, rest) = r.split_at_mut(1);
        check_flux_bound(&t, &p, &g, None, inst, &mut lo[0], &mut rest[0])?;
        check_flux_bound(&t, &p, &g, Some(&k), inst, &mut lo[0], &mut rest[0])?;
        check_corollary(&t, &p, &g, grid, Some(&k), inst, &mut rest[1])?;
        let w = [0.9, 0.1];
        let pw = random_scan(&t, &rules, Some(&w))?;
        let gw = gibbs(&t, Some(&w))?;
        check_corollary(&t, &pw, &gw, grid, Some(&k), inst, &mut rest[2])?;
        Ok(())
    })
}

pub fn run_perturbation_suite(seed: u64, instances: usize, grid: &[f64]) -> Result<Vec<CheckReport>> {
    par_instances(instances, &[CHECK_PERTURBED, CHECK_DISCREPANCY, CHECK_PERTURBED_GIBBS], |inst, r| {
        let mut rng = crate::rng::stream(seed, &[2, inst as u64]);
        let (t1, t2) = random_perturbed_pair(&mut rng)?;
        let rules = random_mwg_rules(&t1, &mut rng);
        let (a, rest) = r.split_at_mut(1);
        let (b, c) = rest.split_at_mut(1);
        check_perturbation(&t1, &t2, &rules, grid, &[1.0, 2.0, 5.0, 20.0], inst, &mut a[0], &mut b[0], &mut c[0])
    })
}

pub fn run_mixing_suite(seed: u64, instances: usize) -> Result<Vec<CheckReport>> {
    par_instances(instances, &[CHECK_MIXING, CHECK_FLUX_TV, CHECK_CHEEGER], |inst, r| {
        let mut rng = crate::rng::stream(seed, &[3, inst as u64]);
        let t = random_two_block(&mut rng, 3)?;
        let rules = if inst % 3 == 0 { vec![DiscreteRule::Gibbs; 2] } else { random_mwg_rules(&t, &mut rng) };
        let k = random_scan(&t, &rules, None)?.kernel;
        let (a, rest) = r.split_at_mut(1);
        let (b, c) = rest.split_at_mut(1);
        check_mixing(&k, &[0.25, 0.1], &[2.0, 10.0], 4, inst, &mut a[0], &mut b[0])?;
        check_cheeger(&k, inst, &mut c[0])
    })
}

pub fn run_product_suite(seed: u64, instances: usize) -> Result<Vec<CheckReport>> {
    par_instances(instances, &[CHECK_PRODUCT], |inst, r| {
        let mut rng = crate::rng::stream(seed, &[4, inst as u64]);
        let factors = if inst % 2 == 0 {
            vec![random_psd_factor(&mut rng, false)?, random_psd_factor(&mut rng, false)?]
        } else {
            (0..3).map(|_| random_psd_factor(&mut rng, true)).collect::<Result<Vec<_>>>()?
        };
        let c = verify_product_bound(&factors, VERIFY_TOL)?;
        r[0].ge(inst, c.product_phi, c.bound, VERIFY_TOL, || format!("factor conductances {:?}", c.factor_phi));
        r[0].instances += 1;
        Ok(())
    })
}

pub fn run_imh_suite(seed: u64, instances: usize) -> Result<Vec<CheckReport>> {
    par_instances(instances, &[CHECK_IMH], |inst, r| {
        let mut rng = crate::rng::stream(seed, &[5, inst as u64]);
        let t = random_two_block(&mut rng, 4)?;
        let q: Vec<Vec<f64>> = t.card().iter().map(|&c| dirichlet(c, &mut rng).iter().map(|v| v + 0.02).collect::<Vec<_>>()).collect();
        let q: Vec<Vec<f64>> = q
            .into_iter()
            .map(|v| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        check_imh(&t, &q, inst, &mut r[0])
    })
}

/// Every randomized check plus the tightness family and the A.2-style sequence.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let mut checks = run_flux_suite(cfg.seed, cfg.flux_instances, &cfg.grid)?;
    checks.extend(run_perturbation_suite(cfg.seed, cfg.perturbation_instances, &cfg.grid)?);
    checks.extend(run_product_suite(cfg.seed, cfg.product_instances)?);
    checks.extend(run_mixing_suite(cfg.seed, cfg.mixing_instances)?);
    checks.extend(run_imh_suite(cfg.seed, cfg.imh_instances)?);
    let (mut pe, mut ke) = (0.0f64, 0.0f64);
    for inst in 0..20u64 {
        let mut rng = crate::rng::stream(cfg.seed, &[6, inst]);
        let t = random_two_block(&mut rng, 4)?;
        for c in [0.1, 0.25, 0.5, 0.9] {
            let (a, b) = tightness_gap(&t, c, &cfg.grid)?;
            pe = pe.max(a);
            ke = ke.max(b);
        }
    }
    let corner = corner_sequence(4, &[0.04, 0.02, 0.01, 0.003, 0.001, 1e-4], 0.05)?;
    Ok(SuiteReport { config: cfg.clone(), checks, tightness_max_phi_error: pe, tightness_max_kappa_error: ke, corner })
}

pub const CHECK_STATIONARY: &str = "target is stationary";
pub const CHECK_FLUX_SYMMETRY: &str = "flux symmetry (reversible)";

/// Assembles Σ w_i P_i from user-supplied block kernels. Block i may only move
/// coordinate i.
pub fn random_scan_from_blocks(target: &DiscreteTarget, blocks: Vec<DMatrix<f64>>, weights: Option<&[f64]>) -> Result<RandomScanMatrix> {
    let d = target.dims();
    if blocks.len() != d {
        return Err(Error::Domain(format!("{} block kernels for {d} coordinates", blocks.len())));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != d || w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("invalid selection weights {w:?}")));
            }
            w.to_vec()
        }
        None => vec![1.0 / d as f64; d],
    };
    let n = target.len();
    let mut p = DMatrix::zeros(n, n);
    for (i, b) in blocks.iter().enumerate() {
        // validates shape and row sums
        DiscreteKernel::new(b.clone(), target.pi.clone())?;
        for x in 0..n {
            for y in 0..n {
                if b[(x, y)] != 0.0 && target.with_coord(x, i, target.coord(y, i)) != y {
                    return Err(Error::Domain(format!("block {i} moves ({x} -> {y}) off coordinate {i}")));
                }
            }
        }
        p += b * w[i];
    }
    let kernel = DiscreteKernel::for_target(p, target)?;
    Ok(RandomScanMatrix { kernel, blocks, weights: w, rules: Vec::new() })
}

fn check_stationary(p: &DMatrix<f64>, pi: &[f64], instance: usize, rep: &mut CheckReport) {
    let n = pi.len();
    for y in 0..n {
        let flow: f64 = (0..n).map(|x| pi[x] * p[(x, y)]).sum();
        rep.ge(instance, -(flow - pi[y]).abs(), 0.0, VERIFY_TOL, || format!("(pi P)({y}) = {flow}, pi({y}) = {}", pi[y]));
    }
    rep.instances += 1;
}

/// Checks for one kernel against its target: stationarity, and when reversible the
/// flux symmetry and Cheeger sandwich.
pub fn verify_kernel(k: &DiscreteKernel) -> Result<Vec<CheckReport>> {
    let mut stat = CheckReport::new(CHECK_STATIONARY);
    check_stationary(&k.p, &k.pi, 0, &mut stat);
    let mut out = vec![stat];
    if k.reversible {
        let mut sym = CheckReport::new(CHECK_FLUX_SYMMETRY);
        let r = flux_symmetry_residual(k)?;
        sym.ge(0, -r, 0.0, 1e-12, || format!("max |P(dA) - P(dA^c)| = {r}"));
        sym.instances += 1;
        let mut ch = CheckReport::new(CHECK_CHEEGER);
        check_cheeger(k, 0, &mut ch)?;
        out.push(sym);
        out.push(ch);
    }
    Ok(out)
}

/// Block-level inequalities for a supplied random-scan kernel P against the Gibbs
/// kernel with the same weights, plus the kernel checks on P.
pub fn verify_blocks(target: &DiscreteTarget, p: &RandomScanMatrix, grid: &[f64]) -> Result<Vec<CheckReport>> {
    let g = gibbs(target, Some(&p.weights))?;
    let mut stat = CheckReport::new("block kernels leave the target stationary");
    for (i, b) in p.blocks.iter().enumerate() {
        check_stationary(b, &target.pi, i, &mut stat);
    }
    let (mut lo, mut up) = (CheckReport::new(CHECK_FLUX_LOWER), CheckReport::new(CHECK_FLUX_UPPER));
    check_flux_bound(target, p, &g, None, 0, &mut lo, &mut up)?;
    let mut cor = CheckReport::new(CHECK_COROLLARY);
    check_corollary(target, p, &g, grid, None, 0, &mut cor)?;
    let mut out = vec![stat, lo, up, cor];
    out.extend(verify_kernel(&p.kernel)?);
    Ok(out)
}

/// Summary of one kernel: s-conductance profile, spectral data and per-block κ.
#[derive(Debug, Clone, Serialize)]
pub struct ConductanceReport {
    pub states: usize,
    pub profile: Vec<SConductance>,
    pub reversible: bool,
    pub psd: bool,
    pub spectral_gap: Option<f64>,
    pub cheeger_holds: Option<bool>,
    pub block_kappa: Vec<f64>,
}

pub fn conductance_report(
    k: &DiscreteKernel,
    grid: &[f64],
    target: Option<&DiscreteTarget>,
    blocks: &[DMatrix<f64>],
) -> Result<ConductanceReport> {
    let profile = conductance_profile_of(&k.p, &k.pi, grid)?;
    let gap = k.spectral_gap().ok();
    let cheeger_holds = match gap {
        Some(g) => {
            let phi = conductance(k)?;
            Some(phi >= g / 2.0 - 1e-9 && phi <= (2.0 * g).sqrt() + 1e-9)
        }
        None => None,
    };
    let block_kappa = match target {
        Some(t) => blocks.iter().enumerate().map(|(i, b)| block_kappa(t, b, i, None)).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(ConductanceReport { states: k.len(), profile, reversible: k.reversible, psd: k.psd, spectral_gap: gap, cheeger_holds, block_kappa })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supplied_blocks_round_trip() {
        let mut rng = crate::rng::stream(7, &[]);
        let t = random_two_block(&mut rng, 3).unwrap();
        let rules = random_mwg_rules(&t, &mut rng);
        let p = random_scan(&t, &rules, None).unwrap();
        let q = random_scan_from_blocks(&t, p.blocks.clone(), None).unwrap();
        assert!((&q.kernel.p - &p.kernel.p).abs().max() < 1e-15);
        assert!(verify_blocks(&t, &q, &[0.0, 0.1]).unwrap().iter().all(|c| c.passed()));
        // a block that moves the other coordinate is rejected
        let swapped = vec![p.blocks[1].clone(), p.blocks[0].clone()];
        assert!(random_scan_from_blocks(&t, swapped, None).is_err());
    }

    #[test]
    fn non_stationary_kernel_is_flagged() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let k = DiscreteKernel::new(p, vec![0.9, 0.1]).unwrap();
        let r = verify_kernel(&k).unwrap();
        assert!(!r[0].passed());
    }

    #[test]
    fn p_equals_g_is_tight() {
        let mut rng = crate::rng::stream(1, &[]);
        let t = random_two_block(&mut rng, 3).unwrap();
        let g = gibbs(&t, None).unwrap();
        let (mut lo, mut up) = (CheckReport::new("lo"), CheckReport::new("up"));
        check_flux_bound(&t, &g, &g, None, 0, &mut lo, &mut up).unwrap();
        assert!(lo.passed() && up.passed());
        assert!(up.worst_slack.abs() < 1e-15);
        assert!(lo.worst_slack.abs() < 1e-12);
    }

    #[test]
    fn identity_conditionals_degenerate() {
        let mut rng = crate::rng::stream(2, &[]);
        let t = random_two_block(&mut rng, 3).unwrap();
        let p = random_scan(&t, &[DiscreteRule::Identity, DiscreteRule::Identity], None).unwrap();
        assert_eq!(block_kappas(&t, &p, None).unwrap(), vec![0.0, 0.0]);
        let g = gibbs(&t, None).unwrap();
        let mut r = CheckReport::new("c");
        check_corollary(&t, &p, &g, &[0.0, 0.1], None, 0, &mut r).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn lazy_tightness_quarter() {
        let mut rng = crate::rng::stream(3, &[]);
        let t = random_two_block(&mut rng, 4).unwrap();
        let (pe, ke) = tightness_gap(&t, 0.25, &[0.0, 0.1, 0.3]).unwrap();
        assert!(pe <= 1e-12 && ke <= 1e-12, "{pe} {ke}");
    }

    #[test]
    fn excluding_a_bad_slice_raises_kappa() {
        // x2 = 1 makes x1 nearly reducible under a lazy random walk
        let pi = vec![0.2, 1e-6, 0.2, 0.2, 1e-6, 0.2, 0.1, 0.1, 0.000_002];
        let s: f64 = pi.iter().sum();
        let t = DiscreteTarget::new(vec![3, 3], pi.into_iter().map(|v| v / s).collect()).unwrap();
        let p = random_scan(&t, &[DiscreteRule::Lazy(Box::new(DiscreteRule::Rwm)), DiscreteRule::Gibbs], None).unwrap();
        let all = block_kappa(&t, &p.blocks[0], 0, None).unwrap();
        let k: Vec<bool> = (0..9).map(|idx| t.coord(idx, 1) != 1).collect();
        let restricted = block_kappa(&t, &p.blocks[0], 0, Some(&k)).unwrap();
        assert!(restricted > all, "{restricted} vs {all}");
    }

    #[test]
    fn imh_ratio_bound_example() {
        let pc = [0.5, 0.3, 0.2];
        let q = [1.0 / 3.0; 3];
        let m = density_ratio_bound(&pc, &q);
        assert!((m - 1.5).abs() < 1e-15);
        let k = kappa_of(&DiscreteRule::ImhUniform.conditional_matrix(&pc).unwrap(), &pc).unwrap();
        assert!(k >= 1.0 / 1.5);
    }

    #[test]
    fn swap_chains_break_the_product_bound() {
        // periodic factors: each has Φ = 1, their product has an invariant set of mass ½
        let swap = DiscreteKernel::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), vec![0.5, 0.5]).unwrap();
        assert!(!swap.psd);
        let r = verify_product_bound(&[swap.clone(), swap], 1e-12).unwrap();
        assert_eq!(r.product_phi, 0.0);
        assert!(!r.holds);
    }

    #[test]
    fn corner_sequence_is_closed() {
        let r = corner_sequence(4, &[0.1, 0.04, 0.01, 0.001], 0.05).unwrap();
        for row in &r.rows {
            assert_eq!(row.phi, 0.0);
        }
        // a corner heavier than s is itself admissible
        assert_eq!(r.rows[0].phi_s, 0.0);
        for row in &r.rows[1..] {
            assert!(row.phi_s > 0.1, "{row:?}");
        }
        assert!(r.rows.windows(2).all(|w| w[1].tv_to_limit < w[0].tv_to_limit));
        assert!(r.limit_phi_s > 0.0);
    }

    #[test]
    fn reversible_flux_is_symmetric() {
        let mut rng = crate::rng::stream(4, &[]);
        for _ in 0..5 {
            let t = random_two_block(&mut rng, 3).unwrap();
            let rules = random_mwg_rules(&t, &mut rng);
            let k = random_scan(&t, &rules, None).unwrap().kernel;
            assert!(flux_symmetry_residual(&k).unwrap() < 1e-12);
        }
    }

    #[test]
    fn small_suite_passes() {
        let cfg = SuiteConfig {
            flux_instances: 5,
            perturbation_instances: 5,
            mixing_instances: 5,
            product_instances: 5,
            imh_instances: 5,
            ..SuiteConfig::default()
        };
        let r = run_suite(&cfg).unwrap();
        for c in &r.checks {
            assert!(c.checks > 0, "{}", c.name);
        }
        assert!(r.tightness_max_phi_error < 1e-12);
    }
}

//! Discrete twins of the conditional update rules and random-scan assembly.

use super::kernel::DiscreteKernel;
use super::target::DiscreteTarget;
use crate::error::{Error, Result};
use crate::kernels::{BlockUpdate, UpdateOutcome};
use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteRule {
    /// Exact draw from the conditional.
    Gibbs,
    /// Stay put.
    Identity,
    /// Independent MH with a fixed proposal vector (renormalised, full support).
    Imh(Vec<f64>),
    /// Independent MH with a uniform proposal.
    ImhUniform,
    /// Independent MH with a discretised Gaussian proposal centred at the conditional
    /// mode, the discrete analogue of IMH at the mode.
    ImhMode {
        width: f64,
    },
    /// Nearest-neighbour random walk: propose x ± 1 with probability ½ each, moves off
    /// the grid are rejected.
    Rwm,
    /// Locally balanced neighbour proposal: move to x ± 1 with probability
    /// ½ π(y)/(π(x)+π(y)).
    Barker,
    /// c·Gibbs + (1 − c)·I.
    Mixture(f64),
    Repeated(usize, Box<DiscreteRule>),
    Lazy(Box<DiscreteRule>),
}

fn mh_accept(pc: &[f64], q_fwd: f64, q_back: f64, x: usize, y: usize) -> f64 {
    let num = pc[y] * q_back;
    let den = pc[x] * q_fwd;
    if den <= 0.0 {
        if pc[y] > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (num / den).min(1.0)
    }
}

fn gaussian_proposal(pc: &[f64], width: f64) -> Vec<f64> {
    let mode = pc.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &p)| if p > a.1 { (i, p) } else { a }).0 as f64;
    let w: Vec<f64> = (0..pc.len()).map(|k| (-0.5 * ((k as f64 - mode) / width).powi(2)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

impl DiscreteRule {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            DiscreteRule::Imh(q) => {
                if q.len() != n || q.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Domain("IMH proposal must be positive on every state".into()));
                }
                Ok(())
            }
            DiscreteRule::ImhMode { width } if !(*width > 0.0) => Err(Error::Domain("proposal width must be positive".into())),
            DiscreteRule::Mixture(c) if !(0.0..=1.0).contains(c) => Err(Error::Domain(format!("mixture weight {c} outside [0, 1]"))),
            DiscreteRule::Repeated(k, inner) => {
                if *k == 0 {
                    return Err(Error::Domain("repeat count must be at least 1".into()));
                }
                inner.validate(n)
            }
            DiscreteRule::Lazy(inner) => inner.validate(n),
            _ => Ok(()),
        }
    }

    /// Transition matrix of the rule on one conditional π_c.
    pub fn conditional_matrix(&self, pc: &[f64]) -> Result<DMatrix<f64>> {
        let n = pc.len();
        self.validate(n)?;
        let mut m = DMatrix::zeros(n, n);
        match self {
            DiscreteRule::Gibbs => {
                for x in 0..n {
                    for y in 0..n {
                        m[(x, y)] = pc[y];
                    }
                }
                return Ok(m);
            }
            DiscreteRule::Identity => return Ok(DMatrix::identity(n, n)),
            DiscreteRule::Imh(_) | DiscreteRule::ImhUniform | DiscreteRule::ImhMode { .. } => {
                let q = match self {
                    DiscreteRule::Imh(q) => {
                        let s: f64 = q.iter().sum();
                        q.iter().map(|v| v / s).collect()
                    }
                    DiscreteRule::ImhUniform => vec![1.0 / n as f64; n],
                    DiscreteRule::ImhMode { width } => gaussian_proposal(pc, *width),
                    _ => unreachable!(),
                };
                for x in 0..n {
                    for y in (0..n).filter(|&y| y != x) {
                        m[(x, y)] = q[y] * mh_accept(pc, q[y], q[x], x, y);
                    }
                }
            }
            DiscreteRule::Rwm => {
                for x in 0..n {
                    for y in [x.wrapping_sub(1), x + 1] {
                        if y < n {
                            m[(x, y)] = 0.5 * mh_accept(pc, 0.5, 0.5, x, y);
                        }
                    }
                }
            }
            DiscreteRule::Barker => {
                for x in 0..n {
                    for y in [x.wrapping_sub(1), x + 1] {
                        if y < n && pc[x] + pc[y] > 0.0 {
                            m[(x, y)] = 0.5 * pc[y] / (pc[x] + pc[y]);
                        }
                    }
                }
            }
            DiscreteRule::Mixture(c) => {
                let g = DiscreteRule::Gibbs.conditional_matrix(pc)?;
                return Ok(g * *c + DMatrix::identity(n, n) * (1.0 - c));
            }
            DiscreteRule::Repeated(k, inner) => {
                let base = inner.conditional_matrix(pc)?;
                let mut out = DMatrix::identity(n, n);
                for _ in 0..*k {
                    out = &out * &base;
                }
                return Ok(out);
            }
            DiscreteRule::Lazy(inner) => {
                let base = inner.conditional_matrix(pc)?;
                return Ok((base + DMatrix::identity(n, n)) * 0.5);
            }
        }
        for x in 0..n {
            let off: f64 = (0..n).filter(|&y| y != x).map(|y| m[(x, y)]).sum();
            m[(x, x)] = (1.0 - off).max(0.0);
        }
        Ok(m)
    }

    /// Simulates one application of the rule through its proposal/accept mechanics.
    pub fn simulate(&self, pc: &[f64], x: usize, rng: &mut dyn RngCore) -> Result<usize> {
        let n = pc.len();
        let draw = |w: &[f64], rng: &mut dyn RngCore| -> usize {
            let s: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * s;
            for (k, &v) in w.iter().enumerate() {
                if u < v {
                    return k;
                }
                u -= v;
            }
            w.iter().rposition(|&v| v > 0.0).unwrap_or(0)
        };
        Ok(match self {
            DiscreteRule::Gibbs => draw(pc, rng),
            DiscreteRule::Identity => x,
            DiscreteRule::Imh(_) | DiscreteRule::ImhUniform | DiscreteRule::ImhMode { .. } => {
                self.validate(n)?;
                let q: Vec<f64> = match self {
                    DiscreteRule::Imh(q) => q.clone(),
                    DiscreteRule::ImhUniform => vec![1.0; n],
                    DiscreteRule::ImhMode { width } => gaussian_proposal(pc, *width),
                    _ => unreachable!(),
                };
                let y = draw(&q, rng);
                if rng.random::<f64>() < mh_accept(pc, q[y], q[x], x, y) {
                    y
                } else {
                    x
                }
            }
            DiscreteRule::Rwm | DiscreteRule::Barker => {
                let up = rng.random::<bool>();
                let y = if up { x + 1 } else { x.wrapping_sub(1) };
                if y >= n {
                    return Ok(x);
                }
                let a = if matches!(self, DiscreteRule::Rwm) {
                    mh_accept(pc, 0.5, 0.5, x, y)
                } else if pc[x] + pc[y] > 0.0 {
                    pc[y] / (pc[x] + pc[y])
                } else {
                    0.0
                };
                if rng.random::<f64>() < a {
                    y
                } else {
                    x
                }
            }
            DiscreteRule::Mixture(c) => {
                if rng.random::<f64>() < *c {
                    draw(pc, rng)
                } else {
                    x
                }
            }
            DiscreteRule::Repeated(k, inner) => {
                let mut cur = x;
                for _ in 0..*k {
                    cur = inner.simulate(pc, cur, rng)?;
                }
                cur
            }
            DiscreteRule::Lazy(inner) => {
                if rng.random::<bool>() {
                    inner.simulate(pc, x, rng)?
                } else {
                    x
                }
            }
        })
    }
}

/// Full-space matrix of the block kernel P_i; states whose slice has no mass stay put.
pub fn block_matrix(target: &DiscreteTarget, i: usize, rule: &DiscreteRule) -> Result<DMatrix<f64>> {
    let n = target.len();
    let mut p = DMatrix::zeros(n, n);
    let mut done = vec![false; n];
    for idx in 0..n {
        if done[idx] {
            continue;
        }
        let slice = target.slice(idx, i);
        match target.conditional(idx, i) {
            None => {
                for &s in &slice {
                    p[(s, s)] = 1.0;
                }
            }
            Some(pc) => {
                let m = rule.conditional_matrix(&pc)?;
                for (a, &sa) in slice.iter().enumerate() {
                    for (b, &sb) in slice.iter().enumerate() {
                        p[(sa, sb)] = m[(a, b)];
                    }
                }
            }
        }
        for &s in &slice {
            done[s] = true;
        }
    }
    Ok(p)
}

/// Assembled random-scan kernel together with its block kernels.
#[derive(Debug, Clone)]
pub struct RandomScanMatrix {
    pub kernel: DiscreteKernel,
    pub blocks: Vec<DMatrix<f64>>,
    pub weights: Vec<f64>,
    pub rules: Vec<DiscreteRule>,
}

pub fn random_scan(target: &DiscreteTarget, rules: &[DiscreteRule], weights: Option<&[f64]>) -> Result<RandomScanMatrix> {
    let d = target.dims();
    if rules.len() != d {
        return Err(Error::Domain(format!("{} rules for {d} coordinates", rules.len())));
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
    let blocks = (0..d).map(|i| block_matrix(target, i, &rules[i])).collect::<Result<Vec<_>>>()?;
    let n = target.len();
    let mut p = DMatrix::zeros(n, n);
    for (b, wi) in blocks.iter().zip(&w) {
        p += b * *wi;
    }
    let kernel = DiscreteKernel::for_target(p, target)?;
    Ok(RandomScanMatrix { kernel, blocks, weights: w, rules: rules.to_vec() })
}

/// Random-scan Gibbs kernel G (uniform weights unless given).
pub fn gibbs(target: &DiscreteTarget, weights: Option<&[f64]>) -> Result<RandomScanMatrix> {
    random_scan(target, &vec![DiscreteRule::Gibbs; target.dims()], weights)
}

/// Block update driving a discrete chain through the rule's own mechanics, so the
/// generic random-scan engine can be compared against the assembled matrix.
pub struct DiscreteBlock {
    pub target: Arc<DiscreteTarget>,
    pub coord: usize,
    pub rule: DiscreteRule,
}

impl BlockUpdate<usize> for DiscreteBlock {
    fn label(&self) -> String {
        format!("x{}", self.coord)
    }

    fn update(&self, state: &mut usize, rng: &mut dyn RngCore) -> Result<UpdateOutcome> {
        let Some(pc) = self.target.conditional(*state, self.coord) else {
            return Ok(UpdateOutcome { proposals: 1, accepted: 0, evals: 0 });
        };
        let x = self.target.coord(*state, self.coord);
        let y = self.rule.simulate(&pc, x, rng)?;
        *state = self.target.with_coord(*state, self.coord, y);
        Ok(UpdateOutcome { proposals: 1, accepted: (y != x) as u32, evals: 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PC: [f64; 5] = [0.1, 0.3, 0.05, 0.35, 0.2];

    fn all_rules() -> Vec<DiscreteRule> {
        vec![
            DiscreteRule::Gibbs,
            DiscreteRule::Identity,
            DiscreteRule::Imh(vec![0.5, 1.0, 2.0, 1.0, 0.5]),
            DiscreteRule::ImhUniform,
            DiscreteRule::ImhMode { width: 1.0 },
            DiscreteRule::Rwm,
            DiscreteRule::Barker,
            DiscreteRule::Mixture(0.3),
            DiscreteRule::Repeated(3, Box::new(DiscreteRule::Rwm)),
            DiscreteRule::Lazy(Box::new(DiscreteRule::Barker)),
        ]
    }

    #[test]
    fn every_rule_is_reversible_and_stochastic() {
        for r in all_rules() {
            let m = r.conditional_matrix(&PC).unwrap();
            let k = DiscreteKernel::new(m, PC.to_vec()).unwrap();
            assert!(k.reversibility_residual() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn lazy_and_imh_are_psd() {
        for r in [
            DiscreteRule::ImhUniform,
            DiscreteRule::Imh(vec![3.0, 1.0, 1.0, 1.0, 2.0]),
            DiscreteRule::Lazy(Box::new(DiscreteRule::Rwm)),
            DiscreteRule::Lazy(Box::new(DiscreteRule::Barker)),
        ] {
            let k = DiscreteKernel::new(r.conditional_matrix(&PC).unwrap(), PC.to_vec()).unwrap();
            assert!(k.psd, "{r:?}: {:?}", k.symmetrized_eigenvalues());
        }
    }

    #[test]
    fn repeated_is_matrix_power_and_lazy_identity_is_identity() {
        let base = DiscreteRule::Barker.conditional_matrix(&PC).unwrap();
        let rep = DiscreteRule::Repeated(4, Box::new(DiscreteRule::Barker)).conditional_matrix(&PC).unwrap();
        assert_eq!(rep, &base * &base * &base * &base);
        let lazy_id = DiscreteRule::Lazy(Box::new(DiscreteRule::Identity)).conditional_matrix(&PC).unwrap();
        assert_eq!(lazy_id, DMatrix::identity(5, 5));
    }

    #[test]
    fn simulation_frequencies_match_matrices() {
        let mut rng = crate::rng::stream(11, &[]);
        let n = 200_000;
        for r in all_rules() {
            let m = r.conditional_matrix(&PC).unwrap();
            for x in [0, 2, 4] {
                let mut counts = [0usize; 5];
                for _ in 0..n {
                    counts[r.simulate(&PC, x, &mut rng).unwrap()] += 1;
                }
                for y in 0..5 {
                    let p = m[(x, y)];
                    let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
                    assert!((counts[y] as f64 / n as f64 - p).abs() <= 4.0 * se + 1e-12, "{r:?} {x}->{y}");
                }
            }
        }
    }

    #[test]
    fn gibbs_on_two_by_two() {
        let t = DiscreteTarget::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let g = gibbs(&t, None).unwrap();
        assert!(g.kernel.reversible && g.kernel.psd);
        assert!(g.kernel.stationarity_residual() < 1e-15);
        let set = [true, true, false, false];
        assert!((g.kernel.flux(&set) - 0.08).abs() < 1e-15);
    }
}

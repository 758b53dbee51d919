//! Collapsing a two-block Gibbs sampler through a statistic of the first block.

use super::mixing::{exact_tv_mixing_time, Start};
use super::rules::gibbs;
use super::target::DiscreteTarget;
use crate::error::{Error, Result};
use serde::Serialize;

const PREMISE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct MixPair {
    pub eps: f64,
    pub m: f64,
    pub full: u64,
    pub collapsed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub image_size: usize,
    pub pairs: Vec<MixPair>,
    pub all_equal: bool,
}

/// Push-forward of a two-coordinate target under (x1, x2) ↦ (T(x1), x2).
pub fn collapsed_target(target: &DiscreteTarget, stat: &[usize]) -> Result<DiscreteTarget> {
    if target.dims() != 2 {
        return Err(Error::Domain(format!("expected a 2-block target, got {} blocks", target.dims())));
    }
    let (n1, n2) = (target.card()[0], target.card()[1]);
    if stat.len() != n1 {
        return Err(Error::Domain(format!("statistic has {} entries for {n1} values of x1", stat.len())));
    }
    let k = stat.iter().max().map_or(0, |m| m + 1);
    if (0..k).any(|t| !stat.contains(&t)) {
        return Err(Error::Domain("statistic image must be 0..k without gaps".into()));
    }
    let mut pi = vec![0.0; k * n2];
    for x1 in 0..n1 {
        for x2 in 0..n2 {
            pi[stat[x1] * n2 + x2] += target.pi[target.index(&[x1, x2])];
        }
    }
    DiscreteTarget::new(vec![k, n2], pi)
}

/// Checks π2(·|x1) = π2(·|x1') whenever T(x1) = T(x1'); returns a witness pair otherwise.
pub fn check_sufficiency(target: &DiscreteTarget, stat: &[usize]) -> Result<()> {
    let (n1, n2) = (target.card()[0], target.card()[1]);
    let cond = |x1: usize| target.conditional(target.index(&[x1, 0]), 1);
    for a in 0..n1 {
        for b in a + 1..n1 {
            if stat[a] != stat[b] {
                continue;
            }
            if let (Some(ca), Some(cb)) = (cond(a), cond(b)) {
                if let Some(x2) = (0..n2).find(|&x2| (ca[x2] - cb[x2]).abs() > PREMISE_TOL) {
                    return Err(Error::Precondition(format!(
                        "x1 = {a} and x1 = {b} share T = {} but pi(x2 = {x2} | x1) is {} vs {}",
                        stat[a], ca[x2], cb[x2]
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Builds Ĝ on the image space and compares exact warm-start mixing times of G and Ĝ.
pub fn collapse_by_statistic(target: &DiscreteTarget, stat: &[usize], eps: &[f64], warm: &[f64]) -> Result<CollapseReport> {
    let hat = collapsed_target(target, stat)?;
    check_sufficiency(target, stat)?;
    let g = gibbs(target, None)?.kernel;
    let gh = gibbs(&hat, None)?.kernel;
    let mut pairs = Vec::new();
    for &e in eps {
        for &m in warm {
            let full = exact_tv_mixing_time(&g.p, &g.pi, e, &Start::Warm(m))?;
            let collapsed = exact_tv_mixing_time(&gh.p, &gh.pi, e, &Start::Warm(m))?;
            pairs.push(MixPair { eps: e, m, full, collapsed });
        }
    }
    Ok(CollapseReport { image_size: hat.card()[0], all_equal: pairs.iter().all(|p| p.full == p.collapsed), pairs })
}

/// Target π(x1, x2) = a(x1 | T(x1)) b(T(x1), x2): the law of x1 inside a fibre of T
/// does not depend on x2, so the collapsed chain carries the full TV distance.
pub fn fibre_target(stat: &[usize], within: &[f64], joint: &[f64], n2: usize) -> Result<DiscreteTarget> {
    let n1 = stat.len();
    let k = stat.iter().max().map_or(0, |m| m + 1);
    if within.len() != n1 || joint.len() != k * n2 {
        return Err(Error::Domain("fibre weights do not match the statistic".into()));
    }
    let mut fibre_mass = vec![0.0; k];
    for x1 in 0..n1 {
        fibre_mass[stat[x1]] += within[x1];
    }
    let mut pi = vec![0.0; n1 * n2];
    for x1 in 0..n1 {
        for x2 in 0..n2 {
            pi[x1 * n2 + x2] = within[x1] / fibre_mass[stat[x1]] * joint[stat[x1] * n2 + x2];
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    DiscreteTarget::new(vec![n1, n2], pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: [f64; 2] = [0.25, 0.1];
    const WARM: [f64; 2] = [2.0, 10.0];

    #[test]
    fn injective_statistic() {
        let mut rng = crate::rng::stream(5, &[]);
        let t = DiscreteTarget::random_dirichlet(vec![3, 3], 1.0, &mut rng).unwrap();
        let r = collapse_by_statistic(&t, &[2, 0, 1], &EPS, &WARM).unwrap();
        assert!(r.all_equal, "{r:?}");
        assert_eq!(r.image_size, 3);
    }

    #[test]
    fn parity_statistic() {
        let parity = [0, 1, 0, 1];
        let t = fibre_target(&parity, &[0.1, 0.3, 0.4, 0.2], &[0.2, 0.1, 0.15, 0.05, 0.3, 0.2], 3).unwrap();
        check_sufficiency(&t, &parity).unwrap();
        let r = collapse_by_statistic(&t, &parity, &EPS, &WARM).unwrap();
        assert_eq!(r.pairs.len(), 4);
        assert!(r.all_equal, "{r:?}");
    }

    #[test]
    fn violated_premise_names_witness() {
        let t = DiscreteTarget::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let err = collapse_by_statistic(&t, &[0, 0], &EPS, &WARM).unwrap_err();
        match err {
            Error::Precondition(msg) => assert!(msg.contains("x1 = 0 and x1 = 1"), "{msg}"),
            e => panic!("unexpected {e}"),
        }
    }
}

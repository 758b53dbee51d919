//! Exact (s-)conductance by exhaustive subset enumeration.

use super::kernel::DiscreteKernel;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Largest state space enumerated (2^24 subsets).
pub const MAX_ENUM_STATES: usize = 24;
const RESYNC: u64 = 4096;

/// Best set for one value of s.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SConductance {
    pub s: f64,
    /// inf P(∂A)/π(A); +∞ when no admissible set exists.
    pub phi: f64,
    /// inf P(∂A)/(π(A) − s).
    pub phi_tilde: f64,
    /// Minimising set for `phi` as a bitmask over states (smallest mask on ties).
    pub argmin: Option<u64>,
}

/// Incremental flux tracker over a Gray-code walk of all subsets.
struct FluxWalker<'a> {
    f: Vec<f64>,
    n: usize,
    pi: &'a [f64],
    mask: u64,
    flux: f64,
    mass: f64,
    // members with positive mass, so all-null sets report exactly zero
    live: usize,
}

impl<'a> FluxWalker<'a> {
    fn new(p: &DMatrix<f64>, pi: &'a [f64]) -> Self {
        let n = pi.len();
        let mut f = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                f[x * n + y] = pi[x] * p[(x, y)];
            }
        }
        FluxWalker { f, n, pi, mask: 0, flux: 0.0, mass: 0.0, live: 0 }
    }

    fn toggle(&mut self, k: usize) {
        let n = self.n;
        let bit = 1u64 << k;
        let inside = self.mask & !bit;
        // flow from the rest of the set into k, and from k to the complement
        let mut from_set = 0.0;
        let mut to_comp = 0.0;
        for y in 0..n {
            if y == k {
                continue;
            }
            if inside >> y & 1 == 1 {
                from_set += self.f[y * n + k];
            } else {
                to_comp += self.f[k * n + y];
            }
        }
        if self.mask & bit == 0 {
            self.flux += to_comp - from_set;
            self.mass += self.pi[k];
            self.live += (self.pi[k] > 0.0) as usize;
            self.mask |= bit;
        } else {
            self.flux += from_set - to_comp;
            self.mass -= self.pi[k];
            self.live -= (self.pi[k] > 0.0) as usize;
            self.mask &= !bit;
        }
    }

    fn resync(&mut self) {
        let n = self.n;
        let mut flux = 0.0;
        let mut mass = 0.0;
        for x in 0..n {
            if self.mask >> x & 1 == 1 {
                mass += self.pi[x];
                for y in 0..n {
                    if self.mask >> y & 1 == 0 {
                        flux += self.f[x * n + y];
                    }
                }
            }
        }
        self.flux = flux;
        self.mass = mass;
    }
}

/// Visits every non-empty subset with its (mask, mass, flux).
pub fn for_each_subset<F: FnMut(u64, f64, f64)>(p: &DMatrix<f64>, pi: &[f64], mut visit: F) -> Result<()> {
    for_each_subset_multi(&[p], pi, |mask, mass, fl| visit(mask, mass, fl[0]))
}

/// As [`for_each_subset`], tracking the flux of several kernels sharing π at once.
pub fn for_each_subset_multi<F: FnMut(u64, f64, &[f64])>(mats: &[&DMatrix<f64>], pi: &[f64], mut visit: F) -> Result<()> {
    let n = pi.len();
    if n > MAX_ENUM_STATES {
        return Err(Error::Unsupported(format!("{n} states: exhaustive enumeration is limited to {MAX_ENUM_STATES}")));
    }
    let mut walkers: Vec<FluxWalker> = mats.iter().map(|p| FluxWalker::new(p, pi)).collect();
    let mut fluxes = vec![0.0; mats.len()];
    let total = 1u64 << n;
    for step in 1..total {
        let k = step.trailing_zeros() as usize;
        for (w, f) in walkers.iter_mut().zip(fluxes.iter_mut()) {
            w.toggle(k);
            if step % RESYNC == 0 {
                w.resync();
            }
            *f = w.flux.max(0.0);
        }
        let w = &walkers[0];
        visit(w.mask, if w.live == 0 { 0.0 } else { w.mass }, &fluxes);
    }
    Ok(())
}

/// Mass comparisons allow this much slack so sets at exactly ½ are admitted.
const MASS_EPS: f64 = 1e-12;

/// Φ_s and Φ̃_s for every s in `grid` in one enumeration.
pub fn conductance_profile(kernel: &DiscreteKernel, grid: &[f64]) -> Result<Vec<SConductance>> {
    conductance_profile_of(&kernel.p, &kernel.pi, grid)
}

pub fn conductance_profile_of(p: &DMatrix<f64>, pi: &[f64], grid: &[f64]) -> Result<Vec<SConductance>> {
    if let Some(s) = grid.iter().find(|s| !(**s >= 0.0 && **s < 0.5)) {
        return Err(Error::Domain(format!("s must lie in [0, 1/2), got {s}")));
    }
    let mut best: Vec<SConductance> =
        grid.iter().map(|&s| SConductance { s, phi: f64::INFINITY, phi_tilde: f64::INFINITY, argmin: None }).collect();
    for_each_subset(p, pi, |mask, mass, flux| {
        if mass > 0.5 + MASS_EPS || mass <= 0.0 {
            return;
        }
        for b in best.iter_mut() {
            if mass <= b.s + MASS_EPS * (b.s > 0.0) as u8 as f64 {
                continue;
            }
            let r = flux / mass;
            if r < b.phi || (r == b.phi && b.argmin.is_some_and(|m| mask < m)) {
                b.phi = r;
                b.argmin = Some(mask);
            }
            let rt = flux / (mass - b.s);
            if rt < b.phi_tilde {
                b.phi_tilde = rt;
            }
        }
    })?;
    for b in &best {
        if b.argmin.is_none() {
            log::debug!("no set with {} < pi(A) <= 1/2; s-conductance taken as +inf", b.s);
        }
    }
    Ok(best)
}

pub fn s_conductance(kernel: &DiscreteKernel, s: f64) -> Result<SConductance> {
    Ok(conductance_profile(kernel, &[s])?.remove(0))
}

/// Φ = Φ_0.
pub fn conductance(kernel: &DiscreteKernel) -> Result<f64> {
    Ok(s_conductance(kernel, 0.0)?.phi)
}

/// Conductance of a single-coordinate kernel in the normalisation used for the
/// conditional conductance: inf over 0 < π(B) ≤ ½ of flux(B) / (π(B) π(B^c)).
/// Exact Gibbs gives 1 and c·G + (1−c)·I gives c.
pub fn kappa_of(m: &DMatrix<f64>, pc: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for_each_subset(m, pc, |_, mass, flux| {
        if mass > 0.0 && mass <= 0.5 + MASS_EPS {
            best = best.min(flux / (mass * (1.0 - mass)));
        }
    })?;
    Ok(best)
}

/// Members of a bitmask as a boolean vector of length n.
pub fn mask_to_set(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|k| mask >> k & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::rules::{gibbs, DiscreteRule};
    use crate::lab::target::DiscreteTarget;

    fn two_state() -> DiscreteKernel {
        DiscreteKernel::new(DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7]), vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn identity_has_zero_conductance() {
        let k = DiscreteKernel::identity(vec![0.25; 4]).unwrap();
        for r in conductance_profile(&k, &[0.0, 0.1, 0.3]).unwrap() {
            assert_eq!(r.phi, 0.0);
        }
    }

    #[test]
    fn two_state_value() {
        let r = s_conductance(&two_state(), 0.0).unwrap();
        assert!((r.phi - 0.3).abs() < 1e-15);
        // {0} and {1} tie; the smaller mask wins
        assert_eq!(r.argmin, Some(0b01));
    }

    #[test]
    fn no_admissible_set_is_infinite() {
        let r = s_conductance(&two_state(), 0.49).unwrap();
        assert!(r.phi < f64::INFINITY);
        let k = DiscreteKernel::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.3, 0.7]), vec![0.375, 0.625]).unwrap();
        let r = s_conductance(&k, 0.4).unwrap();
        assert_eq!(r.phi, f64::INFINITY);
        assert!(r.argmin.is_none());
    }

    #[test]
    fn incremental_flux_matches_direct() {
        let mut rng = crate::rng::stream(3, &[]);
        let t = DiscreteTarget::random_dirichlet(vec![3, 4], 1.0, &mut rng).unwrap();
        let g = gibbs(&t, None).unwrap().kernel;
        let n = t.len();
        for_each_subset(&g.p, &g.pi, |mask, mass, flux| {
            let set = mask_to_set(mask, n);
            assert!((flux - g.flux(&set)).abs() < 1e-13);
            assert!((mass - t.mass(&set)).abs() < 1e-13);
        })
        .unwrap();
    }

    #[test]
    fn gibbs_two_by_two_enumeration() {
        let t = DiscreteTarget::new(vec![2, 2], vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let g = gibbs(&t, None).unwrap().kernel;
        let phi = conductance(&g).unwrap();
        // brute force over all 16 subsets
        let mut best = f64::INFINITY;
        for mask in 1u64..16 {
            let set = mask_to_set(mask, 4);
            let m = t.mass(&set);
            if m <= 0.5 + 1e-12 {
                best = best.min(g.flux(&set) / m);
            }
        }
        assert_eq!(phi, best);
        assert!(phi <= 0.16 + 1e-15);
    }

    #[test]
    fn kappa_of_gibbs_and_mixture() {
        let pc = [0.2, 0.5, 0.3];
        let g = DiscreteRule::Gibbs.conditional_matrix(&pc).unwrap();
        assert!((kappa_of(&g, &pc).unwrap() - 1.0).abs() < 1e-12);
        let m = DiscreteRule::Mixture(0.5).conditional_matrix(&pc).unwrap();
        assert!((kappa_of(&m, &pc).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn profile_is_monotone_and_variant_dominates() {
        let mut rng = crate::rng::stream(4, &[]);
        let t = DiscreteTarget::random_dirichlet(vec![3, 3], 1.0, &mut rng).unwrap();
        let g = gibbs(&t, None).unwrap().kernel;
        let grid = [0.0, 0.05, 0.1, 0.2, 0.3, 0.4];
        let prof = conductance_profile(&g, &grid).unwrap();
        assert_eq!(prof[0].phi, prof[0].phi_tilde);
        for w in prof.windows(2) {
            assert!(w[1].phi >= w[0].phi);
        }
        for r in &prof {
            assert!(r.phi <= r.phi_tilde);
        }
    }
}

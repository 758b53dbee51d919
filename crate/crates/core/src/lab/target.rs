use crate::error::{Error, Result};
use rand::RngCore;
use rand_distr::{Distribution, Gamma};

pub const MAX_STATES: usize = 4096;

/// Probability vector on a product of small finite coordinate spaces. Coordinate 0
/// varies slowest in the flat index.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTarget {
    card: Vec<usize>,
    strides: Vec<usize>,
    pub pi: Vec<f64>,
}

impl DiscreteTarget {
    pub fn new(card: Vec<usize>, pi: Vec<f64>) -> Result<Self> {
        if card.is_empty() || card.iter().any(|&c| c == 0) {
            return Err(Error::Domain(format!("cardinalities must be positive: {card:?}")));
        }
        let n = card.iter().try_fold(1usize, |a, &c| a.checked_mul(c)).unwrap_or(usize::MAX);
        if n > MAX_STATES {
            return Err(Error::Unsupported(format!("{n} states exceeds the {MAX_STATES}-state limit")));
        }
        if pi.len() != n {
            return Err(Error::Domain(format!("probability vector has {} entries, product space has {n}", pi.len())));
        }
        if let Some(p) = pi.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::Domain(format!("probabilities must be finite and non-negative, got {p}")));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("probabilities sum to {total}")));
        }
        let pi = pi.into_iter().map(|p| p / total).collect();
        let mut strides = vec![1; card.len()];
        for i in (0..card.len() - 1).rev() {
            strides[i] = strides[i + 1] * card[i + 1];
        }
        Ok(DiscreteTarget { card, strides, pi })
    }

    /// Single-coordinate target.
    pub fn flat(pi: Vec<f64>) -> Result<Self> {
        Self::new(vec![pi.len()], pi)
    }

    /// Dirichlet(a, …, a) draw on the product space.
    pub fn random_dirichlet(card: Vec<usize>, a: f64, rng: &mut dyn RngCore) -> Result<Self> {
        let n: usize = card.iter().product();
        let g = Gamma::new(a, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        let mut w: Vec<f64> = (0..n).map(|_| g.sample(rng).max(1e-300)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Self::new(card, w)
    }

    pub fn card(&self) -> &[usize] {
        &self.card
    }

    pub fn dims(&self) -> usize {
        self.card.len()
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn coord(&self, idx: usize, i: usize) -> usize {
        (idx / self.strides[i]) % self.card[i]
    }

    pub fn coords(&self, idx: usize) -> Vec<usize> {
        (0..self.dims()).map(|i| self.coord(idx, i)).collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// Flat index of `idx` with coordinate `i` replaced by `v`.
    pub fn with_coord(&self, idx: usize, i: usize, v: usize) -> usize {
        idx - self.coord(idx, i) * self.strides[i] + v * self.strides[i]
    }

    /// Indices of the states sharing x_{-i} with `idx`, ordered by coordinate i.
    pub fn slice(&self, idx: usize, i: usize) -> Vec<usize> {
        (0..self.card[i]).map(|v| self.with_coord(idx, i, v)).collect()
    }

    /// π_i(· | x_{-i}); `None` when the slice carries no mass.
    pub fn conditional(&self, idx: usize, i: usize) -> Option<Vec<f64>> {
        let s = self.slice(idx, i);
        let mass: f64 = s.iter().map(|&k| self.pi[k]).sum();
        if mass <= 0.0 {
            return None;
        }
        Some(s.iter().map(|&k| self.pi[k] / mass).collect())
    }

    pub fn mass(&self, set: &[bool]) -> f64 {
        set.iter().zip(&self.pi).filter(|(b, _)| **b).map(|(_, p)| p).sum()
    }

    pub fn tv(&self, other: &DiscreteTarget) -> Result<f64> {
        if self.card != other.card {
            return Err(Error::Domain("targets live on different spaces".into()));
        }
        Ok(0.5 * self.pi.iter().zip(&other.pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// Mixes with another target on the same space: (1−t)·self + t·other.
    pub fn blend(&self, other: &DiscreteTarget, t: f64) -> Result<Self> {
        if self.card != other.card {
            return Err(Error::Domain("targets live on different spaces".into()));
        }
        let pi = self.pi.iter().zip(&other.pi).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        Self::new(self.card.clone(), pi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_round_trip_and_slices() {
        let t = DiscreteTarget::new(vec![2, 3], vec![1.0 / 6.0; 6]).unwrap();
        for k in 0..6 {
            assert_eq!(t.index(&t.coords(k)), k);
        }
        // coordinate 0 slowest: (1, 2) is index 5
        assert_eq!(t.index(&[1, 2]), 5);
        assert_eq!(t.slice(5, 0), vec![2, 5]);
        assert_eq!(t.slice(5, 1), vec![3, 4, 5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteTarget::new(vec![2, 2], vec![0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(DiscreteTarget::new(vec![2, 2], vec![0.25; 3]).is_err());
        assert!(matches!(DiscreteTarget::new(vec![65, 64], vec![0.0; 4160]), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn conditionals_are_normalised(seed in 0u64..1000) {
            let mut rng = crate::rng::stream(seed, &[]);
            let t = DiscreteTarget::random_dirichlet(vec![3, 4], 1.0, &mut rng).unwrap();
            for k in 0..t.len() {
                for i in 0..2 {
                    let c = t.conditional(k, i).unwrap();
                    prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

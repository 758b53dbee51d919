use super::target::DiscreteTarget;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

pub const ROW_TOL: f64 = 1e-12;
pub const REV_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// Row-stochastic matrix with its reference distribution.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub p: DMatrix<f64>,
    pub pi: Vec<f64>,
    pub reversible: bool,
    pub psd: bool,
}

impl DiscreteKernel {
    pub fn new(p: DMatrix<f64>, pi: Vec<f64>) -> Result<Self> {
        let n = pi.len();
        if p.shape() != (n, n) {
            return Err(Error::Domain(format!("kernel is {:?}, target has {n} states", p.shape())));
        }
        for r in 0..n {
            let row = p.row(r);
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::Domain(format!("row {r} has invalid entry {v}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL * n.max(1) as f64 {
                return Err(Error::Domain(format!("row {r} sums to {s}")));
            }
        }
        let mut k = DiscreteKernel { p, pi, reversible: false, psd: false };
        k.reversible = k.reversibility_residual() < REV_TOL;
        k.psd = k.reversible && k.min_symmetrized_eigenvalue() >= -PSD_TOL;
        Ok(k)
    }

    pub fn identity(pi: Vec<f64>) -> Result<Self> {
        let n = pi.len();
        Self::new(DMatrix::identity(n, n), pi)
    }

    pub fn for_target(p: DMatrix<f64>, target: &DiscreteTarget) -> Result<Self> {
        Self::new(p, target.pi.clone())
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// max |π(x)P(x,y) − π(y)P(y,x)|.
    pub fn reversibility_residual(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in x + 1..n {
                worst = worst.max((self.pi[x] * self.p[(x, y)] - self.pi[y] * self.p[(y, x)]).abs());
            }
        }
        worst
    }

    /// max |πP − π|.
    pub fn stationarity_residual(&self) -> f64 {
        let n = self.len();
        (0..n).map(|y| ((0..n).map(|x| self.pi[x] * self.p[(x, y)]).sum::<f64>() - self.pi[y]).abs()).fold(0.0, f64::max)
    }

    /// Eigenvalues of D^{1/2} P D^{-1/2} restricted to the support of π, descending.
    /// Meaningful for reversible kernels only.
    pub fn symmetrized_eigenvalues(&self) -> Vec<f64> {
        let support: Vec<usize> = (0..self.len()).filter(|&x| self.pi[x] > 0.0).collect();
        let m = support.len();
        let mut s = DMatrix::zeros(m, m);
        for (a, &x) in support.iter().enumerate() {
            for (b, &y) in support.iter().enumerate() {
                s[(a, b)] = self.pi[x].sqrt() * self.p[(x, y)] / self.pi[y].sqrt();
            }
        }
        let sym = (&s + s.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    fn min_symmetrized_eigenvalue(&self) -> f64 {
        self.symmetrized_eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn check_reversible(&self) -> bool {
        self.reversible
    }

    pub fn check_psd(&self) -> bool {
        self.psd
    }

    /// 1 − λ₂ of the self-adjoint representation.
    pub fn spectral_gap(&self) -> Result<f64> {
        if !self.reversible {
            return Err(Error::Precondition("spectral gap is defined here for reversible kernels only".into()));
        }
        let ev = self.symmetrized_eigenvalues();
        Ok(if ev.len() < 2 { 1.0 } else { 1.0 - ev[1] })
    }

    /// cP + (1−c)I.
    pub fn mix_identity(&self, c: f64) -> Result<Self> {
        let n = self.len();
        Self::new(&self.p * c + DMatrix::identity(n, n) * (1.0 - c), self.pi.clone())
    }

    pub fn power(&self, t: u32) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::identity(n, n);
        let mut base = self.p.clone();
        let mut e = t;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        out
    }

    /// Flux P(∂A) = Σ_{x∈A} π(x) P(x, A^c).
    pub fn flux(&self, set: &[bool]) -> f64 {
        let n = self.len();
        let mut f = 0.0;
        for x in (0..n).filter(|&x| set[x]) {
            for y in (0..n).filter(|&y| !set[y]) {
                f += self.pi[x] * self.p[(x, y)];
            }
        }
        f
    }
}

/// Flux of a matrix with respect to an arbitrary weight vector (for block kernels P_i).
pub fn flux_of(p: &DMatrix<f64>, pi: &[f64], set: &[bool]) -> f64 {
    let n = pi.len();
    let mut f = 0.0;
    for x in (0..n).filter(|&x| set[x]) {
        for y in (0..n).filter(|&y| !set[y]) {
            f += pi[x] * p[(x, y)];
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> DiscreteKernel {
        DiscreteKernel::new(DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7]), vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn identity_is_reversible_psd_gapless() {
        let k = DiscreteKernel::identity(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(k.check_reversible() && k.check_psd());
        assert!(k.spectral_gap().unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_state_gap() {
        let k = two_state();
        assert!((k.spectral_gap().unwrap() - 0.6).abs() < 1e-12);
        let ev = k.symmetrized_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(DiscreteKernel::new(DMatrix::from_row_slice(2, 2, &[0.7, 0.4, 0.3, 0.7]), vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn non_reversible_cycle_is_flagged() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let k = DiscreteKernel::new(p, vec![1.0 / 3.0; 3]).unwrap();
        assert!(!k.reversible);
        assert!(k.stationarity_residual() < 1e-15);
        assert!(k.spectral_gap().is_err());
    }

    #[test]
    fn power_matches_repeated_products() {
        let k = two_state();
        let p5 = k.power(5);
        assert!((p5[(0, 0)] - (0.5 + 0.5 * 0.4f64.powi(5))).abs() < 1e-14);
    }
}

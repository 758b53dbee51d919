use crate::error::{Error, Result};
use crate::models::Conditional;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub iterations: usize,
    /// Log-density evaluations spent, counting gradient+Hessian passes as one each.
    pub evals: u64,
    pub log_density: f64,
}

/// Damped Newton ascent on the conditional log-density, in place.
///
/// Stops when the gradient norm drops below `tol` or the Newton step stalls at
/// machine precision.
pub fn find_mode<C: Conditional + ?Sized>(cond: &C, x: &mut [f64], tol: f64, max_iter: usize) -> Result<ModeResult> {
    let d = x.len();
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut trial = vec![0.0; d];
    let mut evals = 0u64;
    let mut lp = cond.log_density_grad(x, &mut grad);
    evals += 1;
    if !lp.is_finite() {
        return Err(Error::Numeric(format!("mode search started at a point with log-density {lp}: x = {x:?}")));
    }
    for it in 0..max_iter {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < tol {
            return Ok(ModeResult { iterations: it, evals, log_density: lp });
        }
        cond.neg_hessian(x, &mut hess);
        evals += 1;
        let step: Vec<f64> = if d == 1 {
            vec![grad[0] / hess[0]]
        } else {
            let h = DMatrix::from_row_slice(d, d, &hess);
            match h.clone().cholesky() {
                Some(ch) => ch.solve(&DVector::from_column_slice(&grad)).iter().cloned().collect(),
                None => return Err(Error::Numeric(format!("negative Hessian not positive definite at x = {x:?} (iteration {it})"))),
            }
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..d {
                trial[k] = x[k] + scale * step[k];
            }
            let lp_new = cond.log_density(&trial);
            evals += 1;
            if lp_new.is_finite() && lp_new >= lp - 1e-12 * lp.abs().max(1.0) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::Numeric(format!("Newton line search failed at x = {x:?}, gradient = {grad:?}")));
        }
        let stalled = (0..d).all(|k| (trial[k] - x[k]).abs() <= 4.0 * f64::EPSILON * x[k].abs().max(1.0));
        x.copy_from_slice(&trial);
        lp = cond.log_density_grad(x, &mut grad);
        evals += 1;
        if stalled {
            return Ok(ModeResult { iterations: it + 1, evals, log_density: lp });
        }
    }
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if gnorm < tol {
        return Ok(ModeResult { iterations: max_iter, evals, log_density: lp });
    }
    Err(Error::Numeric(format!("Newton did not converge in {max_iter} iterations: x = {x:?}, gradient = {grad:?}, log-density = {lp}")))
}

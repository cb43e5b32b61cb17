//! Separable levels: energies at which an eta eigenvalue and a xi eigenvalue
//! of the split operator add up to zero.

use nalgebra::DVector;

use super::oned::{Axis, OneDimProblem};
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;

#[derive(Clone, Debug)]
pub struct SeparableLevel {
    pub energy: f64,
    /// Eta quantum number (node count of the eta factor).
    pub k: usize,
    /// Xi quantum number.
    pub l: usize,
    pub eta_coeffs: DVector<f64>,
    pub xi_coeffs: DVector<f64>,
    /// `|lambda_eta + lambda_xi|` at the returned energy.
    pub residual: f64,
}

/// The pair of one-dimensional problems at a fixed hyper-radius.
#[derive(Clone, Debug)]
pub struct SeparablePair {
    pub eta: OneDimProblem,
    pub xi: OneDimProblem,
}

impl SeparablePair {
    pub fn new(sys: &SystemDefinition, rho: f64, n_eta: usize, n_xi: usize) -> Self {
        SeparablePair {
            eta: OneDimProblem::new(sys, Axis::Eta, rho, n_eta),
            xi: OneDimProblem::new(sys, Axis::Xi, rho, n_xi),
        }
    }

    /// Number of pairs (k, l) with `lambda_eta_k(eps) + lambda_xi_l(eps) < 0`;
    /// this is the number of separable levels below `eps`.
    pub fn count_below(&self, eps: f64) -> usize {
        let ev = self.eta.eigenvalues(eps);
        let xv = self.xi.eigenvalues(eps);
        let mut total = 0;
        for a in ev.iter() {
            total += xv.iter().take_while(|b| a + *b < 0.0).count();
        }
        total
    }

    /// Bracket [lo, hi] with `count_below(lo) < target <= count_below(hi)`.
    pub fn bracket(&self, target: usize, guess: f64) -> Result<(f64, f64)> {
        let scale = self.eta.kinetic.max(1.0);
        let mut lo = guess;
        let mut step = scale;
        let mut tries = 0;
        while self.count_below(lo) >= target {
            lo -= step;
            step *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numerical(format!(
                    "no lower bracket for level {target} (scanned down to {lo:.6e})"
                )));
            }
        }
        let mut hi = lo.max(guess);
        step = scale;
        tries = 0;
        while self.count_below(hi) < target {
            lo = hi;
            hi += step;
            step *= 2.0;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numerical(format!(
                    "no upper bracket for level {target} (scanned up to {hi:.6e})"
                )));
            }
        }
        Ok((lo, hi))
    }

    /// Energy of the `target`-th separable level (1-based) by bisection on
    /// the counting function, to relative tolerance `tol`.
    pub fn level_energy(&self, target: usize, guess: f64, tol: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.bracket(target, guess)?;
        for _ in 0..200 {
            if hi - lo <= tol * hi.abs().max(lo.abs()).max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `lambda_eta_k(eps) + lambda_xi_l(eps)` and its eps-derivative.
    fn root_function(&self, k: usize, l: usize, eps: f64) -> (f64, f64, DVector<f64>, DVector<f64>) {
        let (ev, evec) = self.eta.solve(eps);
        let (xv, xvec) = self.xi.solve(eps);
        let a = evec.column(k).into_owned();
        let b = xvec.column(l).into_owned();
        let slope = -(a.dot(&(&self.eta.weight * &a)) + b.dot(&(&self.xi.weight * &b)));
        (ev[k] + xv[l], slope, a, b)
    }

    /// Root of `lambda_eta_k + lambda_xi_l` inside [lo, hi] (function positive at
    /// lo, negative at hi) by Newton's method with bisection safeguard.
    pub fn solve_level(&self, k: usize, l: usize, mut lo: f64, mut hi: f64, tol: f64) -> Result<SeparableLevel> {
        let (flo, _, _, _) = self.root_function(k, l, lo);
        let (fhi, _, _, _) = self.root_function(k, l, hi);
        if !(flo > 0.0 && fhi < 0.0) {
            return Err(Error::Numerical(format!(
                "level ({k}, {l}) not bracketed in [{lo:.6e}, {hi:.6e}] (f = {flo:.3e}, {fhi:.3e})"
            )));
        }
        let mut eps = hi;
        for _ in 0..200 {
            let (f, slope, a, b) = self.root_function(k, l, eps);
            if !(slope < 0.0) {
                return Err(Error::Numerical(format!(
                    "root function of level ({k}, {l}) not decreasing at {eps:.6e}"
                )));
            }
            if f.abs() < tol {
                return Ok(SeparableLevel { energy: eps, k, l, eta_coeffs: a, xi_coeffs: b, residual: f.abs() });
            }
            if f > 0.0 {
                lo = eps;
            } else {
                hi = eps;
            }
            let mut next = eps - f / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if hi - lo < 1e-15 * eps.abs().max(1.0) {
                return Ok(SeparableLevel { energy: eps, k, l, eta_coeffs: a, xi_coeffs: b, residual: f.abs() });
            }
            eps = next;
        }
        Err(Error::Numerical(format!("level ({k}, {l}) did not converge")))
    }
}

/// The `count` lowest separable levels at hyper-radius `rho`, ascending.
pub fn find_separable_levels(
    sys: &SystemDefinition,
    rho: f64,
    count: usize,
    n_eta: usize,
    n_xi: usize,
    tol: f64,
) -> Result<Vec<SeparableLevel>> {
    if count == 0 {
        return Err(Error::Domain("need at least one level".into()));
    }
    let pair = SeparablePair::new(sys, rho, n_eta, n_xi);
    let guess = -0.5 * sys.charges.oxygen.powi(2) * sys.reduced.mu_o;
    let top = pair.level_energy(count, guess, 1e-12)?;
    let (lo_all, _) = pair.bracket(1, guess)?;
    // every pair with a negative root function just above `top` is a level below it
    let hi = top + 1e-9 * top.abs().max(1.0);
    let ev = pair.eta.eigenvalues(hi);
    let xv = pair.xi.eigenvalues(hi);
    let mut candidates = Vec::new();
    for (k, a) in ev.iter().enumerate() {
        for (l, b) in xv.iter().enumerate() {
            if a + b < 0.0 {
                candidates.push((k, l));
            } else {
                break;
            }
        }
    }
    let mut levels = Vec::with_capacity(candidates.len());
    for (k, l) in candidates {
        levels.push(pair.solve_level(k, l, lo_all, hi, tol)?);
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    levels.truncate(count);
    Ok(levels)
}

//! Regular and irregular Coulomb wave functions F_L(eta, x), G_L(eta, x).
//!
//! Above the turning point the Steed pair of continued fractions is used:
//! CF1 for F'/F, evaluated through a downward recurrence in L that also fixes
//! the sign of F, and CF2 for (G' + iF')/(G + iF). Under the barrier G and G'
//! are carried inward from a point where CF2 converges, and F follows from
//! CF1 and the Wronskian.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoulombWave {
    pub f: f64,
    pub g: f64,
    pub fp: f64,
    pub gp: f64,
}

const TINY: f64 = 1e-300;
const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 200_000;

fn turning_point(eta: f64, l: f64) -> f64 {
    eta + (eta * eta + l * (l + 1.0)).sqrt()
}

/// F'_L/F_L by the L-recurrence continued fraction, started at a large order
/// where it converges quickly and recurred down to `l`. Returns (f, sign F).
fn cf1(eta: f64, l: u32, x: f64) -> Result<(f64, f64)> {
    let top_min = (x * x - 2.0 * eta * x).max(0.0).sqrt();
    let l_top = (l as f64).max(top_min.ceil() + 20.0) as u32;
    let s = |k: f64| k / x + eta / k;
    let r2 = |k: f64| 1.0 + eta * eta / (k * k);
    // modified Lentz for f_top = S_{L+1} - R^2_{L+1} / (T_{L+1} - R^2_{L+2} / ...)
    let lt = l_top as f64;
    let mut f = s(lt + 1.0);
    if f == 0.0 {
        f = TINY;
    }
    let (mut c, mut d) = (f, 0.0);
    let mut converged = false;
    for j in 1..MAX_TERMS {
        let k = lt + j as f64;
        let a = -r2(k);
        let b = s(k) + s(k + 1.0);
        d = b + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Coulomb CF1 did not converge (eta = {eta}, l = {l}, x = {x})"
        )));
    }
    // downward recurrence with F_top > 0
    let (mut fl, mut fpl) = (1e-200, f * 1e-200);
    let mut k = l_top;
    while k > l {
        let kf = k as f64;
        let rk = r2(kf).sqrt();
        let sk = s(kf);
        let f_lower = (sk * fl + fpl) / rk;
        let fp_lower = sk * f_lower - rk * fl;
        fl = f_lower;
        fpl = fp_lower;
        let m = fl.abs().max(fpl.abs());
        if m > 1e200 {
            fl /= m;
            fpl /= m;
        }
        k -= 1;
    }
    if fl == 0.0 {
        return Err(Error::Numerical(format!(
            "Coulomb CF1 recurrence lost the regular solution (eta = {eta}, l = {l}, x = {x})"
        )));
    }
    Ok((fpl / fl, fl.signum()))
}

/// (G' + iF')/(G + iF) by Steed's second continued fraction.
fn cf2(eta: f64, l: u32, x: f64) -> Option<Complex64> {
    let lf = l as f64;
    let a = Complex64::new(1.0 + lf, eta);
    let b = Complex64::new(-lf, eta);
    // complex division squares the modulus, so 1e-300 would underflow
    let tiny = Complex64::new(1e-30, 0.0);
    // t = a1 / (b1 + a2 / (b2 + ...)), modified Lentz with b0 = 0
    let mut t = tiny;
    let (mut c, mut d) = (t, Complex64::new(0.0, 0.0));
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let ak = (a + kf - 1.0) * (b + kf - 1.0);
        let bk = Complex64::new(2.0 * (x - eta), 2.0 * kf);
        d = bk + ak * d;
        if d.norm() < 1e-30 {
            d = tiny;
        }
        c = bk + ak / c;
        if c.norm() < 1e-30 {
            c = tiny;
        }
        d = d.inv();
        let del = c * d;
        t *= del;
        if (del - 1.0).norm() < EPS {
            let i = Complex64::new(0.0, 1.0);
            return Some(i * (1.0 - eta / x) + i / x * t);
        }
    }
    None
}

fn steed(eta: f64, l: u32, x: f64) -> Result<Option<CoulombWave>> {
    let pq = match cf2(eta, l, x) {
        Some(v) => v,
        None => return Ok(None),
    };
    let (f, sign) = cf1(eta, l, x)?;
    let (p, q) = (pq.re, pq.im);
    if !(q > 0.0) {
        return Ok(None);
    }
    let gamma = (f - p) / q;
    let fv = sign / (q * (1.0 + gamma * gamma)).sqrt();
    let g = gamma * fv;
    Ok(Some(CoulombWave { f: fv, g, fp: f * fv, gp: p * g - q * fv }))
}

fn rhs(eta: f64, ll: f64, x: f64) -> f64 {
    2.0 * eta / x + ll / (x * x) - 1.0
}

/// Coulomb functions and their x-derivatives. Positive `eta` is repulsive.
pub fn coulomb_continuum(eta: f64, l: u32, x: f64) -> Result<CoulombWave> {
    if !(x > 0.0) || !x.is_finite() || !eta.is_finite() {
        return Err(Error::Domain(format!("Coulomb functions need x > 0 (got x = {x}, eta = {eta})")));
    }
    let lf = l as f64;
    let tp = turning_point(eta, lf);
    if x > 1.05 * tp + 2.0 {
        if let Some(w) = steed(eta, l, x)? {
            return Ok(w);
        }
    }
    // carry G inward from a point safely past the turning point
    let xs = (1.2 * tp + 10.0).max(x + 1.0);
    let start = steed(eta, l, xs)?.ok_or_else(|| {
        Error::Numerical(format!("Coulomb CF2 failed at x = {xs} (eta = {eta}, l = {l})"))
    })?;
    let (g, gp) = carry_inward(eta, lf * (lf + 1.0), start.g, start.gp, xs, x);
    from_irregular(eta, l, x, g, gp)
}

/// RK4 transport of the irregular solution from `from` down to `to`.
fn carry_inward(eta: f64, ll: f64, mut y: f64, mut yp: f64, from: f64, to: f64) -> (f64, f64) {
    let span = from - to;
    if span <= 0.0 {
        return (y, yp);
    }
    let steps = ((span / 2e-3).ceil() as usize).max(16);
    let h = -span / steps as f64;
    let mut t = from;
    for _ in 0..steps {
        let k1y = yp;
        let k1p = rhs(eta, ll, t) * y;
        let k2y = yp + 0.5 * h * k1p;
        let k2p = rhs(eta, ll, t + 0.5 * h) * (y + 0.5 * h * k1y);
        let k3y = yp + 0.5 * h * k2p;
        let k3p = rhs(eta, ll, t + 0.5 * h) * (y + 0.5 * h * k2y);
        let k4y = yp + h * k3p;
        let k4p = rhs(eta, ll, t + h) * (y + h * k3y);
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        yp += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        t += h;
    }
    (y, yp)
}

/// Regular solution from CF1 and the Wronskian `F'G - FG' = 1`.
fn from_irregular(eta: f64, l: u32, x: f64, g: f64, gp: f64) -> Result<CoulombWave> {
    let (f, _) = cf1(eta, l, x)?;
    let denom = f * g - gp;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Numerical(format!(
            "Coulomb Wronskian normalisation failed (eta = {eta}, l = {l}, x = {x})"
        )));
    }
    let fv = 1.0 / denom;
    Ok(CoulombWave { f: fv, g, fp: f * fv, gp })
}

/// Coulomb functions at many arguments; under the barrier the irregular
/// solution is carried from one point to the next instead of restarting.
pub fn coulomb_continuum_many(eta: f64, l: u32, xs: &[f64]) -> Result<Vec<CoulombWave>> {
    let (mut waves, log_scale) = coulomb_continuum_many_scaled(eta, l, xs)?;
    if log_scale != 0.0 {
        let a = log_scale.exp();
        if !a.is_finite() {
            return Err(Error::Numerical(format!(
                "Coulomb G overflows (log scale {log_scale:.1}, eta = {eta}, l = {l})"
            )));
        }
        for w in &mut waves {
            *w = CoulombWave { f: w.f / a, g: w.g * a, fp: w.fp / a, gp: w.gp * a };
        }
    }
    Ok(waves)
}

/// Like [`coulomb_continuum_many`], but returns the pair scaled by a common
/// factor `e^L` chosen so that the irregular function is of order one at the
/// largest argument: `F = f e^-L`, `G = g e^L`. The Wronskian is unchanged.
/// Deep under the barrier this keeps both members finite.
pub fn coulomb_continuum_many_scaled(eta: f64, l: u32, xs: &[f64]) -> Result<(Vec<CoulombWave>, f64)> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]));
    let lf = l as f64;
    let ll = lf * (lf + 1.0);
    let tp = turning_point(eta, lf);
    let barrier = |x: f64| x <= 1.05 * tp + 2.0;
    let mut out = vec![CoulombWave { f: 0.0, g: 0.0, fp: 0.0, gp: 0.0 }; xs.len()];
    // (x, g, g', log scale of g) of the last point under the barrier
    let mut carried: Option<(f64, f64, f64, f64)> = None;
    let mut log_ref: Option<f64> = None;
    for i in order {
        let x = xs[i];
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("Coulomb functions need x > 0 (got x = {x}, eta = {eta})")));
        }
        if !barrier(x) {
            let w = coulomb_continuum(eta, l, x)?;
            log_ref.get_or_insert(0.0);
            out[i] = w;
            continue;
        }
        let (x0, g0, gp0, s0) = match carried {
            Some(c) => c,
            None => {
                let xs0 = (1.2 * tp + 10.0).max(x + 1.0);
                let start = steed(eta, l, xs0)?.ok_or_else(|| {
                    Error::Numerical(format!("Coulomb CF2 failed at x = {xs0} (eta = {eta}, l = {l})"))
                })?;
                (xs0, start.g, start.gp, 0.0)
            }
        };
        let (g, gp, s) = carry_inward_scaled(eta, ll, g0, gp0, s0, x0, x);
        carried = Some((x, g, gp, s));
        let lr = *log_ref.get_or_insert_with(|| s + g.abs().max(1.0).ln());
        // G = g e^s, scaled G = g e^(s - lr)
        let a = (s - lr).exp();
        if !a.is_finite() || a == 0.0 {
            return Err(Error::Numerical(format!(
                "Coulomb G varies by more than the float range over the table (eta = {eta}, l = {l})"
            )));
        }
        let (gs, gps) = (g * a, gp * a);
        let (f, _) = cf1(eta, l, x)?;
        let denom = f * gs - gps;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Numerical(format!(
                "Coulomb Wronskian normalisation failed (eta = {eta}, l = {l}, x = {x})"
            )));
        }
        let fv = 1.0 / denom;
        out[i] = CoulombWave { f: fv, g: gs, fp: f * fv, gp: gps };
    }
    Ok((out, log_ref.unwrap_or(0.0)))
}

/// [`carry_inward`] with the solution renormalised whenever it grows large;
/// the accumulated logarithm of the removed factor is returned with it.
fn carry_inward_scaled(
    eta: f64,
    ll: f64,
    mut y: f64,
    mut yp: f64,
    mut log_scale: f64,
    from: f64,
    to: f64,
) -> (f64, f64, f64) {
    let span = from - to;
    if span <= 0.0 {
        return (y, yp, log_scale);
    }
    // chunks short enough that growth within one cannot overflow
    let chunks = ((span / 0.5).ceil() as usize).max(1);
    let step = span / chunks as f64;
    let mut t = from;
    for _ in 0..chunks {
        let (ny, nyp) = carry_inward(eta, ll, y, yp, t, t - step);
        y = ny;
        yp = nyp;
        t -= step;
        let m = y.abs().max(yp.abs());
        if m > 1e100 {
            y /= m;
            yp /= m;
            log_scale += m.ln();
        }
    }
    (y, yp, log_scale)
}

use serde::{Deserialize, Serialize};

use super::legendre::gauss_legendre;
use crate::error::{Error, Result};

/// Which member of a standing-wave pair a radial function is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadialFunctionKind {
    OpenSine,
    OpenCosine,
    ClosedDecaying,
    ClosedGrowing,
    CoulombRegular,
    CoulombIrregular,
}

impl RadialFunctionKind {
    /// True for the member that multiplies the identity in the standing-wave
    /// boundary condition.
    pub fn is_sine_like(self) -> bool {
        matches!(
            self,
            RadialFunctionKind::OpenSine
                | RadialFunctionKind::ClosedDecaying
                | RadialFunctionKind::CoulombRegular
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialValue {
    pub value: f64,
    pub deriv: f64,
}

fn riccati(l: u32, x: f64, cosine: bool) -> (f64, f64) {
    let (s, c) = x.sin_cos();
    // order -1 and 0
    let (mut prev, mut cur) = if cosine { (-s, c) } else { (c, s) };
    for k in 0..l {
        let next = (2 * k + 1) as f64 / x * cur - prev;
        prev = cur;
        cur = next;
    }
    (cur, prev - l as f64 / x * cur)
}

/// Riccati-Bessel functions (open channels, wavenumber `k`) or plain
/// exponentials (closed channels, decay constant `k`), as functions of `r`.
/// Exponentials are measured from `r_ref` so that they stay finite.
pub fn riccati_or_exponential(
    kind: RadialFunctionKind,
    l: u32,
    k: f64,
    r: f64,
    r_ref: f64,
) -> Result<RadialValue> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let out = match kind {
        RadialFunctionKind::OpenSine | RadialFunctionKind::OpenCosine => {
            let (v, d) = riccati(l, k * r, kind == RadialFunctionKind::OpenCosine);
            RadialValue { value: v, deriv: k * d }
        }
        RadialFunctionKind::ClosedDecaying | RadialFunctionKind::ClosedGrowing => {
            let sign = if kind == RadialFunctionKind::ClosedDecaying { -1.0 } else { 1.0 };
            let arg = sign * k * (r - r_ref);
            if arg > 700.0 {
                return Err(Error::Numerical(format!(
                    "exponential overflow at kappa (r - r_ref) = {arg}; move the reference radius"
                )));
            }
            let v = arg.exp();
            RadialValue { value: v, deriv: sign * k * v }
        }
        RadialFunctionKind::CoulombRegular | RadialFunctionKind::CoulombIrregular => {
            return Err(Error::Domain(
                "Coulomb kinds are evaluated by coulomb_continuum".into(),
            ))
        }
    };
    Ok(out)
}

/// WKB decaying and growing solutions of
/// `u'' = (kappa^2 + 2 eta kappa / r + l(l+1)/r^2) u`, normalised to one at
/// `r_ref`. Returns (decaying, growing).
pub fn closed_channel_pair(
    kappa: f64,
    eta: f64,
    l: u32,
    r: f64,
    r_ref: f64,
) -> Result<(RadialValue, RadialValue)> {
    if !(r > 0.0 && r_ref > 0.0 && kappa > 0.0) {
        return Err(Error::Domain(format!(
            "closed channel needs positive r, r_ref, kappa (got {r}, {r_ref}, {kappa})"
        )));
    }
    let ll = (l * (l + 1)) as f64;
    let q2 = |t: f64| kappa * kappa + 2.0 * eta * kappa / t + ll / (t * t);
    let q = |t: f64| {
        let v = q2(t);
        if v <= 0.0 {
            f64::NAN
        } else {
            v.sqrt()
        }
    };
    let (xs, ws) = gauss_legendre(24);
    let (mid, half) = (0.5 * (r + r_ref), 0.5 * (r - r_ref));
    let phase: f64 = xs.iter().zip(&ws).map(|(x, w)| w * q(mid + half * x)).sum::<f64>() * half;
    let (qr, qref) = (q(r), q(r_ref));
    if !phase.is_finite() || !qr.is_finite() || !qref.is_finite() {
        return Err(Error::Domain(format!(
            "closed channel is classically allowed between {r_ref} and {r}"
        )));
    }
    if phase.abs() > 700.0 {
        return Err(Error::Numerical(format!("closed-channel exponent {phase} overflows")));
    }
    let dq = -(eta * kappa / (r * r) + ll / r.powi(3)) / qr;
    let amp = (qref / qr).sqrt();
    let dec = amp * (-phase).exp();
    let gro = amp * phase.exp();
    let shift = -0.5 * dq / qr;
    Ok((
        RadialValue { value: dec, deriv: dec * (-qr + shift) },
        RadialValue { value: gro, deriv: gro * (qr + shift) },
    ))
}

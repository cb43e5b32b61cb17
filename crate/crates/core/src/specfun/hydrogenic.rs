use crate::error::{Error, Result};

/// Bound-state energy `-(Z^2 mu) / (2 n^2)` in hartree.
pub fn hydrogenic_energy(n: u32, z: f64, mu: f64) -> f64 {
    -z * z * mu / (2.0 * (n as f64).powi(2))
}

fn laguerre_pair(k: i64, alpha: f64, x: f64) -> (f64, f64) {
    // L_k^alpha(x) and L_{k-1}^{alpha+1}(x) (the latter is -d/dx L_k^alpha)
    let eval = |k: i64, a: f64| -> f64 {
        if k < 0 {
            return 0.0;
        }
        let (mut l0, mut l1) = (1.0, 1.0 + a - x);
        if k == 0 {
            return l0;
        }
        for j in 1..k {
            let jf = j as f64;
            let l2 = ((2.0 * jf + 1.0 + a - x) * l1 - (jf + a) * l0) / (jf + 1.0);
            l0 = l1;
            l1 = l2;
        }
        l1
    };
    (eval(k, alpha), eval(k - 1, alpha + 1.0))
}

/// Hydrogenic radial function and its r-derivative for a particle of mass
/// `mu` bound by charge `zeff`; normalised as `int C^2 r^2 dr = 1`.
pub fn coulomb_bound_with_derivative(n: u32, l: u32, zeff: f64, mu: f64, r: f64) -> Result<(f64, f64)> {
    if l >= n {
        return Err(Error::Domain(format!("l = {l} must be below n = {n}")));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("radius must be nonnegative, got {r}")));
    }
    let nf = n as f64;
    let beta = 2.0 * zeff * mu / nf;
    let x = beta * r;
    // (n-l-1)!/(n+l)! as a product
    let mut ratio = 1.0;
    for i in (n - l)..=(n + l) {
        ratio /= i as f64;
    }
    let norm = (beta.powi(3) * ratio / (2.0 * nf)).sqrt();
    let k = (n - l - 1) as i64;
    let (lag, dlag_neg) = laguerre_pair(k, (2 * l + 1) as f64, x);
    let e = (-0.5 * x).exp();
    let lf = l as f64;
    let xl = if l == 0 { 1.0 } else { x.powi(l as i32) };
    let value = norm * xl * e * lag;
    // d/dx [x^l e^{-x/2} L(x)]
    let dxl = if l == 0 { 0.0 } else { lf * x.powi(l as i32 - 1) };
    let d = dxl * e * lag - 0.5 * xl * e * lag - xl * e * dlag_neg;
    Ok((value, norm * beta * d))
}

pub fn coulomb_bound(n: u32, l: u32, zeff: f64, mu: f64, r: f64) -> Result<f64> {
    coulomb_bound_with_derivative(n, l, zeff, mu, r).map(|v| v.0)
}

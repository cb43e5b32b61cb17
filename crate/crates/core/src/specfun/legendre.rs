/// Normalised Legendre polynomial, `int_{-1}^{1} P^2 dx = 1`.
pub fn legendre_norm(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return std::f64::consts::FRAC_1_SQRT_2;
    }
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1 * ((2 * l + 1) as f64 / 2.0).sqrt()
}

/// Values and x-derivatives of normalised Legendre polynomials 0..n at `x`.
pub fn legendre_norm_table(n: usize, x: f64, values: &mut [f64], derivs: &mut [f64]) {
    debug_assert!(values.len() >= n && derivs.len() >= n);
    if n == 0 {
        return;
    }
    // plain polynomials first
    values[0] = 1.0;
    derivs[0] = 0.0;
    if n > 1 {
        values[1] = x;
        derivs[1] = 1.0;
    }
    for k in 2..n {
        let kf = k as f64;
        values[k] = ((2.0 * kf - 1.0) * x * values[k - 1] - (kf - 1.0) * values[k - 2]) / kf;
        derivs[k] = derivs[k - 2] + (2.0 * kf - 1.0) * values[k - 1];
    }
    for k in 0..n {
        let c = ((2 * k + 1) as f64 / 2.0).sqrt();
        values[k] *= c;
        derivs[k] *= c;
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

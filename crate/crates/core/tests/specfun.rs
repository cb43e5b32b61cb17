use std::f64::consts::{FRAC_PI_2, SQRT_2};

use approx::assert_relative_eq;
use muxfer::specfun::*;
use proptest::prelude::*;

fn h(twice: i32) -> HalfInt {
    HalfInt::from_twice(twice)
}

fn cg(tj1: i32, tj2: i32, tm1: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
    clebsch_gordan(h(tj1), h(tj2), h(tm1), h(tm2), h(tj), h(tm)).unwrap()
}

#[test]
fn legendre_values() {
    assert_relative_eq!(legendre_norm(0, 0.3), 1.0 / SQRT_2, epsilon = 1e-15);
    assert_relative_eq!(legendre_norm(1, 1.0), 1.5f64.sqrt(), epsilon = 1e-15);
}

#[test]
fn legendre_orthonormality() {
    let (x, w) = gauss_legendre(40);
    for l in 0..30 {
        for k in 0..30 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * legendre_norm(l, *x) * legendre_norm(k, *x)).sum();
            let want = if l == k { 1.0 } else { 0.0 };
            assert!((s - want).abs() < 1e-12, "({l}, {k}): {s}");
        }
    }
}

#[test]
fn legendre_table_matches_single_values() {
    let mut v = vec![0.0; 12];
    let mut d = vec![0.0; 12];
    legendre_norm_table(12, 0.37, &mut v, &mut d);
    for (l, val) in v.iter().enumerate() {
        assert_relative_eq!(*val, legendre_norm(l, 0.37), epsilon = 1e-14);
        let fd = (legendre_norm(l, 0.37 + 1e-6) - legendre_norm(l, 0.37 - 1e-6)) / 2e-6;
        assert!((d[l] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "l = {l}");
    }
}

fn radial_quadrature(f: impl Fn(f64) -> f64, r_max: f64) -> f64 {
    let (x, w) = gauss_legendre(200);
    let (mid, half) = (0.5 * r_max, 0.5 * r_max);
    x.iter().zip(&w).map(|(x, w)| w * half * f(mid + half * x)).sum()
}

#[test]
fn hydrogenic_ground_state() {
    let (z, mu) = (8.0, 205.3);
    let c0 = coulomb_bound(1, 0, z, mu, 0.0).unwrap();
    assert_relative_eq!(c0, 2.0 * (z * mu as f64).powf(1.5), max_relative = 1e-13);
    let r = 3e-4;
    assert_relative_eq!(coulomb_bound(1, 0, z, mu, r).unwrap(), c0 * (-z * mu * r).exp(), max_relative = 1e-13);
    let mean = radial_quadrature(|r| r.powi(3) * coulomb_bound(1, 0, z, mu, r).unwrap().powi(2), 0.02);
    assert_relative_eq!(mean, 1.5 / (z * mu), max_relative = 1e-10);
    assert!(coulomb_bound(2, 2, z, mu, 1.0).is_err());
    assert_relative_eq!(hydrogenic_energy(1, 1.0, 1.0), -0.5);
}

#[test]
fn hydrogenic_orthonormality_and_nodes() {
    let (z, mu) = (1.0, 1.0);
    for l in 0..5u32 {
        for n in (l + 1)..9 {
            for m in (l + 1)..9 {
                let s = radial_quadrature(
                    |r| r * r * coulomb_bound(n, l, z, mu, r).unwrap() * coulomb_bound(m, l, z, mu, r).unwrap(),
                    400.0,
                );
                let want = if n == m { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-8, "n {n} m {m} l {l}: {s}");
            }
            let mut nodes = 0;
            let mut prev = coulomb_bound(n, l, z, mu, 1e-3).unwrap();
            for k in 1..20000 {
                let v = coulomb_bound(n, l, z, mu, 1e-3 + k as f64 * 0.01).unwrap();
                if v * prev < 0.0 {
                    nodes += 1;
                }
                prev = v;
            }
            assert_eq!(nodes, n - l - 1, "n {n} l {l}");
        }
    }
}

#[test]
fn hydrogenic_derivative() {
    for (n, l) in [(1, 0), (3, 1), (6, 4), (8, 0)] {
        let r = 2.3;
        let (_, d) = coulomb_bound_with_derivative(n, l, 1.0, 1.0, r).unwrap();
        let fd = (coulomb_bound(n, l, 1.0, 1.0, r + 1e-6).unwrap() - coulomb_bound(n, l, 1.0, 1.0, r - 1e-6).unwrap())
            / 2e-6;
        assert!((d - fd).abs() < 1e-7, "({n}, {l}) {d} vs {fd}");
    }
}

#[test]
fn coulomb_free_limit() {
    for x in [0.1, 1.0, 7.3, 50.0] {
        let w = coulomb_continuum(0.0, 0, x).unwrap();
        assert_relative_eq!(w.f, x.sin(), epsilon = 1e-10);
        assert_relative_eq!(w.g, x.cos(), epsilon = 1e-10);
        assert_relative_eq!(w.fp, x.cos(), epsilon = 1e-10);
        assert_relative_eq!(w.gp, -x.sin(), epsilon = 1e-10);
    }
}

#[test]
fn coulomb_reference_values() {
    // (eta, l, x, F, G, F')
    let cases = [
        (-1.0f64, 0, 5.0, 0.909410196117174688f64, 0.139592527761827318f64, 0.177569613582705703),
        (-7.5, 2, 3.0, 0.657026772213837566, 0.0439645508457721754, 0.138923941075669420),
        (0.5, 1, 0.3, 0.0134907920450534117, 7.11609535860435437, 0.0924701049468555980),
        (15.7866, 0, 100.0, 0.830104256833292418, -0.720965303211600931, -0.597356171443580636),
    ];
    for (eta, l, x, f, g, fp) in cases {
        let w = coulomb_continuum(eta, l, x).unwrap();
        let tol = 1e-9 * (1.0 + g.abs());
        assert!((w.f - f).abs() < tol, "F({eta}, {l}, {x}) = {} vs {f}", w.f);
        assert!((w.g - g).abs() < tol, "G({eta}, {l}, {x}) = {} vs {g}", w.g);
        assert!((w.fp - fp).abs() < tol, "F'({eta}, {l}, {x}) = {} vs {fp}", w.fp);
    }
    let w = coulomb_continuum(2.0, 3, 40.0).unwrap();
    assert!((w.f + 0.899686685687).abs() < 1e-9);
    assert!(coulomb_continuum(1.0, 0, 0.0).is_err());
}

#[test]
fn coulomb_batch_matches_single() {
    let xs = [0.5, 3.0, 12.0, 80.0];
    let many = coulomb_continuum_many(-3.0, 2, &xs).unwrap();
    for (x, w) in xs.iter().zip(&many) {
        let one = coulomb_continuum(-3.0, 2, *x).unwrap();
        assert_relative_eq!(w.f, one.f, max_relative = 1e-10, epsilon = 1e-14);
        assert_relative_eq!(w.g, one.g, max_relative = 1e-10, epsilon = 1e-14);
    }
}

#[test]
fn scaled_coulomb_pair() {
    let xs = [0.5, 1.0, 2.0, 4.0];
    let plain = coulomb_continuum_many(12.0, 1, &xs).unwrap();
    let (scaled, log_scale) = coulomb_continuum_many_scaled(12.0, 1, &xs).unwrap();
    assert!(log_scale > 0.0);
    let a = log_scale.exp();
    for (p, s) in plain.iter().zip(&scaled) {
        assert_relative_eq!(s.f / a, p.f, max_relative = 1e-10);
        assert_relative_eq!(s.g * a, p.g, max_relative = 1e-10);
    }

    // deep under the barrier G alone overflows
    let (eta, xs) = (400.0, [1.0, 1.5, 2.0]);
    assert!(coulomb_continuum_many(eta, 0, &xs).is_err());
    let (scaled, log_scale) = coulomb_continuum_many_scaled(eta, 0, &xs).unwrap();
    assert!(log_scale > 709.0, "log scale {log_scale}");
    for w in &scaled {
        assert!(w.f.is_finite() && w.g.is_finite() && w.f > 0.0 && w.g > 0.0);
        assert!((w.fp * w.g - w.f * w.gp - 1.0).abs() < 1e-8);
    }
}

#[test]
fn riccati_and_exponential_examples() {
    let k = 2.0;
    let v = riccati_or_exponential(RadialFunctionKind::OpenSine, 0, k, FRAC_PI_2 / k, 1.0).unwrap();
    assert_relative_eq!(v.value, 1.0, epsilon = 1e-15);
    let (kappa, r) = (1.3, 2.0);
    let a = riccati_or_exponential(RadialFunctionKind::ClosedDecaying, 0, kappa, r, 1.0).unwrap();
    let b = riccati_or_exponential(RadialFunctionKind::ClosedDecaying, 0, kappa, 2.0 * r, 1.0).unwrap();
    assert_relative_eq!(b.value / a.value, (-kappa * r).exp(), max_relative = 1e-13);
    let far = riccati_or_exponential(RadialFunctionKind::ClosedGrowing, 0, 50.0, 30.0, 29.0).unwrap();
    assert!(far.value.is_finite());
    assert!(riccati_or_exponential(RadialFunctionKind::OpenSine, 0, 1.0, 0.0, 1.0).is_err());
}

#[test]
fn radial_derivatives_match_differences() {
    let kinds = [
        RadialFunctionKind::OpenSine,
        RadialFunctionKind::OpenCosine,
        RadialFunctionKind::ClosedDecaying,
        RadialFunctionKind::ClosedGrowing,
    ];
    for kind in kinds {
        for l in 0..4 {
            let r = 3.7;
            let v = riccati_or_exponential(kind, l, 1.4, r, 3.0).unwrap();
            let up = riccati_or_exponential(kind, l, 1.4, r + 1e-5, 3.0).unwrap().value;
            let dn = riccati_or_exponential(kind, l, 1.4, r - 1e-5, 3.0).unwrap().value;
            let fd = (up - dn) / 2e-5;
            assert!((v.deriv - fd).abs() < 1e-8 * (1.0 + fd.abs()), "{kind:?} l {l}: {} vs {fd}", v.deriv);
        }
    }
    let (dec, gro) = closed_channel_pair(2.0, 1.5, 2, 10.0, 9.0).unwrap();
    let (dec_up, gro_up) = closed_channel_pair(2.0, 1.5, 2, 10.0 + 1e-5, 9.0).unwrap();
    let (dec_dn, gro_dn) = closed_channel_pair(2.0, 1.5, 2, 10.0 - 1e-5, 9.0).unwrap();
    assert!((dec.deriv - (dec_up.value - dec_dn.value) / 2e-5).abs() < 1e-7 * dec.deriv.abs());
    assert!((gro.deriv - (gro_up.value - gro_dn.value) / 2e-5).abs() < 1e-7 * gro.deriv.abs());
    assert!(dec.value < 1.0 && gro.value > 1.0);
}

#[test]
fn sine_like_pairing() {
    assert!(RadialFunctionKind::OpenSine.is_sine_like());
    assert!(RadialFunctionKind::ClosedDecaying.is_sine_like());
    assert!(RadialFunctionKind::CoulombRegular.is_sine_like());
    assert!(!RadialFunctionKind::OpenCosine.is_sine_like());
    assert!(!RadialFunctionKind::ClosedGrowing.is_sine_like());
    assert!(!RadialFunctionKind::CoulombIrregular.is_sine_like());
}

#[test]
fn clebsch_gordan_examples() {
    assert_relative_eq!(cg(1, 1, 1, -1, 0, 0), 1.0 / SQRT_2, epsilon = 1e-15);
    assert_relative_eq!(cg(2, 2, 2, -2, 0, 0), 1.0 / 3f64.sqrt(), epsilon = 1e-15);
    assert_eq!(cg(2, 2, 2, 2, 0, 0), 0.0);
    assert_eq!(cg(2, 2, 0, 0, 6, 0), 0.0);
    assert!(clebsch_gordan(h(2), h(1), h(1), h(1), h(1), h(2)).is_err());
}

#[test]
fn clebsch_gordan_orthogonality() {
    for tj1 in 0..=8i32 {
        for tj2 in 0..=8 {
            let js: Vec<i32> = ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2).collect();
            for &tj in &js {
                for &tjp in &js {
                    for tm in (-tj..=tj).step_by(2) {
                        for tmp in (-tjp..=tjp).step_by(2) {
                            let mut s = 0.0;
                            for tm1 in (-tj1..=tj1).step_by(2) {
                                for tm2 in (-tj2..=tj2).step_by(2) {
                                    s += cg(tj1, tj2, tm1, tm2, tj, tm) * cg(tj1, tj2, tm1, tm2, tjp, tmp);
                                }
                            }
                            let want = if tj == tjp && tm == tmp { 1.0 } else { 0.0 };
                            assert!((s - want).abs() < 1e-12, "{tj1} {tj2} {tj} {tm} {tjp} {tmp}: {s}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn clebsch_gordan_exchange_symmetry() {
    for tj1 in 0..=8i32 {
        for tj2 in 0..=8 {
            for tj in ((tj1 - tj2).abs()..=tj1 + tj2).step_by(2) {
                let sign = if ((tj1 + tj2 - tj) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                for tm1 in (-tj1..=tj1).step_by(2) {
                    for tm2 in (-tj2..=tj2).step_by(2) {
                        let a = cg(tj1, tj2, tm1, tm2, tj, tm1 + tm2);
                        let b = cg(tj2, tj1, tm2, tm1, tj, tm1 + tm2);
                        assert!((a - sign * b).abs() < 1e-13);
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn coulomb_wronskian(eta in -20.0..20.0f64, l in 0u32..8, x in 0.2..300.0f64) {
        let w = coulomb_continuum(eta, l, x).unwrap();
        let scale = (w.fp * w.g).abs() + (w.f * w.gp).abs();
        let wr = w.fp * w.g - w.f * w.gp;
        prop_assert!((wr - 1.0).abs() < 1e-10 * scale.max(1.0), "W = {wr} at ({eta}, {l}, {x})");
    }
}

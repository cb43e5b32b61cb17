use muxfer::basis::*;
use muxfer::kinematics::{Charges, Masses, SystemDefinition};
use muxfer::linalg::sym_eigenvalues;
use muxfer::matching::{threshold, entrance_threshold};
use muxfer::potential::weighted_potential;
use muxfer::kinematics::Arrangement;
use muxfer::units::hartree_to_ev;
use nalgebra::DMatrix;

fn sys() -> SystemDefinition {
    SystemDefinition::muonic_oxygen()
}

fn amu(x: f64) -> f64 {
    x * sys().muonic_bohr()
}

fn small_settings(channels: usize) -> BasisSettings {
    BasisSettings {
        channels,
        skip: 0,
        primitive_eta: 16,
        primitive_xi: 24,
        primitive_growth: 0.0,
        xi_margin: 0,
        contracted_eta: 12,
        contracted_xi: 16,
        product_pairs: 120,
        dilation_correction: true,
        closure_correction: false,
    }
}

#[test]
fn one_dimensional_size_checks() {
    let s = sys();
    assert!(solve_1d_eta(&s, 1.0, -100.0, 3).is_err());
    assert!(solve_1d_xi(&s, 1.0, -100.0, 3).is_err());
    let (v, f) = solve_1d_eta(&s, 1.0, -100.0, 10).unwrap();
    assert_eq!((v.len(), f.nrows(), f.ncols()), (10, 10, 10));
    let (v, _) = solve_1d_xi(&s, 1.0, -100.0, 12).unwrap();
    assert!(v.as_slice().windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn uncharged_narrow_domain_gives_legendre_spectrum() {
    let masses = Masses { oxygen: 29148.95, proton: 1836.1527, muon: 1e-4 };
    let charges = Charges { oxygen: 0.0, proton: 0.0, muon: 0.0 };
    let s = SystemDefinition::new(masses, charges).unwrap();
    assert!(s.theta < 1e-3);
    let rho = 2.0;
    let (vals, _) = solve_1d_eta(&s, rho, 0.0, 14).unwrap();
    let unit = 4.0 / (s.scaling_mass * rho * rho);
    for k in 0..8 {
        let expected = unit * (k * (k + 1)) as f64;
        assert!((vals[k] - expected).abs() < 1e-6 * unit * (1 + k * k) as f64, "k = {k}: {} vs {expected}", vals[k]);
    }
    let (xv, _) = solve_1d_xi(&s, rho, 0.0, 24).unwrap();
    assert!(xv.as_slice().windows(2).all(|w| w[0] < w[1]));
}

/// Cell-centred finite differences for `-kin (a u')' + U u - eps a u`.
fn eta_slice_oracle(s: &SystemDefinition, rho: f64, eps: f64, cells: usize) -> Vec<f64> {
    let t = 2.0 * s.theta;
    let h = 2.0 * t / cells as f64;
    let kin = kinetic_prefactor(s, rho);
    let a = |u: f64| axis_weight(s, Axis::Eta, u);
    let mut m = DMatrix::zeros(cells, cells);
    for i in 0..cells {
        let u = -t + (i as f64 + 0.5) * h;
        let left = if i == 0 { 0.0 } else { a(u - 0.5 * h) };
        let right = if i + 1 == cells { 0.0 } else { a(u + 0.5 * h) };
        m[(i, i)] = kin * (left + right) / (h * h) + weighted_potential(s, rho, u, t) - eps * a(u);
        if i + 1 < cells {
            m[(i, i + 1)] = -kin * right / (h * h);
            m[(i + 1, i)] = -kin * right / (h * h);
        }
    }
    sym_eigenvalues(m).iter().copied().collect()
}

#[test]
fn eta_problem_matches_slice_oracle() {
    let s = sys();
    for (rho_amu, eps) in [(1.0, -3000.0), (10.0, -300.0)] {
        let rho = amu(rho_amu);
        let p = OneDimProblem::new(&s, Axis::Eta, rho, 40);
        let galerkin = p.eigenvalues(eps);
        let fd = eta_slice_oracle(&s, rho, eps, 1200);
        let scale = galerkin[4].abs().max(galerkin[0].abs());
        for k in 0..5 {
            let err = (galerkin[k] - fd[k]).abs() / scale;
            assert!(err < 1e-3, "rho {rho_amu} a_mu, k = {k}: {} vs {} ({err})", galerkin[k], fd[k]);
        }
    }
}

#[test]
fn xi_eigenfunction_node_count() {
    let s = sys();
    let rho = amu(0.1);
    let n = 48;
    let (_, f) = solve_1d_xi(&s, rho, 0.0, n).unwrap();
    let prim = Primitive1D::for_axis(&s, Axis::Xi, n, 1);
    let (lo, hi) = (prim.centre - prim.half, prim.centre + prim.half);
    for m in 0..8 {
        let c: Vec<f64> = f.column(m).iter().copied().collect();
        let vals: Vec<f64> = (1..4000).map(|i| prim.evaluate(&c, lo + (hi - lo) * i as f64 / 4000.0).0).collect();
        // ignore the small oscillating tails in the forbidden region
        let peak = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lobes: Vec<f64> = vals.into_iter().filter(|v| v.abs() > 1e-6 * peak).collect();
        let nodes = lobes.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        assert_eq!(nodes, m, "state {m}");
    }
}

#[test]
fn one_dimensional_convergence_at_production_size() {
    let s = sys();
    let settings = BasisSettings::default();
    for rho_amu in [1.0, 10.0, 30.0, 100.0, 200.0] {
        let rho = amu(rho_amu);
        let eps = build_sector_basis(&s, rho, 0.0, &settings).unwrap().reference_energy;
        let (ne, nx) = settings.primitive_sizes(&s, rho);
        for (axis, n) in [(Axis::Eta, ne), (Axis::Xi, nx)] {
            let a = OneDimProblem::new(&s, axis, rho, n).eigenvalues(eps);
            let b = OneDimProblem::new(&s, axis, rho, n + 8).eigenvalues(eps);
            for k in 0..10 {
                let rel = (a[k] - b[k]).abs() / a[k].abs();
                assert!(rel < 1e-6, "{rho_amu} a_mu, {axis:?} k = {k}: {rel:e}");
            }
        }
    }
}

#[test]
fn separable_roots_are_tight() {
    let s = sys();
    let levels = find_separable_levels(&s, amu(3.0), 8, 24, 40, 1e-13).unwrap();
    assert_eq!(levels.len(), 8);
    assert!(levels.windows(2).all(|w| w[0].energy <= w[1].energy));
    for l in &levels {
        assert!(l.residual < 1e-10, "({}, {}): {}", l.k, l.l, l.residual);
    }
    assert!(find_separable_levels(&s, amu(3.0), 0, 24, 40, 1e-13).is_err());
}

#[test]
fn separable_levels_approach_thresholds_at_large_rho() {
    let s = sys();
    let settings = BasisSettings::default();
    let levels = |rho_amu: f64| {
        let rho = amu(rho_amu);
        let (ne, nx) = settings.primitive_sizes(&s, rho);
        find_separable_levels(&s, rho, 46, ne, nx, 1e-12).unwrap()
    };
    let (near, far) = (levels(150.0), levels(200.0));
    let pmu = entrance_threshold(&s);
    assert!((hartree_to_ev(pmu) + 2528.5).abs() < 1.0);
    for set in [&near, &far] {
        assert!(set.iter().any(|l| (l.energy / pmu - 1.0).abs() < 1e-2), "no level near (p mu) 1s");
    }
    // (mu O) levels still carry the proton repulsion, which falls as 1/rho
    let limits: Vec<f64> = far
        .iter()
        .filter_map(|f| {
            let n = near.iter().find(|l| (l.k, l.l) == (f.k, f.l))?;
            Some((200.0 * f.energy - 150.0 * n.energy) / 50.0)
        })
        .collect();
    for n in [1, 8] {
        let target = threshold(&s, Arrangement::Product, n);
        let best = limits.iter().map(|e| (e / target - 1.0).abs()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-2, "(mu O) n = {n}: closest extrapolated level off by {best}");
    }
    assert!((hartree_to_ev(threshold(&s, Arrangement::Product, 8)) + 2793.0).abs() < 2.0);
}

/// `(H - eps B)` of the two-dimensional problem on the retained product
/// pairs of a sector basis.
fn pair_operator(s: &SystemDefinition, b: &SectorBasis) -> (DMatrix<f64>, DMatrix<f64>) {
    let (ne, nx) = b.primitive_sizes();
    let pe = OneDimProblem::new(s, Axis::Eta, b.rho, ne);
    let px = OneDimProblem::new(s, Axis::Xi, b.rho, nx);
    let (fe, fx) = (&b.eta_functions, &b.xi_functions);
    let ae = fe.transpose() * &pe.stiffness * fe;
    let be = fe.transpose() * &pe.weight * fe;
    let ax = fx.transpose() * &px.stiffness * fx;
    let bx = fx.transpose() * &px.weight * fx;
    let ge = pe.prim.weighted_values(fe);
    let gx = px.prim.weighted_values(fx);
    let pot = DMatrix::from_fn(ge.nrows(), gx.nrows(), |q, r| {
        weighted_potential(s, b.rho, pe.prim.coordinate(q), px.prim.coordinate(r))
    });
    let n = b.pairs.len();
    let mut h = DMatrix::zeros(n, n);
    let mut w = DMatrix::zeros(n, n);
    for (i, &(k, l)) in b.pairs.iter().enumerate() {
        for (j, &(kp, lp)) in b.pairs.iter().enumerate() {
            let (k, l, kp, lp) = (k as usize, l as usize, kp as usize, lp as usize);
            let mut u = 0.0;
            for q in 0..ge.nrows() {
                let eq = ge[(q, k)] * ge[(q, kp)];
                for r in 0..gx.nrows() {
                    u += eq * pot[(q, r)] * gx[(r, l)] * gx[(r, lp)];
                }
            }
            let mut kk = 0.0;
            let mut ww = 0.0;
            if l == lp {
                kk += ae[(k, kp)];
                ww += be[(k, kp)];
            }
            if k == kp {
                kk += ax[(l, lp)];
                ww += bx[(l, lp)];
            }
            h[(i, j)] = pe.kinetic * kk + u;
            w[(i, j)] = ww;
        }
    }
    (h, w)
}

#[test]
fn channel_energies_are_zero_eigenvalue_roots() {
    let s = sys();
    let b = build_sector_basis(&s, amu(2.0), 0.0, &small_settings(6)).unwrap();
    let (h, w) = pair_operator(&s, &b);
    let spectral = sym_eigenvalues(h.clone()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, &e) in b.energies.iter().enumerate() {
        let op = &h - &w * e;
        let smallest = sym_eigenvalues(op).iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        assert!(smallest < 1e-8 * spectral, "channel {i}: {smallest:e} of {spectral:e}");
        // the channel vector is the null vector, normalised with weight B
        let c = b.coeffs.column(i);
        assert!((c.dot(&(&w * c)) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn sector_basis_structure() {
    let s = sys();
    let rho = amu(2.0);
    let b = build_sector_basis(&s, rho, 0.05 * rho, &small_settings(6)).unwrap();
    assert_eq!(b.channels(), 6);
    assert!(b.energies.as_slice().windows(2).all(|w| w[0] <= w[1]));
    let diag = DMatrix::from_diagonal(&b.energies);
    let scale = b.energies.abs().max();
    assert!((&b.kinetic + &b.potential - &diag).abs().max() < 1e-9 * scale);
    assert_eq!(b.closure, DMatrix::zeros(6, 6));

    let w = b.coupling_matrix(&s, rho);
    let reduction = 15.0 / (8.0 * s.scaling_mass * rho * rho);
    for i in 0..6 {
        for j in 0..6 {
            let expected = if i == j { b.energies[i] + reduction } else { 0.0 };
            assert!((w[(i, j)] - expected).abs() < 1e-9 * scale, "({i}, {j})");
        }
    }
    let off = b.coupling_matrix(&s, 1.03 * rho);
    assert!((&off - off.transpose()).abs().max() < 1e-10 * scale);

    assert!(build_sector_basis(&s, -1.0, 0.0, &small_settings(6)).is_err());
    assert!(build_sector_basis(&s, rho, 0.0, &BasisSettings { product_pairs: 3, ..small_settings(6) }).is_err());
}

#[test]
fn coupling_derivative_matches_finite_difference() {
    let s = sys();
    let rho_n = amu(4.0);
    let settings = BasisSettings { closure_correction: true, skip: 2, ..small_settings(8) };
    let b = build_sector_basis(&s, rho_n, 0.05 * rho_n, &settings).unwrap();
    let rho = 1.02 * rho_n;
    let r = rho_n / rho;
    let m = s.scaling_mass;
    let mut analytic = -&b.kinetic * (2.0 * r * r / rho) - &b.potential * (r / rho) - &b.closure * (2.0 * r * r / rho);
    analytic += &b.dilation * (2.0 * (r - 1.0) * r / rho);
    for i in 0..b.channels() {
        analytic[(i, i)] -= 15.0 / (4.0 * m * rho.powi(3));
    }
    let d = 1e-5 * rho;
    let fd = (b.coupling_matrix(&s, rho + d) - b.coupling_matrix(&s, rho - d)) / (2.0 * d);
    let err = (&fd - &analytic).abs().max() / analytic.abs().max();
    assert!(err < 1e-7, "relative error {err}");
}

#[test]
fn overlaps_between_sectors() {
    let s = sys();
    let st = small_settings(6);
    let a = build_sector_basis(&s, amu(1.0), 0.0, &st).unwrap();
    let same = sector_overlap(&s, &a, &a);
    assert!((same - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-10);

    let b = build_sector_basis(&s, amu(1.02), 0.0, &st).unwrap();
    let o = sector_overlap(&s, &a, &b);
    for i in 0..6 {
        assert!(o[(i, i)].abs() > 0.9, "O[{i}{i}] = {}", o[(i, i)]);
    }
    let defect = (o.transpose() * &o - DMatrix::<f64>::identity(6, 6)).abs().max();
    assert!(defect < 1e-2, "orthogonality defect {defect}");
    let (q, _) = condition_overlap(o.clone(), true);
    assert!((q.transpose() * &q - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-12);
}

#[test]
fn small_grid_diagnostics() {
    let s = sys();
    let gs = GridSettings { rho_min: 0.5, rho_max: 2.0, ratio: 1.15, refine_passes: 1, ..GridSettings::default() };
    let g = build_sector_grid(&s, &small_settings(6), &gs).unwrap();
    assert_eq!(g.sectors.len() + 1, g.boundaries.len());
    assert_eq!(g.overlaps.len() + 1, g.sectors.len());
    assert!(g.boundaries.windows(2).all(|w| w[1] > w[0]));
    assert!((g.rho_max() - amu(2.0)).abs() < 1e-12);
    assert!(g.overlap_singular_min.iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-12));
    for o in &g.overlaps {
        assert!((o.transpose() * o - DMatrix::<f64>::identity(6, 6)).abs().max() < 1e-10);
    }
    let bad = GridSettings { rho_min: 3.0, ..gs };
    assert!(build_sector_grid(&s, &small_settings(6), &bad).is_err());
}

//! Projection of the propagated solution onto arrangement-channel functions
//! at the matching radius; K, S and transfer probabilities.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{Axis, Primitive1D, SectorBasis};
use crate::error::{Error, Result};
use crate::kinematics::{cos_gamma1, cos_gamma2, volume_weight, Arrangement, SystemDefinition};
use crate::linalg::condition_estimate;
use crate::potential::pmu_polarizability;
use crate::specfun::{
    closed_channel_pair, coulomb_bound_with_derivative, coulomb_continuum_many_scaled, gauss_legendre, hydrogenic_energy,
    legendre_norm, riccati_or_exponential, RadialFunctionKind, RadialValue,
};
use crate::units::hartree_to_ev;

/// Which bound manifolds enter the calculation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSelection {
    pub pmu_n_min: u32,
    pub pmu_n_max: u32,
    pub muo_n_min: u32,
    pub muo_n_max: u32,
}

impl Default for ChannelSelection {
    fn default() -> Self {
        ChannelSelection { pmu_n_min: 1, pmu_n_max: 1, muo_n_min: 5, muo_n_max: 10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub arrangement: Arrangement,
    pub n: u32,
    pub l: u32,
    /// Threshold energy relative to full break-up (hartree).
    pub threshold: f64,
    /// Threshold relative to the (p mu)1s + O limit (eV).
    pub threshold_ev: f64,
    pub open: bool,
    /// Wavenumber (open) or decay constant (closed) in mass-scaled units.
    pub wavenumber: f64,
    /// Sommerfeld parameter of the relative motion; positive is repulsive.
    pub sommerfeld: f64,
}

impl ChannelSpec {
    pub fn label(&self) -> String {
        let name = match self.arrangement {
            Arrangement::Entrance => "pmu",
            Arrangement::Product => "muO",
        };
        format!("{name}({},{})", self.n, self.l)
    }
}

/// Charge binding the fragment and the scale factor of its pair distance.
fn fragment(sys: &SystemDefinition, arrangement: Arrangement) -> (f64, f64, f64) {
    let z = sys.charges;
    match arrangement {
        Arrangement::Entrance => ((z.proton * z.muon).abs(), sys.reduced.p_mu, sys.scale_p_mu()),
        Arrangement::Product => ((z.muon * z.oxygen).abs(), sys.reduced.mu_o, sys.scale_mu_o()),
    }
}

/// Charge product of the relative motion and its distance scale factor.
fn relative_motion(sys: &SystemDefinition, arrangement: Arrangement) -> (f64, f64) {
    let z = sys.charges;
    match arrangement {
        Arrangement::Entrance => (z.oxygen * (z.proton + z.muon), sys.scale_o_pmu()),
        Arrangement::Product => (z.proton * (z.muon + z.oxygen), sys.scale_p_muo()),
    }
}

pub fn threshold(sys: &SystemDefinition, arrangement: Arrangement, n: u32) -> f64 {
    let (z, mu, _) = fragment(sys, arrangement);
    hydrogenic_energy(n, z, mu)
}

/// Entrance threshold, (p mu)1s + O (hartree).
pub fn entrance_threshold(sys: &SystemDefinition) -> f64 {
    threshold(sys, Arrangement::Entrance, 1)
}

fn make_channel(sys: &SystemDefinition, arrangement: Arrangement, n: u32, l: u32, energy: f64) -> ChannelSpec {
    let t = threshold(sys, arrangement, n);
    let m = sys.scaling_mass;
    let open = energy > t;
    let wavenumber = (2.0 * m * (energy - t).abs()).sqrt();
    let (zc, s) = relative_motion(sys, arrangement);
    let sommerfeld = if wavenumber > 0.0 { m * zc * s / wavenumber } else { 0.0 };
    ChannelSpec {
        arrangement,
        n,
        l,
        threshold: t,
        threshold_ev: hartree_to_ev(t - entrance_threshold(sys)),
        open,
        wavenumber,
        sommerfeld,
    }
}

fn sort_channels(v: &mut [ChannelSpec]) {
    v.sort_by(|a, b| {
        a.threshold
            .total_cmp(&b.threshold)
            .then(a.arrangement.cmp(&b.arrangement))
            .then(a.n.cmp(&b.n))
            .then(a.l.cmp(&b.l))
    });
}

/// All J = 0 channels (l = 0..n-1) of the selected manifolds at total energy
/// `energy` (hartree), ordered by threshold.
pub fn enumerate_channels(sys: &SystemDefinition, energy: f64, sel: &ChannelSelection) -> Vec<ChannelSpec> {
    let mut v = Vec::new();
    for (arr, lo, hi) in [
        (Arrangement::Entrance, sel.pmu_n_min, sel.pmu_n_max),
        (Arrangement::Product, sel.muo_n_min, sel.muo_n_max),
    ] {
        for n in lo.max(1)..=hi {
            for l in 0..n {
                v.push(make_channel(sys, arr, n, l, energy));
            }
        }
    }
    sort_channels(&mut v);
    v
}

/// Number of states below the selection that must be skipped at the bottom
/// of the adiabatic spectrum; errors if the selection is not a contiguous
/// block of the threshold ladder.
pub fn window_offset(sys: &SystemDefinition, sel: &ChannelSelection) -> Result<usize> {
    let chosen = enumerate_channels(sys, 0.0, sel);
    if chosen.is_empty() {
        return Err(Error::Config("channel selection is empty".into()));
    }
    let lo = chosen[0].threshold;
    let hi = chosen[chosen.len() - 1].threshold;
    let mut skip = 0;
    for (arr, nmax) in [(Arrangement::Entrance, 64u32), (Arrangement::Product, 64u32)] {
        for n in 1..=nmax {
            let t = threshold(sys, arr, n);
            let inside = match arr {
                Arrangement::Entrance => n >= sel.pmu_n_min.max(1) && n <= sel.pmu_n_max,
                Arrangement::Product => n >= sel.muo_n_min.max(1) && n <= sel.muo_n_max,
            };
            if inside {
                continue;
            }
            if t < lo {
                skip += n as usize;
            } else if t <= hi {
                return Err(Error::Config(format!(
                    "selection is not contiguous: {:?} n = {n} lies inside the selected threshold range",
                    arr
                )));
            }
        }
    }
    Ok(skip)
}

/// Radial pair (sine-like, cosine-like) of one channel's relative motion,
/// as `u(R)`; the translational factor is `u / R`.
#[derive(Clone, Debug)]
enum Radial {
    Plain { l: u32, k: f64 },
    Closed { kappa: f64, eta: f64, l: u32, r_ref: f64 },
    Table(RadialTable),
}

/// Tabulated pair (uS, uS', uC, uC') on a uniform grid with the ODE
/// coefficient `q(R)` so that `u'' = q u`; quintic Hermite interpolation.
#[derive(Clone, Debug)]
struct RadialTable {
    r0: f64,
    h: f64,
    vals: Vec<[f64; 4]>,
    q: Vec<f64>,
    /// uS carries a factor e^L and uC a factor e^-L.
    log_scale: f64,
}

#[derive(Clone, Copy, Debug)]
struct QFn {
    k2: f64,
    coulomb: f64,
    ll: f64,
    quartic: f64,
}

impl QFn {
    fn eval(&self, r: f64) -> f64 {
        self.ll / (r * r) + self.coulomb / r - self.quartic / r.powi(4) - self.k2
    }
}

impl RadialTable {
    fn eval(&self, r: f64) -> [f64; 4] {
        let n = self.vals.len();
        let t = ((r - self.r0) / self.h).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let s = t - i as f64;
        let h = self.h;
        let (qa, qb) = (self.q[i], self.q[i + 1]);
        let (va, vb) = (&self.vals[i], &self.vals[i + 1]);
        let mut out = [0.0; 4];
        for off in [0usize, 2] {
            let (ya, da, yb, db) = (va[off], va[off + 1], vb[off], vb[off + 1]);
            let (aa, ab) = (qa * ya, qb * yb);
            let (y, d) = quintic_hermite(s, h, [ya, da, aa], [yb, db, ab]);
            out[off] = y;
            out[off + 1] = d;
        }
        out
    }
}

/// Quintic Hermite interpolation on [0, h] from value, first and second
/// derivative at both ends; returns value and first derivative at s*h.
fn quintic_hermite(s: f64, h: f64, a: [f64; 3], b: [f64; 3]) -> (f64, f64) {
    let (s2, s3, s4, s5) = (s * s, s * s * s, s.powi(4), s.powi(5));
    let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h20 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h21 = 0.5 * (s3 - 2.0 * s4 + s5);
    let d00 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let d10 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let d20 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
    let d01 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let d11 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let d21 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
    let y = h00 * a[0] + h10 * h * a[1] + h20 * h * h * a[2] + h01 * b[0] + h11 * h * b[1] + h21 * h * h * b[2];
    let d = (d00 * a[0] + d10 * h * a[1] + d20 * h * h * a[2] + d01 * b[0] + d11 * h * b[1] + d21 * h * h * b[2]) / h;
    (y, d)
}

fn table_step(k: f64, r_lo: f64, r_hi: f64) -> (f64, usize) {
    // k is the largest local wavenumber or growth rate over the table
    let target = 2.0 * std::f64::consts::PI / (80.0 * k.max(1.0));
    let n = ((r_hi - r_lo) / target).ceil().max(4.0) as usize;
    ((r_hi - r_lo) / n as f64, n + 1)
}

/// Coulomb pair F/sqrt(k), G/sqrt(k) tabulated on [r_lo, r_hi].
fn coulomb_table(eta: f64, l: u32, k: f64, r_lo: f64, r_hi: f64) -> Result<RadialTable> {
    let ll = (l * (l + 1)) as f64;
    let q_fn = QFn { k2: k * k, coulomb: 2.0 * eta * k, ll, quartic: 0.0 };
    let growth = q_fn.eval(r_lo).abs().max(q_fn.eval(r_hi).abs()).sqrt();
    let (h, n) = table_step(k.max(growth), r_lo, r_hi);
    let sk = k.sqrt();
    let xs: Vec<f64> = (0..n).map(|i| k * (r_lo + h * i as f64)).collect();
    let (waves, log_scale) = coulomb_continuum_many_scaled(eta, l, &xs)?;
    let vals = waves.into_iter().map(|w| [w.f / sk, w.fp * sk, w.g / sk, w.gp * sk]).collect();
    let q = (0..n).map(|i| q_fn.eval(r_lo + h * i as f64)).collect();
    Ok(RadialTable { r0: r_lo, h, vals, q, log_scale })
}

/// Neutral open channel with the charge-induced dipole tail
/// `-c4 / R^4` (mass-scaled R) integrated from far outside inward by the
/// variable-phase method, so that the pair becomes sin/cos asymptotically.
fn polarized_table(l: u32, k: f64, m: f64, c4: f64, r_lo: f64, r_hi: f64) -> Result<RadialTable> {
    let u_of = |r: f64| -2.0 * m * c4 / r.powi(4);
    let tail_phase = |r: f64| m * c4 / (3.0 * k * r.powi(3));
    let mut r_far = r_hi;
    while tail_phase(r_far) > 1e-10 {
        r_far *= 1.5;
    }
    // state: (delta, ln A) for the sine-like and cosine-like solutions
    let rhs = |r: f64, st: &[f64; 4]| -> [f64; 4] {
        let x = k * r;
        let uu = u_of(r) / k;
        let (j, _) = riccati(l, x, false);
        let (c, _) = riccati(l, x, true);
        let mut out = [0.0; 4];
        for (o, d) in [(0usize, st[0]), (2usize, st[2])] {
            let (sd, cd) = d.sin_cos();
            let p = j * cd + c * sd;
            let qv = c * cd - j * sd;
            out[o] = -uu * p * p;
            out[o + 1] = uu * p * qv;
        }
        out
    };
    let step_target = 0.1 / k.max(1e-3);
    let mut state = [0.0, 0.0, 0.5 * std::f64::consts::PI, 0.0];
    let mut r = r_far;
    let span_out = r_far - r_hi;
    if span_out > 0.0 {
        let steps = (span_out / step_target).ceil().max(1.0) as usize;
        let hh = -span_out / steps as f64;
        for _ in 0..steps {
            state = rk4(&rhs, r, &state, hh);
            r += hh;
        }
    }
    let (h, n) = table_step(k, r_lo, r_hi);
    let sub = ((h / step_target).ceil().max(1.0)) as usize;
    let mut rows = vec![[0.0; 4]; n];
    let sk = k.sqrt();
    let mut r = r_hi;
    for i in (0..n).rev() {
        let x = k * r;
        let (j, jp) = riccati(l, x, false);
        let (c, cp) = riccati(l, x, true);
        let mut row = [0.0; 4];
        for (o, d, la) in [(0usize, state[0], state[1]), (2usize, state[2], state[3])] {
            let (sd, cd) = d.sin_cos();
            let a = la.exp();
            row[o] = a * (j * cd + c * sd) / sk;
            row[o + 1] = a * k * (jp * cd + cp * sd) / sk;
        }
        rows[i] = row;
        if i > 0 {
            let hh = -h / sub as f64;
            for _ in 0..sub {
                state = rk4(&rhs, r, &state, hh);
                r += hh;
            }
            r = r_lo + h * (i - 1) as f64;
        }
    }
    let ll = (l * (l + 1)) as f64;
    let q_fn = QFn { k2: k * k, coulomb: 0.0, ll, quartic: 2.0 * m * c4 };
    let q = (0..n).map(|i| q_fn.eval(r_lo + h * i as f64)).collect();
    Ok(RadialTable { r0: r_lo, h, vals: rows, q, log_scale: 0.0 })
}

fn riccati(l: u32, x: f64, cosine: bool) -> (f64, f64) {
    let kind = if cosine { RadialFunctionKind::OpenCosine } else { RadialFunctionKind::OpenSine };
    let v = riccati_or_exponential(kind, l, 1.0, x, 0.0).expect("positive argument");
    (v.value, v.deriv)
}

fn rk4<F: Fn(f64, &[f64; 4]) -> [f64; 4]>(f: &F, r: f64, y: &[f64; 4], h: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], b: &[f64; 4], s: f64| -> [f64; 4] {
        [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]]
    };
    let k1 = f(r, y);
    let k2 = f(r + 0.5 * h, &add(y, &k1, 0.5 * h));
    let k3 = f(r + 0.5 * h, &add(y, &k2, 0.5 * h));
    let k4 = f(r + h, &add(y, &k3, h));
    let mut out = *y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

impl Radial {
    fn log_scale(&self) -> f64 {
        match self {
            Radial::Table(t) => t.log_scale,
            _ => 0.0,
        }
    }

    /// (uS, uS', uC, uC') at R.
    fn eval(&self, r: f64) -> Result<[f64; 4]> {
        match self {
            Radial::Plain { l, k } => {
                let sk = k.sqrt();
                let s = riccati_or_exponential(RadialFunctionKind::OpenSine, *l, *k, r, 0.0)?;
                let c = riccati_or_exponential(RadialFunctionKind::OpenCosine, *l, *k, r, 0.0)?;
                Ok([s.value / sk, s.deriv / sk, c.value / sk, c.deriv / sk])
            }
            Radial::Closed { kappa, eta, l, r_ref } => {
                let (d, g): (RadialValue, RadialValue) = closed_channel_pair(*kappa, *eta, *l, r, *r_ref)?;
                Ok([d.value, d.deriv, g.value, g.deriv])
            }
            Radial::Table(t) => Ok(t.eval(r)),
        }
    }
}

/// Options of the asymptotic analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingSettings {
    /// Include the (p mu) polarization tail beyond the matching radius.
    pub polarization_tail: bool,
    /// Extra Gauss-Legendre nodes beyond the primitive count, per axis.
    pub extra_nodes: usize,
}

impl Default for MatchingSettings {
    fn default() -> Self {
        MatchingSettings { polarization_tail: true, extra_nodes: 48 }
    }
}

/// Quadrature grid at the matching radius with the channel functions
/// tabulated on it; independent of the energy.
#[derive(Clone, Debug)]
pub struct MatchingGrid {
    pub rho: f64,
    pub etas: Vec<f64>,
    pub xis: Vec<f64>,
    /// Quadrature weight times volume weight, rows eta, columns xi.
    pub weights: DMatrix<f64>,
    /// Channel functions on the grid, one matrix per adiabatic channel.
    pub channel_values: Vec<DMatrix<f64>>,
}

impl MatchingGrid {
    pub fn new(sys: &SystemDefinition, basis: &SectorBasis, n_eta: usize, n_xi: usize) -> Self {
        let (etas, we) = axis_nodes(sys, Axis::Eta, n_eta);
        let (xis, wx) = axis_nodes(sys, Axis::Xi, n_xi);
        let weights = DMatrix::from_fn(n_eta, n_xi, |q, r| we[q] * wx[r] * volume_weight(etas[q], xis[r]));
        let channel_values = basis.evaluate_on_grid(sys, &etas, &xis);
        MatchingGrid { rho: basis.rho, etas, xis, weights, channel_values }
    }

    pub fn with_settings(sys: &SystemDefinition, basis: &SectorBasis, settings: &MatchingSettings) -> Self {
        let (ne, nx) = basis.primitive_sizes();
        Self::new(sys, basis, ne + settings.extra_nodes, nx + settings.extra_nodes)
    }
}

fn axis_nodes(sys: &SystemDefinition, axis: Axis, n: usize) -> (Vec<f64>, Vec<f64>) {
    let p = Primitive1D::for_axis(sys, axis, 1, 1);
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| p.centre + p.half * t).collect(),
        w.iter().map(|t| t * p.half).collect(),
    )
}

/// Sampled elementary function and its rho-derivative at fixed (eta, xi).
#[derive(Clone, Debug)]
pub struct SampledChannel {
    pub value: DMatrix<f64>,
    pub rho_deriv: DMatrix<f64>,
}

fn radial_model(
    sys: &SystemDefinition,
    ch: &ChannelSpec,
    rho: f64,
    settings: &MatchingSettings,
) -> Result<Radial> {
    let m = sys.scaling_mass;
    let (r_lo, r_hi) = (0.5 * rho, rho * (1.0 + 1e-9));
    let (zc, s) = relative_motion(sys, ch.arrangement);
    if !ch.open {
        let eta = m * zc * s / ch.wavenumber;
        return Ok(Radial::Closed { kappa: ch.wavenumber, eta, l: ch.l, r_ref: rho });
    }
    if zc != 0.0 {
        return Ok(Radial::Table(coulomb_table(ch.sommerfeld, ch.l, ch.wavenumber, r_lo, r_hi)?));
    }
    if settings.polarization_tail && ch.arrangement == Arrangement::Entrance && ch.n == 1 {
        let z = sys.charges.oxygen;
        // -alpha Z^2 / (2 R_phys^4) with R_phys = R / s
        let c4 = pmu_polarizability(sys) * z * z * s.powi(4) / 2.0;
        return Ok(Radial::Table(polarized_table(ch.l, ch.wavenumber, m, c4, r_lo, r_hi)?));
    }
    Ok(Radial::Plain { l: ch.l, k: ch.wavenumber })
}

/// Elementary function `u(R)/R * C_nl(r) * P_l(cos gamma)` (sine-like and
/// cosine-like) and its rho-derivative on the matching grid. Charged open
/// channels deep under their barrier come back scaled, see
/// [`Projections::log_scale`].
pub fn elementary_asymptotic(
    sys: &SystemDefinition,
    ch: &ChannelSpec,
    grid: &MatchingGrid,
    settings: &MatchingSettings,
) -> Result<(SampledChannel, SampledChannel)> {
    let radial = radial_model(sys, ch, grid.rho, settings)?;
    elementary_with_radial(sys, ch, grid.rho, &grid.etas, &grid.xis, &radial)
}

fn elementary_with_radial(
    sys: &SystemDefinition,
    ch: &ChannelSpec,
    rho: f64,
    etas: &[f64],
    xis: &[f64],
    radial: &Radial,
) -> Result<(SampledChannel, SampledChannel)> {
    let (zb, _, sb) = fragment(sys, ch.arrangement);
    let zeff = zb * sb;
    let m = sys.scaling_mass;
    let (ne, nx) = (etas.len(), xis.len());
    let mut s_val = DMatrix::zeros(ne, nx);
    let mut s_der = DMatrix::zeros(ne, nx);
    let mut c_val = DMatrix::zeros(ne, nx);
    let mut c_der = DMatrix::zeros(ne, nx);
    // bound factor is negligible beyond this radius
    let nf = ch.n as f64;
    let r_cut = (2.0 * nf * nf + 60.0 * nf) / (zeff * m);
    for (q, &eta) in etas.iter().enumerate() {
        for (p, &xi) in xis.iter().enumerate() {
            let chi1 = 0.5 * (xi + eta);
            let chi2 = 0.5 * (xi - eta);
            let (chi, cg) = match ch.arrangement {
                Arrangement::Entrance => (chi1, cos_gamma1(sys, chi1, chi2)),
                Arrangement::Product => (chi2, cos_gamma2(sys, chi1, chi2)),
            };
            let big_r = rho * (0.5 * chi).cos();
            let small_r = rho * (0.5 * chi).sin();
            if small_r > r_cut || big_r <= 0.0 {
                continue;
            }
            let (b, bp) = coulomb_bound_with_derivative(ch.n, ch.l, zeff, m, small_r)?;
            if b == 0.0 && bp == 0.0 {
                continue;
            }
            let ang = legendre_norm(ch.l as usize, cg);
            let u = radial.eval(big_r)?;
            for (off, val, der) in [(0usize, &mut s_val, &mut s_der), (2usize, &mut c_val, &mut c_der)] {
                let f = u[off] / big_r;
                let fp = u[off + 1] / big_r - u[off] / (big_r * big_r);
                val[(q, p)] = f * b * ang;
                der[(q, p)] = ((big_r / rho) * fp * b + (small_r / rho) * f * bp) * ang;
            }
        }
    }
    Ok((
        SampledChannel { value: s_val, rho_deriv: s_der },
        SampledChannel { value: c_val, rho_deriv: c_der },
    ))
}

/// Projection matrices of the reduced radial functions
/// `rho^(5/2) <phi_i | psi_c>` and their rho-derivatives.
#[derive(Clone, Debug)]
pub struct Projections {
    pub fs: DMatrix<f64>,
    pub fc: DMatrix<f64>,
    pub fs_prime: DMatrix<f64>,
    pub fc_prime: DMatrix<f64>,
    /// Per channel: the sine-like column is multiplied by e^L and the
    /// cosine-like one by e^-L, so K from these columns is
    /// `e^(L_i + L_j) K_ij`.
    pub log_scale: Vec<f64>,
}

pub fn projection_matrices(
    sys: &SystemDefinition,
    grid: &MatchingGrid,
    channels: &[ChannelSpec],
    settings: &MatchingSettings,
) -> Result<Projections> {
    let nb = grid.channel_values.len();
    let nc = channels.len();
    let rho = grid.rho;
    let r52 = rho.powf(2.5);
    let d52 = 2.5 * rho.powf(1.5);
    let mut out = Projections {
        fs: DMatrix::zeros(nb, nc),
        fc: DMatrix::zeros(nb, nc),
        fs_prime: DMatrix::zeros(nb, nc),
        fc_prime: DMatrix::zeros(nb, nc),
        log_scale: vec![0.0; nc],
    };
    let weighted: Vec<DMatrix<f64>> = grid.channel_values.iter().map(|v| v.component_mul(&grid.weights)).collect();
    for (c, ch) in channels.iter().enumerate() {
        let radial = radial_model(sys, ch, grid.rho, settings)?;
        out.log_scale[c] = radial.log_scale();
        let (s, cc) = elementary_with_radial(sys, ch, grid.rho, &grid.etas, &grid.xis, &radial)?;
        for (i, wv) in weighted.iter().enumerate() {
            let ps = wv.dot(&s.value);
            let pc = wv.dot(&cc.value);
            out.fs[(i, c)] = r52 * ps;
            out.fc[(i, c)] = r52 * pc;
            out.fs_prime[(i, c)] = d52 * ps + r52 * wv.dot(&s.rho_deriv);
            out.fc_prime[(i, c)] = d52 * pc + r52 * wv.dot(&cc.rho_deriv);
        }
    }
    Ok(out)
}

/// Solves `(Z F_C - F_C') K = F_S' - Z F_S`.
pub fn extract_k(z: &DMatrix<f64>, p: &Projections) -> Result<DMatrix<f64>> {
    let a = z * &p.fc - &p.fc_prime;
    let b = &p.fs_prime - z * &p.fs;
    let cond = condition_estimate(&a);
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Numerical(format!("K-matrix system singular (condition estimate {cond:.3e})")));
    }
    a.lu().solve(&b).ok_or_else(|| Error::Numerical(format!("K-matrix solve failed (condition {cond:.3e})")))
}

/// Undoes the channel scaling of [`Projections::log_scale`]. Entries between
/// channels that tunnel deeply at the matching radius underflow to zero.
pub fn unscale_k(k: &DMatrix<f64>, log_scale: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        let l = log_scale[i] + log_scale[j];
        if l == 0.0 {
            k[(i, j)]
        } else {
            k[(i, j)] * (-l).exp()
        }
    })
}

/// Eliminates closed channels: `K_oo - K_oc K_cc^-1 K_co`.
pub fn reduce_to_open(k: &DMatrix<f64>, open: &[bool]) -> Result<DMatrix<f64>> {
    let oi: Vec<usize> = (0..open.len()).filter(|&i| open[i]).collect();
    let ci: Vec<usize> = (0..open.len()).filter(|&i| !open[i]).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| k[(rows[i], cols[j])]);
    let koo = pick(&oi, &oi);
    if ci.is_empty() {
        return Ok(koo);
    }
    let koc = pick(&oi, &ci);
    let kco = pick(&ci, &oi);
    let kcc = pick(&ci, &ci);
    let x = kcc
        .lu()
        .solve(&kco)
        .ok_or_else(|| Error::Numerical("closed-channel block of K is singular".into()))?;
    Ok(koo - koc * x)
}

/// `S = (I + iK)(I - iK)^-1`.
pub fn s_from_k(k: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let n = k.nrows();
    let ik = k.map(|v| Complex64::new(0.0, v));
    let id = DMatrix::<Complex64>::identity(n, n);
    let num = &id + &ik;
    let den = &id - &ik;
    // S = num den^-1  <=>  den^T S^T = num^T
    let st = den
        .transpose()
        .lu()
        .solve(&num.transpose())
        .ok_or_else(|| Error::Numerical("I - iK singular".into()))?;
    Ok(st.transpose())
}

/// `max |S^dagger S - I|`.
pub fn unitarity_defect(s: &DMatrix<Complex64>) -> f64 {
    let n = s.nrows();
    let p = s.adjoint() * s;
    let mut m: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = if i == j { 1.0 } else { 0.0 };
            m = m.max((p[(i, j)] - Complex64::new(t, 0.0)).norm());
        }
    }
    m
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferProbabilities {
    /// (n, l) of (mu O) -> probability.
    pub partial: BTreeMap<(u32, u32), f64>,
    pub total: f64,
    pub elastic: f64,
    /// Probability into other (p mu) states.
    pub excitation: f64,
}

/// Probabilities out of the entrance channel (row sums of |S|^2).
pub fn transfer_probabilities(
    s: &DMatrix<Complex64>,
    open_channels: &[ChannelSpec],
) -> Result<TransferProbabilities> {
    let entrance = open_channels
        .iter()
        .position(|c| c.arrangement == Arrangement::Entrance && c.n == 1 && c.l == 0)
        .ok_or_else(|| Error::Domain("entrance channel is closed".into()))?;
    let mut partial = BTreeMap::new();
    let mut total = 0.0;
    let mut excitation = 0.0;
    let mut elastic = 0.0;
    for (j, c) in open_channels.iter().enumerate() {
        let p = s[(j, entrance)].norm_sqr();
        if j == entrance {
            elastic = p;
        } else if c.arrangement == Arrangement::Product {
            partial.insert((c.n, c.l), p);
            total += p;
        } else {
            excitation += p;
        }
    }
    Ok(TransferProbabilities { partial, total, elastic, excitation })
}

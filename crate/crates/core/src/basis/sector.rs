//! Channel basis of one hyper-radius sector.
//!
//! The two-dimensional problem is solved in a contracted product basis:
//! eta and xi eigenfunctions of the split operator at a reference energy
//! near the top of the channel window, truncated to the product pairs with
//! the lowest diagonal energies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::oned::{Axis, OneDimProblem, Primitive1D};
use super::separable::SeparablePair;
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;
use crate::linalg::generalized_sym_eigen;
use crate::potential::weighted_potential;

/// Sizes controlling the construction of a sector basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSettings {
    /// Number of channels kept per sector.
    pub channels: usize,
    /// Number of lowest states skipped below the channel window.
    pub skip: usize,
    /// Minimum number of Legendre primitives in eta.
    pub primitive_eta: usize,
    /// Minimum number of Legendre primitives in xi.
    pub primitive_xi: usize,
    /// Primitive count grows as `growth * sqrt(rho / a_mu)` at large rho.
    pub primitive_growth: f64,
    /// Extra xi primitives on top of the growth term.
    pub xi_margin: usize,
    /// One-dimensional eigenfunctions kept per coordinate.
    pub contracted_eta: usize,
    pub contracted_xi: usize,
    /// Product pairs kept for the final diagonalisation.
    pub product_pairs: usize,
    /// Add the second-order dilation correction inside each sector.
    pub dilation_correction: bool,
    /// Add the diagonal non-adiabatic term carried by the states outside
    /// the window.
    pub closure_correction: bool,
}

impl Default for BasisSettings {
    fn default() -> Self {
        BasisSettings {
            channels: 46,
            skip: 10,
            primitive_eta: 24,
            primitive_xi: 48,
            primitive_growth: 8.5,
            xi_margin: 24,
            contracted_eta: 32,
            contracted_xi: 32,
            product_pairs: 700,
            dilation_correction: true,
            closure_correction: true,
        }
    }
}

impl BasisSettings {
    pub fn primitive_sizes(&self, sys: &SystemDefinition, rho: f64) -> (usize, usize) {
        let grown = (self.primitive_growth * (rho / sys.muonic_bohr()).sqrt()).ceil() as usize;
        (self.primitive_eta.max(grown), self.primitive_xi.max(grown + self.xi_margin))
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Config("channel count must be positive".into()));
        }
        if self.primitive_eta < 4 || self.primitive_xi < 4 {
            return Err(Error::Config("primitive sizes must be at least 4".into()));
        }
        if self.contracted_eta == 0 || self.contracted_xi == 0 {
            return Err(Error::Config("contracted sizes must be positive".into()));
        }
        let needed = self.skip + self.channels;
        if self.product_pairs < needed || self.contracted_eta * self.contracted_xi < needed {
            return Err(Error::Config(format!(
                "product basis ({} pairs of {}x{}) cannot hold {} states",
                self.product_pairs, self.contracted_eta, self.contracted_xi, needed
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorBasis {
    pub rho: f64,
    pub half_width: f64,
    /// Reference energy of the contracted one-dimensional functions.
    pub reference_energy: f64,
    /// Ascending channel energies at `rho` (hartree).
    pub energies: DVector<f64>,
    /// Eta eigenfunctions over Legendre primitives (primitives x contracted).
    pub eta_functions: DMatrix<f64>,
    pub xi_functions: DMatrix<f64>,
    /// Retained product pairs (eta index, xi index).
    pub pairs: Vec<(u16, u16)>,
    /// Channel coefficients over the retained pairs (pairs x channels).
    pub coeffs: DMatrix<f64>,
    /// Angular kinetic part in the channel basis at `rho`.
    pub kinetic: DMatrix<f64>,
    /// Weighted potential part in the channel basis at `rho`.
    pub potential: DMatrix<f64>,
    /// Dominant separable (n_eta, n_xi) of each channel.
    pub labels: Vec<(u16, u16)>,
    /// Second-order coupling through the retained states outside the
    /// window, per unit `(rho_n / rho - 1)^2`; restores the dilation of bound
    /// states that the frozen window cannot follow.
    pub dilation: DMatrix<f64>,
    /// `sum_j P_ji P_jk / (2m)` over the states outside the window, with
    /// `P = <i|d/drho|j>`, at `rho`; scales as `rho^-2`.
    pub closure: DMatrix<f64>,
}

/// Quadrature grid of the two-dimensional problem.
struct Grid2D {
    eta: Primitive1D,
    xi: Primitive1D,
    /// weighted potential, rows eta nodes, columns xi nodes
    pot: DMatrix<f64>,
}

impl Grid2D {
    fn new(sys: &SystemDefinition, rho: f64, eta: Primitive1D, xi: Primitive1D) -> Self {
        let pot = DMatrix::from_fn(eta.nodes.len(), xi.nodes.len(), |q, r| {
            weighted_potential(sys, rho, eta.coordinate(q), xi.coordinate(r))
        });
        Grid2D { eta, xi, pot }
    }
}

pub fn build_sector_basis(
    sys: &SystemDefinition,
    rho: f64,
    half_width: f64,
    settings: &BasisSettings,
) -> Result<SectorBasis> {
    settings.validate()?;
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("hyper-radius must be positive, got {rho}")));
    }
    let (n_eta, n_xi) = settings.primitive_sizes(sys, rho);
    let pair = SeparablePair::new(sys, rho, n_eta, n_xi);
    let window_top = settings.skip + settings.channels;
    let guess = -0.5 * sys.charges.oxygen.powi(2) * sys.reduced.mu_o;
    let eps_ref = pair.level_energy(window_top, guess, 1e-6)?;

    let k_eta = settings.contracted_eta.min(n_eta);
    let k_xi = settings.contracted_xi.min(n_xi);
    let (_, ev) = pair.eta.solve(eps_ref);
    let (_, xv) = pair.xi.solve(eps_ref);
    let fe = ev.columns(0, k_eta).into_owned();
    let fx = xv.columns(0, k_xi).into_owned();

    // one-dimensional matrices in the contracted functions
    let ae = fe.transpose() * &pair.eta.stiffness * &fe;
    let be = fe.transpose() * &pair.eta.weight * &fe;
    let ax = fx.transpose() * &pair.xi.stiffness * &fx;
    let bx = fx.transpose() * &pair.xi.weight * &fx;
    let kin = pair.eta.kinetic;

    let grid = Grid2D::new(sys, rho, pair.eta.prim.clone(), pair.xi.prim.clone());
    let ge = grid.eta.weighted_values(&fe); // Q_eta x k_eta
    let gx = grid.xi.weighted_values(&fx); // Q_xi x k_xi

    // diagonal of the potential for pair selection
    let ge2 = ge.map(|v| v * v);
    let gx2 = gx.map(|v| v * v);
    let udiag = ge2.transpose() * &grid.pot * &gx2; // k_eta x k_xi
    let mut ranked: Vec<(f64, u16, u16)> = Vec::with_capacity(k_eta * k_xi);
    for k in 0..k_eta {
        for l in 0..k_xi {
            let h = kin * (ae[(k, k)] + ax[(l, l)]) + udiag[(k, l)];
            let s = be[(k, k)] + bx[(l, l)];
            ranked.push((h / s, k as u16, l as u16));
        }
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    let npair = settings.product_pairs.min(ranked.len());
    if npair < window_top {
        return Err(Error::Config(format!(
            "only {npair} product pairs available for {window_top} states"
        )));
    }
    let mut pairs: Vec<(u16, u16)> = ranked[..npair].iter().map(|r| (r.1, r.2)).collect();
    pairs.sort();

    // T[(k, k'), r] = sum_q ge[q,k] ge[q,k'] pot[q,r]
    let qe = ge.nrows();
    let mut prod = DMatrix::zeros(k_eta * k_eta, qe);
    for k in 0..k_eta {
        for kp in 0..k_eta {
            for q in 0..qe {
                prod[(k * k_eta + kp, q)] = ge[(q, k)] * ge[(q, kp)];
            }
        }
    }
    let t = prod * &grid.pot; // (k_eta^2) x Q_xi
    let qx = gx.nrows();
    let mut hk = DMatrix::zeros(npair, npair);
    let mut hu = DMatrix::zeros(npair, npair);
    let mut s = DMatrix::zeros(npair, npair);
    for (i, &(k, l)) in pairs.iter().enumerate() {
        let (k, l) = (k as usize, l as usize);
        for (j, &(kp, lp)) in pairs.iter().enumerate().skip(i) {
            let (kp, lp) = (kp as usize, lp as usize);
            let row = k * k_eta + kp;
            let mut u = 0.0;
            for r in 0..qx {
                u += t[(row, r)] * gx[(r, l)] * gx[(r, lp)];
            }
            let mut kk = 0.0;
            let mut ss = 0.0;
            if l == lp {
                kk += ae[(k, kp)];
                ss += be[(k, kp)];
            }
            if k == kp {
                kk += ax[(l, lp)];
                ss += bx[(l, lp)];
            }
            hk[(i, j)] = kin * kk;
            hk[(j, i)] = kin * kk;
            hu[(i, j)] = u;
            hu[(j, i)] = u;
            s[(i, j)] = ss;
            s[(j, i)] = ss;
        }
    }
    let h = &hk + &hu;
    let (vals, vecs) = generalized_sym_eigen(&h, &s)?;
    let lo = settings.skip;
    let nch = settings.channels;
    let mut coeffs = vecs.columns(lo, nch).into_owned();
    let energies = vals.rows(lo, nch).into_owned();
    // sign convention: largest coefficient positive
    for mut col in coeffs.column_iter_mut() {
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    let kinetic = coeffs.transpose() * &hk * &coeffs;
    let potential = coeffs.transpose() * &hu * &coeffs;
    let (mut dilation, mut closure) = out_of_window_terms(&hk, &hu, &vecs, &vals, lo, nch, rho, half_width);
    if !settings.dilation_correction {
        dilation.fill(0.0);
    }
    if settings.closure_correction {
        closure /= 2.0 * sys.scaling_mass;
    } else {
        closure.fill(0.0);
    }
    let labels = separable_labels(&pair, &fe, &fx, &pairs, &coeffs, &energies);
    Ok(SectorBasis {
        rho,
        half_width,
        reference_energy: eps_ref,
        energies,
        eta_functions: fe,
        xi_functions: fx,
        pairs,
        coeffs,
        kinetic: symmetrize(kinetic),
        potential: symmetrize(potential),
        labels,
        dilation,
        closure,
    })
}

/// `D_ik = 1/2 sum_j W'_ij W'_jk (1/(e_j - e_i) + 1/(e_j - e_k))` over the
/// eigenvectors `j` outside the window, with `W' = 2K + P` the derivative
/// with respect to the scale `s = rho_n / rho`. For a state that only
/// dilates, `s^2 K + s P` has a bump `K_ii (s - 1)^2` that this cancels
/// exactly. Terms whose first-order mixing across the sector would exceed
/// one half are dropped. Also returns `sum_j P_ji P_jk` over the same terms,
/// with `P_ij = -W'_ij / (rho (e_j - e_i))`.
#[allow(clippy::too_many_arguments)]
fn out_of_window_terms(
    hk: &DMatrix<f64>,
    hu: &DMatrix<f64>,
    vecs: &DMatrix<f64>,
    vals: &DVector<f64>,
    lo: usize,
    nch: usize,
    rho: f64,
    half_width: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let outside: Vec<usize> = (0..vals.len()).filter(|&j| j < lo || j >= lo + nch).collect();
    let mut d = DMatrix::zeros(nch, nch);
    let mut q = DMatrix::zeros(nch, nch);
    if outside.is_empty() {
        return (d, q);
    }
    let win = vecs.columns(lo, nch);
    let out = DMatrix::from_fn(vecs.nrows(), outside.len(), |r, c| vecs[(r, outside[c])]);
    let deriv = win.transpose() * (hk * 2.0 + hu) * &out; // nch x n_out
    let reach = (half_width / (rho - half_width).max(1e-300)).max(1e-3);
    for (c, &j) in outside.iter().enumerate() {
        for i in 0..nch {
            let gi = vals[j] - vals[lo + i];
            if (deriv[(i, c)] * reach).abs() > 0.5 * gi.abs() {
                continue;
            }
            for k in 0..nch {
                let gk = vals[j] - vals[lo + k];
                if (deriv[(k, c)] * reach).abs() > 0.5 * gk.abs() {
                    continue;
                }
                d[(i, k)] += 0.5 * deriv[(i, c)] * deriv[(k, c)] * (1.0 / gi + 1.0 / gk);
                q[(i, k)] += deriv[(i, c)] * deriv[(k, c)] / (gi * gk * rho * rho);
            }
        }
    }
    (symmetrize(d), symmetrize(q))
}

/// Dominant separable product `(n_eta, n_xi)` of each channel, from weighted
/// overlaps with eta and xi eigenfunctions at the channel's own energy.
fn separable_labels(
    pair: &SeparablePair,
    fe: &DMatrix<f64>,
    fx: &DMatrix<f64>,
    pairs: &[(u16, u16)],
    coeffs: &DMatrix<f64>,
    energies: &DVector<f64>,
) -> Vec<(u16, u16)> {
    let n_lab = 16;
    let mut out = Vec::with_capacity(energies.len());
    let mut cache: Option<(f64, [DMatrix<f64>; 4], DVector<f64>)> = None;
    for (c, &e) in energies.iter().enumerate() {
        let reuse = matches!(&cache, Some((e0, _, _)) if (e - e0).abs() <= 0.02 * e0.abs().max(1.0));
        if !reuse {
            let (_, ev) = pair.eta.solve(e);
            let (_, xv) = pair.xi.solve(e);
            let ke = n_lab.min(ev.ncols());
            let kx = n_lab.min(xv.ncols());
            let ev = ev.columns(0, ke).into_owned();
            let xv = xv.columns(0, kx).into_owned();
            let bev = &pair.eta.weight * &ev;
            let bxv = &pair.xi.weight * &xv;
            let norms = DVector::from_fn(ke * kx, |i, _| {
                let (k, l) = (i / kx, i % kx);
                (ev.column(k).dot(&bev.column(k)) + xv.column(l).dot(&bxv.column(l))).sqrt()
            });
            cache = Some((
                e,
                [fe.transpose() * &ev, fe.transpose() * &bev, fx.transpose() * &xv, fx.transpose() * &bxv],
                norms,
            ));
        }
        let (_, [e0, e1, x0, x1], norms) = cache.as_ref().expect("filled");
        let (ke, kx) = (e0.ncols(), x0.ncols());
        let mut best = (0.0, (0u16, 0u16));
        for k in 0..ke {
            for l in 0..kx {
                let mut ov = 0.0;
                for (p, &(kp, lp)) in pairs.iter().enumerate() {
                    let (kp, lp) = (kp as usize, lp as usize);
                    ov += coeffs[(p, c)] * (e1[(kp, k)] * x0[(lp, l)] + e0[(kp, k)] * x1[(lp, l)]);
                }
                let ov = (ov / norms[k * kx + l]).abs();
                if ov > best.0 {
                    best = (ov, (k as u16, l as u16));
                }
            }
        }
        out.push(best.1);
    }
    out
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&a + a.transpose())
}

impl SectorBasis {
    pub fn channels(&self) -> usize {
        self.energies.len()
    }

    /// Channel Hamiltonian (hartree) at hyper-radius `rho` in this sector's
    /// basis, including the `15 / (8 m rho^2)` term from the rho^(-5/2)
    /// reduction. The propagated equation is `F'' = 2m (W - E) F`.
    pub fn coupling_matrix(&self, sys: &SystemDefinition, rho: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.channels(), self.channels());
        self.coupling_matrix_into(sys, rho, &mut out);
        out
    }

    pub fn coupling_matrix_into(&self, sys: &SystemDefinition, rho: f64, out: &mut DMatrix<f64>) {
        let ratio = self.rho / rho;
        let reduction = 15.0 / (8.0 * sys.scaling_mass * rho * rho);
        out.copy_from(&self.kinetic);
        *out *= ratio * ratio;
        *out += &self.potential * ratio;
        for i in 0..out.nrows() {
            out[(i, i)] += reduction;
        }
        let d = ratio - 1.0;
        *out -= &self.dilation * (d * d);
        *out += &self.closure * (ratio * ratio);
    }

    /// Primitive sizes (eta, xi).
    pub fn primitive_sizes(&self) -> (usize, usize) {
        (self.eta_functions.nrows(), self.xi_functions.nrows())
    }

    /// Channel functions at a set of points given as eta and xi node lists;
    /// returns one matrix per channel (rows eta points, columns xi points).
    pub fn evaluate_on_grid(&self, sys: &SystemDefinition, etas: &[f64], xis: &[f64]) -> Vec<DMatrix<f64>> {
        let (n_eta, n_xi) = self.primitive_sizes();
        let pe = Primitive1D::for_axis(sys, Axis::Eta, n_eta, 1);
        let px = Primitive1D::for_axis(sys, Axis::Xi, n_xi, 1);
        let fe = tabulate(&pe, &self.eta_functions, etas);
        let fx = tabulate(&px, &self.xi_functions, xis);
        (0..self.channels())
            .map(|c| {
                let mut m = DMatrix::zeros(etas.len(), xis.len());
                for (p, &(k, l)) in self.pairs.iter().enumerate() {
                    let w = self.coeffs[(p, c)];
                    if w == 0.0 {
                        continue;
                    }
                    m.ger(w, &fe.column(k as usize), &fx.column(l as usize), 1.0);
                }
                m
            })
            .collect()
    }
}

/// Values of one-dimensional eigenfunctions (columns of `funcs`) at points.
fn tabulate(prim: &Primitive1D, funcs: &DMatrix<f64>, points: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(points.len(), funcs.ncols());
    for c in 0..funcs.ncols() {
        let col: Vec<f64> = funcs.column(c).iter().copied().collect();
        for (i, &u) in points.iter().enumerate() {
            out[(i, c)] = prim.evaluate(&col, u).0;
        }
    }
    out
}

/// Primitive weight matrices `int a p_i p_j` (eta) or `int b p_i p_j` (xi).
fn primitive_weight(sys: &SystemDefinition, axis: Axis, size: usize) -> DMatrix<f64> {
    // rho does not enter the weight matrix
    OneDimProblem::new(sys, axis, 1.0, size).weight
}

fn padded_product(a: &DMatrix<f64>, m: Option<&DMatrix<f64>>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows().max(b.nrows());
    let mut pa = DMatrix::zeros(n, a.ncols());
    pa.rows_mut(0, a.nrows()).copy_from(a);
    let mut pb = DMatrix::zeros(n, b.ncols());
    pb.rows_mut(0, b.nrows()).copy_from(b);
    match m {
        Some(m) => pa.transpose() * m * pb,
        None => pa.transpose() * pb,
    }
}

/// Weighted overlaps `<phi_i(a) | phi_j(b)>` between two sector bases.
pub fn sector_overlap(sys: &SystemDefinition, a: &SectorBasis, b: &SectorBasis) -> DMatrix<f64> {
    let ne = a.eta_functions.nrows().max(b.eta_functions.nrows());
    let nx = a.xi_functions.nrows().max(b.xi_functions.nrows());
    let we = primitive_weight(sys, Axis::Eta, ne);
    let wx = primitive_weight(sys, Axis::Xi, nx);
    let e0 = padded_product(&a.eta_functions, None, &b.eta_functions);
    let e1 = padded_product(&a.eta_functions, Some(&we), &b.eta_functions);
    let x0 = padded_product(&a.xi_functions, None, &b.xi_functions);
    let x1 = padded_product(&a.xi_functions, Some(&wx), &b.xi_functions);
    let mut m = DMatrix::zeros(a.pairs.len(), b.pairs.len());
    for (i, &(k, l)) in a.pairs.iter().enumerate() {
        let (k, l) = (k as usize, l as usize);
        for (j, &(kp, lp)) in b.pairs.iter().enumerate() {
            let (kp, lp) = (kp as usize, lp as usize);
            m[(i, j)] = e1[(k, kp)] * x0[(l, lp)] + e0[(k, kp)] * x1[(l, lp)];
        }
    }
    a.coeffs.transpose() * m * &b.coeffs
}

//! Three-body Coulomb potential in elliptic coordinates, its weighted
//! (regularised) form, the separable split, and long-range entrance-channel
//! formulas.

use crate::error::{Error, Result};
use crate::kinematics::{cos_gamma1, EllipticPoint, SystemDefinition};

/// Physical interparticle distances in bohr.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distances {
    pub p_mu: f64,
    pub mu_o: f64,
    pub p_o: f64,
}

/// Half of `1 - cos(chi)` for the p-O pair, from the two polar angles.
fn po_half_versine(sys: &SystemDefinition, chi1: f64, chi2: f64) -> f64 {
    let a = sys.po_pole;
    let s1 = chi1.sin();
    let in_plane = if s1.abs() < 1e-300 {
        0.0
    } else {
        s1 * cos_gamma1(sys, chi1, chi2)
    };
    let cos3 = a.cos() * chi1.cos() + a.sin() * in_plane;
    (0.5 * (1.0 - cos3)).max(0.0)
}

pub fn interparticle_distances(sys: &SystemDefinition, point: &EllipticPoint) -> Distances {
    let (chi1, chi2) = (point.chi1(), point.chi2());
    let rho = point.rho;
    Distances {
        p_mu: rho * (0.5 * chi1).sin().abs() / sys.scale_p_mu(),
        mu_o: rho * (0.5 * chi2).sin().abs() / sys.scale_mu_o(),
        p_o: rho * po_half_versine(sys, chi1, chi2).sqrt() / sys.scale_p_o(),
    }
}

/// Plain Coulomb potential, hartree.
pub fn coulomb_potential(sys: &SystemDefinition, point: &EllipticPoint) -> Result<f64> {
    let d = interparticle_distances(sys, point);
    if d.p_mu == 0.0 || d.mu_o == 0.0 || d.p_o == 0.0 {
        return Err(Error::Domain(format!(
            "coalescence at rho = {}, eta = {}, xi = {}",
            point.rho, point.eta, point.xi
        )));
    }
    let z = sys.charges;
    Ok(z.proton * z.muon / d.p_mu + z.muon * z.oxygen / d.mu_o + z.proton * z.oxygen / d.p_o)
}

/// `(cos eta - cos xi) * V` at hyper-radius `rho`, evaluated without forming
/// the attractive 1/d singularities. It scales exactly as 1/rho.
pub fn weighted_potential(sys: &SystemDefinition, rho: f64, eta: f64, xi: f64) -> f64 {
    let chi1 = 0.5 * (xi + eta);
    let chi2 = 0.5 * (xi - eta);
    let z = sys.charges;
    let weight = (eta.cos() - xi.cos()).max(0.0);
    // weight = 2 sin(chi1) sin(chi2); sin(chi)/sin(chi/2) = 2 cos(chi/2)
    let t1 = 4.0 * (0.5 * chi1).cos() * chi2.sin() * sys.scale_p_mu();
    let t2 = 4.0 * (0.5 * chi2).cos() * chi1.sin() * sys.scale_mu_o();
    let d_po = rho * po_half_versine(sys, chi1, chi2).sqrt() / sys.scale_p_o();
    z.proton * z.muon * t1 / rho + z.muon * z.oxygen * t2 / rho
        + z.proton * z.oxygen * weight / d_po.max(1e-30)
}

/// `W = (cos eta - cos xi)(V - eps)`.
pub fn renormalized_potential(sys: &SystemDefinition, rho: f64, eta: f64, xi: f64, eps: f64) -> f64 {
    weighted_potential(sys, rho, eta, xi) - eps * (eta.cos() - xi.cos()).max(0.0)
}

/// Split of W into an eta part, a xi part and a nonseparable residual. The
/// eta part is W on the `xi = 2 theta` edge, the xi part is W on the
/// `eta = -2 theta` edge minus its corner value.
#[derive(Clone, Copy, Debug)]
pub struct SeparableSplit<'a> {
    sys: &'a SystemDefinition,
    pub rho: f64,
    pub eps: f64,
    eta_lo: f64,
    xi_lo: f64,
    corner: f64,
}

pub fn separable_split(sys: &SystemDefinition, rho: f64, eps: f64) -> SeparableSplit<'_> {
    let eta_lo = -2.0 * sys.theta;
    let xi_lo = 2.0 * sys.theta;
    let corner = renormalized_potential(sys, rho, eta_lo, xi_lo, eps);
    SeparableSplit { sys, rho, eps, eta_lo, xi_lo, corner }
}

impl SeparableSplit<'_> {
    pub fn full(&self, eta: f64, xi: f64) -> f64 {
        renormalized_potential(self.sys, self.rho, eta, xi, self.eps)
    }

    pub fn eta_part(&self, eta: f64) -> f64 {
        self.full(eta, self.xi_lo)
    }

    pub fn xi_part(&self, xi: f64) -> f64 {
        self.full(self.eta_lo, xi) - self.corner
    }

    pub fn residual(&self, eta: f64, xi: f64) -> f64 {
        self.full(eta, xi) - self.full(eta, self.xi_lo) - self.full(self.eta_lo, xi) + self.corner
    }
}

/// Dipole polarizability of the (p mu) 1s atom, atomic units.
pub fn pmu_polarizability(sys: &SystemDefinition) -> f64 {
    4.5 / sys.reduced.p_mu.powi(3)
}

/// Charge-induced dipole potential between (p mu)1s and a point charge `z`
/// at physical distance `r` (bohr).
pub fn polarization_tail(sys: &SystemDefinition, r: f64, z: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {r}")));
    }
    Ok(-pmu_polarizability(sys) * z * z / (2.0 * r.powi(4)))
}

/// Distance (bohr) at which the polarization potential equals `-depth`
/// (`depth > 0`, hartree).
pub fn polarization_range(sys: &SystemDefinition, z: f64, depth: f64) -> Result<f64> {
    if !(depth > 0.0) {
        return Err(Error::Domain(format!("depth must be positive, got {depth}")));
    }
    Ok((pmu_polarizability(sys) * z * z / (2.0 * depth)).powf(0.25))
}

/// Height of the centrifugal barrier on top of the polarization tail for
/// partial wave `j` (hartree), `(J(J+1)/(m Z))^2 / (8 alpha)`.
pub fn centrifugal_barrier_height(sys: &SystemDefinition, j: u32, z: f64) -> f64 {
    let jj = (j * (j + 1)) as f64;
    (jj / (sys.reduced.o_pmu * z)).powi(2) / (8.0 * pmu_polarizability(sys))
}

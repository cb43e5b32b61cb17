//! Mass-scaled Jacobi coordinates, Delves hyperspherical angles and
//! hyperspherical elliptic coordinates for the three-body system O, p, mu.
//!
//! Arrangement 1 groups (p mu) with O as the spectator, arrangement 2 groups
//! (mu O) with p as the spectator. The Jacobi vectors are
//!
//! * `r1 ~ x_mu - x_p`, `R1 ~ x_O - X(p mu)`
//! * `r2 ~ x_O - x_mu`, `R2 ~ x_p - X(mu O)`
//!
//! each multiplied by the square root of its reduced mass over the scaling
//! mass, so that `R2 = -cos(t) R1 - sin(t) r1` and `r2 = sin(t) R1 - cos(t) r1`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Masses {
    pub oxygen: f64,
    pub proton: f64,
    pub muon: f64,
}

impl Default for Masses {
    fn default() -> Self {
        Masses {
            oxygen: units::OXYGEN_MASS,
            proton: units::PROTON_MASS,
            muon: units::MUON_MASS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Charges {
    pub oxygen: f64,
    pub proton: f64,
    pub muon: f64,
}

impl Default for Charges {
    fn default() -> Self {
        Charges { oxygen: 8.0, proton: 1.0, muon: -1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedMasses {
    /// (p, mu) pair.
    pub p_mu: f64,
    /// (mu, O) pair.
    pub mu_o: f64,
    /// (p, O) pair.
    pub p_o: f64,
    /// O relative to the (p mu) centre of mass.
    pub o_pmu: f64,
    /// p relative to the (mu O) centre of mass.
    pub p_muo: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arrangement {
    /// O + (p mu)
    Entrance,
    /// p + (mu O)
    Product,
}

impl Arrangement {
    pub fn index(self) -> u8 {
        match self {
            Arrangement::Entrance => 1,
            Arrangement::Product => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDefinition {
    pub masses: Masses,
    pub charges: Charges,
    /// Common scaling mass of the mass-scaled coordinates.
    pub scaling_mass: f64,
    /// Kinematic rotation angle between the two Jacobi sets (radians).
    pub theta: f64,
    pub reduced: ReducedMasses,
    /// Polar angle of the p-O coalescence point on the collinear great circle
    /// of the shape sphere, measured like `chi1`.
    pub po_pole: f64,
}

/// Builds the derived kinematic constants from three masses.
pub fn derive_kinematics(masses: Masses) -> Result<SystemDefinition> {
    SystemDefinition::new(masses, Charges::default())
}

impl SystemDefinition {
    pub fn new(masses: Masses, charges: Charges) -> Result<Self> {
        let Masses { oxygen: mo, proton: mp, muon: mm } = masses;
        for (name, v) in [("oxygen", mo), ("proton", mp), ("muon", mm)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} mass must be positive, got {v}")));
            }
        }
        let total = mo + mp + mm;
        let scaling_mass = (mo * mp * mm / total).sqrt();
        let theta = (mm / scaling_mass).atan();
        let reduced = ReducedMasses {
            p_mu: mp * mm / (mp + mm),
            mu_o: mm * mo / (mm + mo),
            p_o: mp * mo / (mp + mo),
            o_pmu: mo * (mp + mm) / total,
            p_muo: mp * (mm + mo) / total,
        };
        let po_pole = -2.0 * (mp / scaling_mass).atan();
        Ok(SystemDefinition { masses, charges, scaling_mass, theta, reduced, po_pole })
    }

    pub fn muonic_oxygen() -> Self {
        Self::new(Masses::default(), Charges::default()).expect("default masses are valid")
    }

    /// Muonic Bohr radius in bohr.
    pub fn muonic_bohr(&self) -> f64 {
        units::muonic_bohr(self.masses.muon)
    }

    /// sqrt(mu_pair / m): multiplies a physical pair distance to get the
    /// mass-scaled one.
    pub fn scale_p_mu(&self) -> f64 {
        (self.reduced.p_mu / self.scaling_mass).sqrt()
    }
    pub fn scale_mu_o(&self) -> f64 {
        (self.reduced.mu_o / self.scaling_mass).sqrt()
    }
    pub fn scale_p_o(&self) -> f64 {
        (self.reduced.p_o / self.scaling_mass).sqrt()
    }
    pub fn scale_o_pmu(&self) -> f64 {
        (self.reduced.o_pmu / self.scaling_mass).sqrt()
    }
    pub fn scale_p_muo(&self) -> f64 {
        (self.reduced.p_muo / self.scaling_mass).sqrt()
    }

    pub fn eta_range(&self) -> (f64, f64) {
        (-2.0 * self.theta, 2.0 * self.theta)
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (2.0 * self.theta, 2.0 * PI - 2.0 * self.theta)
    }

    /// Rotation of the shape-sphere unit vector from arrangement 1 to 2.
    pub fn shape_rotation(&self) -> Matrix3<f64> {
        let (s, c) = (2.0 * self.theta).sin_cos();
        Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiPair {
    pub arrangement: Arrangement,
    pub big_r: f64,
    pub small_r: f64,
    /// Angle between the two Jacobi vectors, in [0, pi].
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelvesPoint {
    pub rho: f64,
    /// In [0, pi].
    pub chi: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticPoint {
    pub rho: f64,
    pub eta: f64,
    pub xi: f64,
}

const RANGE_SLACK: f64 = 1e-12;

impl EllipticPoint {
    pub fn new(sys: &SystemDefinition, rho: f64, eta: f64, xi: f64) -> Result<Self> {
        let (e0, e1) = sys.eta_range();
        let (x0, x1) = sys.xi_range();
        if !(rho >= 0.0) {
            return Err(Error::Domain(format!("hyper-radius must be nonnegative, got {rho}")));
        }
        if eta < e0 - RANGE_SLACK || eta > e1 + RANGE_SLACK {
            return Err(Error::Domain(format!("eta = {eta} outside [{e0}, {e1}]")));
        }
        if xi < x0 - RANGE_SLACK || xi > x1 + RANGE_SLACK {
            return Err(Error::Domain(format!("xi = {xi} outside [{x0}, {x1}]")));
        }
        Ok(EllipticPoint { rho, eta: eta.clamp(e0, e1), xi: xi.clamp(x0, x1) })
    }

    pub fn chi1(&self) -> f64 {
        0.5 * (self.xi + self.eta)
    }

    pub fn chi2(&self) -> f64 {
        0.5 * (self.xi - self.eta)
    }
}

/// Angular weight of the volume element, `cos(eta) - cos(xi)`.
pub fn volume_weight(eta: f64, xi: f64) -> f64 {
    (eta.cos() - xi.cos()).max(0.0)
}

/// Applies the kinematic rotation to arrangement-1 vectors.
pub fn jacobi_rotation(
    sys: &SystemDefinition,
    big_r1: &Vector3<f64>,
    small_r1: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = sys.theta.sin_cos();
    (-c * big_r1 - s * small_r1, s * big_r1 - c * small_r1)
}

/// Inverse of [`jacobi_rotation`].
pub fn jacobi_rotation_inverse(
    sys: &SystemDefinition,
    big_r2: &Vector3<f64>,
    small_r2: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = sys.theta.sin_cos();
    (-c * big_r2 + s * small_r2, -s * big_r2 - c * small_r2)
}

/// Raw particle positions (O, p, mu) to the Jacobi vectors of one arrangement.
pub fn jacobi_vectors(
    sys: &SystemDefinition,
    x_o: &Vector3<f64>,
    x_p: &Vector3<f64>,
    x_mu: &Vector3<f64>,
    arrangement: Arrangement,
) -> (Vector3<f64>, Vector3<f64>) {
    let Masses { oxygen: mo, proton: mp, muon: mm } = sys.masses;
    match arrangement {
        Arrangement::Entrance => {
            let cm = (mp * x_p + mm * x_mu) / (mp + mm);
            (sys.scale_o_pmu() * (x_o - cm), sys.scale_p_mu() * (x_mu - x_p))
        }
        Arrangement::Product => {
            let cm = (mo * x_o + mm * x_mu) / (mo + mm);
            (sys.scale_p_muo() * (x_p - cm), sys.scale_mu_o() * (x_o - x_mu))
        }
    }
}

/// Arrangement-1 Jacobi vectors back to raw positions with the centre of mass
/// at the origin. Returns (x_O, x_p, x_mu).
pub fn positions_from_jacobi(
    sys: &SystemDefinition,
    big_r1: &Vector3<f64>,
    small_r1: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let Masses { oxygen: mo, proton: mp, muon: mm } = sys.masses;
    let total = mo + mp + mm;
    let sep = small_r1 / sys.scale_p_mu();
    let d = big_r1 / sys.scale_o_pmu();
    let cm_pmu = -mo / total * d;
    let x_o = cm_pmu + d;
    let x_p = cm_pmu - mm / (mp + mm) * sep;
    let x_mu = cm_pmu + mp / (mp + mm) * sep;
    (x_o, x_p, x_mu)
}

pub fn jacobi_pair(
    arrangement: Arrangement,
    big_r: &Vector3<f64>,
    small_r: &Vector3<f64>,
) -> JacobiPair {
    let (a, b) = (big_r.norm(), small_r.norm());
    let gamma = if a == 0.0 || b == 0.0 {
        0.0
    } else {
        big_r.cross(small_r).norm().atan2(big_r.dot(small_r))
    };
    JacobiPair { arrangement, big_r: a, small_r: b, gamma }
}

pub fn delves_from_jacobi(pair: &JacobiPair) -> Result<DelvesPoint> {
    if !(pair.big_r >= 0.0 && pair.small_r >= 0.0) {
        return Err(Error::Domain("Jacobi lengths must be nonnegative".into()));
    }
    let rho = pair.big_r.hypot(pair.small_r);
    if rho == 0.0 {
        return Err(Error::Domain("hyperspherical angles undefined at the origin".into()));
    }
    let chi = 2.0 * pair.small_r.atan2(pair.big_r);
    Ok(DelvesPoint { rho, chi, gamma: pair.gamma })
}

fn shape_vector(chi: f64, gamma: f64) -> Vector3<f64> {
    let (s, c) = chi.sin_cos();
    Vector3::new(c, s * gamma.cos(), s * gamma.sin())
}

fn shape_angles(n: &Vector3<f64>) -> (f64, f64) {
    let t = n[1].hypot(n[2]);
    let chi = t.atan2(n[0]);
    let gamma = if t == 0.0 { 0.0 } else { n[2].abs().atan2(n[1]) };
    (chi, gamma)
}

/// Delves angles of arrangement 1 to those of arrangement 2.
pub fn delves_arrangement_map(sys: &SystemDefinition, chi1: f64, gamma1: f64) -> (f64, f64) {
    shape_angles(&(sys.shape_rotation() * shape_vector(chi1, gamma1)))
}

/// Delves angles of arrangement 2 to those of arrangement 1.
pub fn delves_arrangement_map_inverse(
    sys: &SystemDefinition,
    chi2: f64,
    gamma2: f64,
) -> (f64, f64) {
    shape_angles(&(sys.shape_rotation().transpose() * shape_vector(chi2, gamma2)))
}

pub fn elliptic_from_delves(sys: &SystemDefinition, chi1: f64, chi2: f64) -> Result<(f64, f64)> {
    let (eta, xi) = (chi1 - chi2, chi1 + chi2);
    let (e0, e1) = sys.eta_range();
    let (x0, x1) = sys.xi_range();
    let slack = 1e-10;
    if eta < e0 - slack || eta > e1 + slack || xi < x0 - slack || xi > x1 + slack {
        return Err(Error::Domain(format!(
            "(chi1, chi2) = ({chi1}, {chi2}) is not a consistent configuration"
        )));
    }
    Ok((eta.clamp(e0, e1), xi.clamp(x0, x1)))
}

pub fn delves_from_elliptic(eta: f64, xi: f64) -> (f64, f64) {
    (0.5 * (xi + eta), 0.5 * (xi - eta))
}

/// `cos(gamma1)` from the two polar angles.
pub fn cos_gamma1(sys: &SystemDefinition, chi1: f64, chi2: f64) -> f64 {
    let (s2t, c2t) = (2.0 * sys.theta).sin_cos();
    let s1 = chi1.sin();
    if s1.abs() < 1e-300 {
        return 1.0;
    }
    ((chi2.cos() - c2t * chi1.cos()) / (s2t * s1)).clamp(-1.0, 1.0)
}

/// `cos(gamma2)` from the two polar angles.
pub fn cos_gamma2(sys: &SystemDefinition, chi1: f64, chi2: f64) -> f64 {
    let (s2t, c2t) = (2.0 * sys.theta).sin_cos();
    let s2 = chi2.sin();
    if s2.abs() < 1e-300 {
        return 1.0;
    }
    ((c2t * chi2.cos() - chi1.cos()) / (s2t * s2)).clamp(-1.0, 1.0)
}

pub fn jacobi_from_elliptic(
    sys: &SystemDefinition,
    point: &EllipticPoint,
    arrangement: Arrangement,
) -> JacobiPair {
    let (chi1, chi2) = delves_from_elliptic(point.eta, point.xi);
    let (chi, cg) = match arrangement {
        Arrangement::Entrance => (chi1, cos_gamma1(sys, chi1, chi2)),
        Arrangement::Product => (chi2, cos_gamma2(sys, chi1, chi2)),
    };
    let half = 0.5 * chi;
    JacobiPair {
        arrangement,
        big_r: point.rho * half.cos(),
        small_r: point.rho * half.sin(),
        gamma: cg.acos(),
    }
}

/// Planar arrangement-1 vectors realising a Delves point.
pub fn jacobi_vectors_from_delves(point: &DelvesPoint) -> (Vector3<f64>, Vector3<f64>) {
    let (s, c) = (0.5 * point.chi).sin_cos();
    let big = Vector3::new(point.rho * c, 0.0, 0.0);
    let small = point.rho * s * Vector3::new(point.gamma.cos(), point.gamma.sin(), 0.0);
    (big, small)
}

pub fn elliptic_from_positions(
    sys: &SystemDefinition,
    x_o: &Vector3<f64>,
    x_p: &Vector3<f64>,
    x_mu: &Vector3<f64>,
) -> Result<EllipticPoint> {
    let (b1, s1) = jacobi_vectors(sys, x_o, x_p, x_mu, Arrangement::Entrance);
    let d1 = delves_from_jacobi(&jacobi_pair(Arrangement::Entrance, &b1, &s1))?;
    let (chi2, _) = delves_arrangement_map(sys, d1.chi, d1.gamma);
    let (eta, xi) = elliptic_from_delves(sys, d1.chi, chi2)?;
    EllipticPoint::new(sys, d1.rho, eta, xi)
}

pub fn positions_from_elliptic(
    sys: &SystemDefinition,
    point: &EllipticPoint,
) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let pair = jacobi_from_elliptic(sys, point, Arrangement::Entrance);
    let chi = 2.0 * pair.small_r.atan2(pair.big_r);
    let d = DelvesPoint { rho: point.rho, chi, gamma: pair.gamma };
    let (b, s) = jacobi_vectors_from_delves(&d);
    positions_from_jacobi(sys, &b, &s)
}

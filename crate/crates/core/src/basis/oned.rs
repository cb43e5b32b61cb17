//! One-dimensional Galerkin problems in eta and xi on normalised Legendre
//! polynomials.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::kinematics::SystemDefinition;
use crate::linalg::{sym_eigen, sym_eigenvalues};
use crate::potential::weighted_potential;
use crate::specfun::{gauss_legendre, legendre_norm_table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Eta,
    Xi,
}

/// Legendre primitives `P_a(x) / sqrt(half)` on `u = centre + half * x`,
/// tabulated at Gauss-Legendre nodes.
#[derive(Clone, Debug)]
pub struct Primitive1D {
    pub size: usize,
    pub centre: f64,
    pub half: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// rows: nodes, columns: polynomial degree
    pub values: DMatrix<f64>,
    pub derivs: DMatrix<f64>,
}

impl Primitive1D {
    pub fn new(size: usize, quad: usize, centre: f64, half: f64) -> Self {
        let (nodes, weights) = gauss_legendre(quad);
        let mut values = DMatrix::zeros(quad, size);
        let mut derivs = DMatrix::zeros(quad, size);
        let mut v = vec![0.0; size];
        let mut d = vec![0.0; size];
        for (q, &x) in nodes.iter().enumerate() {
            legendre_norm_table(size, x, &mut v, &mut d);
            for a in 0..size {
                values[(q, a)] = v[a];
                derivs[(q, a)] = d[a];
            }
        }
        Primitive1D { size, centre, half, nodes, weights, values, derivs }
    }

    pub fn for_axis(sys: &SystemDefinition, axis: Axis, size: usize, quad: usize) -> Self {
        let (lo, hi) = match axis {
            Axis::Eta => sys.eta_range(),
            Axis::Xi => sys.xi_range(),
        };
        Self::new(size, quad, 0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn coordinate(&self, q: usize) -> f64 {
        self.centre + self.half * self.nodes[q]
    }

    /// `int c(u) p_a p_b du` for a coefficient sampled at the nodes.
    pub fn mass_matrix(&self, coef: &[f64]) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.values.nrows(), self.size, |q, a| {
            self.values[(q, a)] * self.weights[q] * coef[q]
        });
        scaled.transpose() * &self.values
    }

    /// `int c(u) p_a' p_b' du`.
    pub fn stiffness_matrix(&self, coef: &[f64]) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.derivs.nrows(), self.size, |q, a| {
            self.derivs[(q, a)] * self.weights[q] * coef[q]
        });
        scaled.transpose() * &self.derivs / (self.half * self.half)
    }

    /// Values of expansions with coefficient columns `coeffs`, times the
    /// square root of the quadrature weight, so that `sum_q f_q g_q` is the
    /// integral of `f g` over `u`. Rows: nodes.
    pub fn weighted_values(&self, coeffs: &DMatrix<f64>) -> DMatrix<f64> {
        let n = coeffs.nrows().min(self.size);
        let mut out = self.values.columns(0, n) * coeffs.rows(0, n);
        for (q, w) in self.weights.iter().enumerate() {
            let s = w.sqrt();
            out.row_mut(q).scale_mut(s);
        }
        out
    }

    /// Value of expansion `coeffs` at coordinate `u`.
    pub fn evaluate(&self, coeffs: &[f64], u: f64) -> (f64, f64) {
        let x = ((u - self.centre) / self.half).clamp(-1.0, 1.0);
        let n = coeffs.len();
        let mut v = vec![0.0; n];
        let mut d = vec![0.0; n];
        legendre_norm_table(n, x, &mut v, &mut d);
        let s = self.half.sqrt();
        let val: f64 = coeffs.iter().zip(&v).map(|(c, p)| c * p).sum::<f64>() / s;
        let der: f64 = coeffs.iter().zip(&d).map(|(c, p)| c * p).sum::<f64>() / (s * self.half);
        (val, der)
    }
}

/// Quadrature order used with a primitive set of the given size.
pub fn default_quadrature(size: usize) -> usize {
    size + 32
}

/// `a(eta) = cos(eta) - cos(2 theta)` or `b(xi) = cos(2 theta) - cos(xi)`.
pub fn axis_weight(sys: &SystemDefinition, axis: Axis, u: f64) -> f64 {
    let c = (2.0 * sys.theta).cos();
    match axis {
        Axis::Eta => (u.cos() - c).max(0.0),
        Axis::Xi => (c - u.cos()).max(0.0),
    }
}

/// Operator `kin A + U - eps B` of one elliptic coordinate at fixed rho.
#[derive(Clone, Debug)]
pub struct OneDimProblem {
    pub axis: Axis,
    pub rho: f64,
    /// Kinetic prefactor `8 / (m rho^2)`.
    pub kinetic: f64,
    pub prim: Primitive1D,
    pub stiffness: DMatrix<f64>,
    pub weight: DMatrix<f64>,
    pub potential: DMatrix<f64>,
}

pub fn kinetic_prefactor(sys: &SystemDefinition, rho: f64) -> f64 {
    8.0 / (sys.scaling_mass * rho * rho)
}

impl OneDimProblem {
    pub fn new(sys: &SystemDefinition, axis: Axis, rho: f64, size: usize) -> Self {
        Self::with_quadrature(sys, axis, rho, size, default_quadrature(size))
    }

    pub fn with_quadrature(sys: &SystemDefinition, axis: Axis, rho: f64, size: usize, quad: usize) -> Self {
        let prim = Primitive1D::for_axis(sys, axis, size, quad);
        let (eta_lo, xi_lo) = (-2.0 * sys.theta, 2.0 * sys.theta);
        let corner = weighted_potential(sys, rho, eta_lo, xi_lo);
        let mut wt = Vec::with_capacity(quad);
        let mut pot = Vec::with_capacity(quad);
        for q in 0..quad {
            let u = prim.coordinate(q);
            wt.push(axis_weight(sys, axis, u));
            pot.push(match axis {
                Axis::Eta => weighted_potential(sys, rho, u, xi_lo),
                Axis::Xi => weighted_potential(sys, rho, eta_lo, u) - corner,
            });
        }
        let stiffness = prim.stiffness_matrix(&wt);
        let weight = prim.mass_matrix(&wt);
        let potential = prim.mass_matrix(&pot);
        OneDimProblem { axis, rho, kinetic: kinetic_prefactor(sys, rho), prim, stiffness, weight, potential }
    }

    pub fn size(&self) -> usize {
        self.prim.size
    }

    pub fn operator(&self, eps: f64) -> DMatrix<f64> {
        let mut h = &self.stiffness * self.kinetic + &self.potential - &self.weight * eps;
        h = 0.5 * (&h + h.transpose());
        h
    }

    pub fn eigenvalues(&self, eps: f64) -> DVector<f64> {
        sym_eigenvalues(self.operator(eps))
    }

    pub fn solve(&self, eps: f64) -> (DVector<f64>, DMatrix<f64>) {
        let (vals, mut vecs) = sym_eigen(self.operator(eps));
        // fix signs: first nonnegligible coefficient positive
        for mut col in vecs.column_iter_mut() {
            let piv = col.iter().cloned().find(|v| v.abs() > 1e-8).unwrap_or(1.0);
            if piv < 0.0 {
                col.neg_mut();
            }
        }
        (vals, vecs)
    }
}

/// Eigenpairs of the eta operator at (rho, eps) with `size` primitives.
pub fn solve_1d_eta(sys: &SystemDefinition, rho: f64, eps: f64, size: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_size(size)?;
    Ok(OneDimProblem::new(sys, Axis::Eta, rho, size).solve(eps))
}

/// Eigenpairs of the xi operator at (rho, eps) with `size` primitives.
pub fn solve_1d_xi(sys: &SystemDefinition, rho: f64, eps: f64, size: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_size(size)?;
    Ok(OneDimProblem::new(sys, Axis::Xi, rho, size).solve(eps))
}

fn check_size(size: usize) -> Result<()> {
    if size < 4 {
        return Err(crate::error::Error::Domain(format!("basis size {size} below 4")));
    }
    Ok(())
}

//! De Vogelaere integration of `Y'' = Q(rho) Y` across the sector sequence.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{condition_overlap, sector_overlap, SectorBasis, SectorGrid};
use crate::error::{Error, Result};
use crate::kinematics::SystemDefinition;
use crate::linalg::{asymmetry, max_abs};

/// Supplies the matrix `Q(rho)` of `Y'' = Q Y`.
pub trait CouplingSampler {
    fn dim(&self) -> usize;
    fn sample(&self, rho: f64, out: &mut DMatrix<f64>);
}

/// `Q(rho) = 2m (W(rho) - E)` for one sector.
pub struct SectorCoupling<'a> {
    pub sys: &'a SystemDefinition,
    pub basis: &'a SectorBasis,
    pub energy: f64,
}

impl CouplingSampler for SectorCoupling<'_> {
    fn dim(&self) -> usize {
        self.basis.channels()
    }

    fn sample(&self, rho: f64, out: &mut DMatrix<f64>) {
        self.basis.coupling_matrix_into(self.sys, rho, out);
        for i in 0..out.nrows() {
            out[(i, i)] -= self.energy;
        }
        *out *= 2.0 * self.sys.scaling_mass;
    }
}

/// Scalar or matrix coupling given by a closure.
pub struct FnCoupling<F: Fn(f64, &mut DMatrix<f64>)> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &mut DMatrix<f64>)> CouplingSampler for FnCoupling<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rho: f64, out: &mut DMatrix<f64>) {
        (self.f)(rho, out)
    }
}

#[derive(Clone, Debug)]
pub struct PropagationState {
    pub rho: f64,
    pub y: DMatrix<f64>,
    pub yp: DMatrix<f64>,
    pub h: f64,
    pub stabilizations: usize,
    pub steps: usize,
    /// Q Y at the previous half step and at the current point, valid for
    /// the current step size.
    history: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl PropagationState {
    pub fn new(rho: f64, y: DMatrix<f64>, yp: DMatrix<f64>) -> Self {
        PropagationState { rho, y, yp, h: 0.0, stabilizations: 0, steps: 0, history: None }
    }

    /// Regular start: `Y = 0`, `Y' = I`.
    pub fn regular(rho: f64, dim: usize) -> Self {
        Self::new(rho, DMatrix::zeros(dim, dim), DMatrix::identity(dim, dim))
    }

    /// Forget the multistep history (after a basis change or step change).
    pub fn restart(&mut self) {
        self.history = None;
    }

    /// Log-derivative `Y' Y^-1`.
    pub fn log_derivative(&self) -> Result<DMatrix<f64>> {
        // Z = Y' Y^-1  <=>  Y^T Z^T = Y'^T
        let lu = self.y.transpose().lu();
        let zt = lu.solve(&self.yp.transpose()).ok_or_else(|| {
            Error::Numerical(format!("solution matrix singular at rho = {}", self.rho))
        })?;
        Ok(zt.transpose())
    }

    /// Change of channel basis: `Y -> O^T Y`.
    pub fn transform(&mut self, overlap: &DMatrix<f64>) {
        self.y = overlap.transpose() * &self.y;
        self.yp = overlap.transpose() * &self.yp;
        self.history = None;
    }
}

/// One fourth-order de Vogelaere step of size `h`.
pub fn de_vogelaere_step(state: &mut PropagationState, sampler: &dyn CouplingSampler, h: f64) {
    let n = sampler.dim();
    let mut q = DMatrix::zeros(n, n);
    if state.h != h {
        state.history = None;
        state.h = h;
    }
    let (f_prev_half, f_n) = match state.history.take() {
        Some(hist) => hist,
        None => {
            sampler.sample(state.rho, &mut q);
            let f_n = &q * &state.y;
            // Taylor estimate of Y half a step back
            let y_back = &state.y - &state.yp * (0.5 * h) + &f_n * (h * h / 8.0);
            sampler.sample(state.rho - 0.5 * h, &mut q);
            (&q * y_back, f_n)
        }
    };
    let h2 = h * h;
    let y_half = &state.y + &state.yp * (0.5 * h) + (&f_n * 4.0 - &f_prev_half) * (h2 / 24.0);
    sampler.sample(state.rho + 0.5 * h, &mut q);
    let f_half = &q * &y_half;
    let y_new = &state.y + &state.yp * h + (&f_n + &f_half * 2.0) * (h2 / 6.0);
    sampler.sample(state.rho + h, &mut q);
    let f_new = &q * &y_new;
    state.yp += (&f_n + &f_half * 4.0 + &f_new) * (h / 6.0);
    state.y = y_new;
    state.rho += h;
    state.steps += 1;
    state.history = Some((f_half, f_new));
}

/// Re-orthonormalises the columns of the stacked solution `[Y; Y']`; the
/// log-derivative is unchanged.
pub fn stabilize(state: &mut PropagationState) -> Result<()> {
    let n = state.y.ncols();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.rows_mut(0, n).copy_from(&state.y);
    stacked.rows_mut(n, n).copy_from(&state.yp);
    let r = stacked.qr().r();
    let dmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let dmin = (0..n).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-300 && dmin / dmax > 1e-250) {
        return Err(Error::Numerical(format!(
            "solution lost rank at rho = {} (pivot ratio {:.3e})",
            state.rho,
            dmin / dmax
        )));
    }
    let rinv = r.try_inverse().ok_or_else(|| {
        Error::Numerical(format!("stabilisation failed at rho = {}", state.rho))
    })?;
    state.y = &state.y * &rinv;
    state.yp = &state.yp * &rinv;
    if let Some((a, b)) = state.history.take() {
        state.history = Some((a * &rinv, b * &rinv));
    }
    state.stabilizations += 1;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepPolicy {
    pub min_steps_per_sector: usize,
    pub points_per_wavelength: f64,
    /// Upper bound on `h kappa` for the most closed channel.
    pub max_closed_phase: f64,
    /// Multiplies every step (0.5 halves all steps).
    pub scale: f64,
    /// Stabilise when an entry of Y exceeds this magnitude.
    pub growth_limit: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            min_steps_per_sector: 8,
            points_per_wavelength: 60.0,
            max_closed_phase: 0.33,
            scale: 1.0,
            growth_limit: 1e20,
        }
    }
}

impl StepPolicy {
    /// Number of equal steps across [a, b].
    pub fn steps_for(&self, sampler: &dyn CouplingSampler, a: f64, b: f64) -> usize {
        let n = sampler.dim();
        let mut q = DMatrix::zeros(n, n);
        let width = b - a;
        let mut h = width / self.min_steps_per_sector as f64;
        for rho in [a, 0.5 * (a + b), b] {
            sampler.sample(rho, &mut q);
            let lo = (0..n).map(|i| q[(i, i)]).fold(f64::INFINITY, f64::min);
            let hi = (0..n).map(|i| q[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
            if lo < 0.0 {
                h = h.min(2.0 * std::f64::consts::PI / (self.points_per_wavelength * (-lo).sqrt()));
            }
            if hi > 0.0 {
                h = h.min(self.max_closed_phase / hi.sqrt());
            }
        }
        ((width / (h * self.scale)).ceil() as usize).max(1)
    }
}

/// Integrates from `state.rho` to `b` with the step policy.
pub fn integrate_span(
    state: &mut PropagationState,
    sampler: &dyn CouplingSampler,
    b: f64,
    policy: &StepPolicy,
) -> Result<()> {
    let a = state.rho;
    if b <= a {
        return Ok(());
    }
    let steps = policy.steps_for(sampler, a, b);
    let h = (b - a) / steps as f64;
    for i in 0..steps {
        de_vogelaere_step(state, sampler, h);
        if max_abs(&state.y) > policy.growth_limit {
            stabilize(state)?;
        }
        if i + 1 == steps {
            state.rho = b;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub z: DMatrix<f64>,
    pub steps: usize,
    pub stabilizations: usize,
    /// `||Z - Z^T|| / ||Z||` at the end.
    pub z_asymmetry: f64,
}

/// Propagates the regular solution at energy `energy` (hartree) from the
/// inner end of the grid to `rho_stop` and returns Z in the basis `outer`
/// (a basis evaluated at `rho_stop`).
pub fn propagate_to(
    sys: &SystemDefinition,
    grid: &SectorGrid,
    energy: f64,
    rho_stop: f64,
    outer: &SectorBasis,
    policy: &StepPolicy,
) -> Result<PropagationResult> {
    let n = grid.sectors[0].channels();
    let b = &grid.boundaries;
    if !(rho_stop > b[0]) {
        return Err(Error::Domain(format!("stop radius {rho_stop} is inside the grid start")));
    }
    if rho_stop > b[b.len() - 1] * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "stop radius {rho_stop} beyond the grid end {}",
            b[b.len() - 1]
        )));
    }
    let mut state = PropagationState::regular(b[0], n);
    let mut last = 0;
    for (i, sector) in grid.sectors.iter().enumerate() {
        let coupling = SectorCoupling { sys, basis: sector, energy };
        let end = b[i + 1].min(rho_stop);
        integrate_span(&mut state, &coupling, end, policy)?;
        last = i;
        if end >= rho_stop || i + 1 == grid.sectors.len() {
            break;
        }
        state.transform(&grid.overlaps[i]);
        stabilize(&mut state)?;
    }
    let to_outer = if (rho_stop - grid.rho_max()).abs() <= 1e-12 * rho_stop && std::ptr::eq(outer, &grid.outer) {
        grid.outer_overlap.clone()
    } else {
        condition_overlap(sector_overlap(sys, &grid.sectors[last], outer), grid.orthogonalized).0
    };
    state.transform(&to_outer);
    stabilize(&mut state)?;
    let z = state.log_derivative()?;
    Ok(PropagationResult {
        z_asymmetry: asymmetry(&z),
        z,
        steps: state.steps,
        stabilizations: state.stabilizations,
    })
}

/// Propagation to the outer end of the grid.
pub fn propagate(
    sys: &SystemDefinition,
    grid: &SectorGrid,
    energy: f64,
    policy: &StepPolicy,
) -> Result<PropagationResult> {
    propagate_to(sys, grid, energy, grid.rho_max(), &grid.outer, policy)
}

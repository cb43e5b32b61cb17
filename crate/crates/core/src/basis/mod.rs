//! Diabatic-by-sector channel basis.

mod grid;
mod oned;
mod sector;
mod separable;

pub use grid::{build_sector_grid, condition_overlap, max_rotation, GridSettings, SectorGrid};
pub use oned::{
    axis_weight, default_quadrature, kinetic_prefactor, solve_1d_eta, solve_1d_xi, Axis, OneDimProblem,
    Primitive1D,
};
pub use sector::{build_sector_basis, sector_overlap, BasisSettings, SectorBasis};
pub use separable::{find_separable_levels, SeparableLevel, SeparablePair};

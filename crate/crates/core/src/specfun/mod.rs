//! Special functions used by the channel basis and the asymptotic matching.

mod clebsch;
mod coulomb;
mod hydrogenic;
mod legendre;
mod radial;

pub use clebsch::{clebsch_gordan, HalfInt};
pub use coulomb::{coulomb_continuum, coulomb_continuum_many, coulomb_continuum_many_scaled, CoulombWave};
pub use hydrogenic::{coulomb_bound, coulomb_bound_with_derivative, hydrogenic_energy};
pub use legendre::{gauss_legendre, legendre_norm, legendre_norm_table};
pub use radial::{closed_channel_pair, riccati_or_exponential, RadialFunctionKind, RadialValue};

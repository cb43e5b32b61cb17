//! Muon transfer from muonic hydrogen to oxygen: three-body close-coupling
//! in hyperspherical elliptic coordinates.

pub mod basis;
pub mod driver;
pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod matching;
pub mod models;
pub mod potential;
pub mod propagator;
pub mod specfun;
pub mod units;

pub use error::{Error, Result};
pub use kinematics::{Arrangement, Charges, EllipticPoint, Masses, SystemDefinition};

//! Inputs shared by the benchmarks in `benches/`.

use muxfer::basis::BasisSettings;
use muxfer::kinematics::SystemDefinition;
use nalgebra::DMatrix;

pub fn system() -> SystemDefinition {
    SystemDefinition::muonic_oxygen()
}

/// Reduced basis for quick sector builds.
pub fn small_basis() -> BasisSettings {
    BasisSettings {
        channels: 12,
        skip: 0,
        primitive_eta: 16,
        primitive_xi: 32,
        primitive_growth: 0.0,
        xi_margin: 0,
        contracted_eta: 12,
        contracted_xi: 16,
        product_pairs: 150,
        ..BasisSettings::default()
    }
}

/// Deterministic symmetric matrix with a dominant diagonal.
pub fn symmetric(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let off = (((i * 7 + j * 7 + i * j) % 13) as f64 - 6.0) / 60.0;
        if i == j {
            1.0 + i as f64
        } else {
            off
        }
    })
}

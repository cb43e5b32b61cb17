//! Physical constants and unit conversions. Internally everything is in
//! atomic units (hbar = e = m_e = 1).

pub const HARTREE_EV: f64 = 27.211_386_245_988;
pub const BOHR_ANGSTROM: f64 = 0.529_177_210_903;

pub const MUON_MASS: f64 = 206.7683;
pub const PROTON_MASS: f64 = 1836.1527;
/// Bare 16O nucleus.
pub const OXYGEN_MASS: f64 = 29148.95;

pub fn ev_to_hartree(e: f64) -> f64 {
    e / HARTREE_EV
}

pub fn hartree_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

/// Muonic Bohr radius in bohr, for a given muon mass.
pub fn muonic_bohr(muon_mass: f64) -> f64 {
    1.0 / muon_mass
}

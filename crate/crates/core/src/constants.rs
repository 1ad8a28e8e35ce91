//! Physical constants and reference device parameters.
//!
//! Working values are deliberately the rounded ones used throughout the
//! device's documentation rather than full-precision CODATA values (the
//! electron gyromagnetic ratio differs from 2π·28 GHz/T by ≈0.3%), so that
//! simulated numbers line up with the quoted device numbers. Internal
//! consistency beats metrological exactness for a digital twin.

use std::f64::consts::PI;

/// Electron gyromagnetic ratio γ = g_e·μ_B/ħ, in rad s⁻¹ T⁻¹ (≈ 2π·28 GHz/T).
pub const GAMMA: f64 = 2.0 * PI * GAMMA_HZ_PER_T;

/// γ/2π in Hz/T: the FMR tuning slope of a sphere, 28 GHz per tesla.
pub const GAMMA_HZ_PER_T: f64 = 28.0e9;

/// Boltzmann constant, J/K.
pub const K_BOLTZMANN: f64 = 1.381e-23;

/// Bohr magneton, J/T.
pub const MU_BOHR: f64 = 9.274e-24;

/// Vacuum permeability, T·m/A.
pub const MU_0: f64 = 1.257e-6;

/// Electron g-factor (dimensionless, rounded).
pub const G_E: f64 = 2.0;

/// Saturation magnetization of YIG at room temperature, A/m
/// (the 0 K value reduced by the standard 72% room-temperature factor).
pub const YIG_MS: f64 = 1.42e5;

/// Density of polarized unpaired spins in YIG at room temperature, m⁻³
/// (1.5·10²² per cm³; the net Fe³⁺ moment per formula unit, thermally reduced).
pub const YIG_SPIN_DENSITY: f64 = 1.5e28;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_is_consistent_with_its_hz_form() {
        assert_eq!(GAMMA, 2.0 * PI * 28.0e9);
        assert!((GAMMA / (2.0 * PI) - GAMMA_HZ_PER_T).abs() < 1e-3);
    }

    #[test]
    fn gamma_matches_ge_mub_over_hbar_to_working_precision() {
        // The rounded working value sits within 0.4% of g_e·μ_B/ħ evaluated
        // from the (equally rounded) magneton: 2·9.274e-24/1.0546e-34.
        let hbar = 1.0546e-34;
        let gamma_from_magneton = G_E * MU_BOHR / hbar;
        assert!((GAMMA - gamma_from_magneton).abs() / gamma_from_magneton < 4e-3);
    }
}

//! Closed-form fundamental limits and error budgets for the YIG-sphere
//! magnetometer: spin-projection noise, thermal magnetization noise, drive
//! tip angle, finite-bias vector error, and field-gradient tolerance.
//!
//! The two noise limits are quoted in T·√s — sensitivity referenced to a
//! 1-second measurement, not a 1-Hz bandwidth — and are never silently
//! converted; multiply by √2 to compare with a T/√Hz single-sided density.
//!
//! * Spin projection: `η_spl = (ħ/(g_e·μ_B))·1/√(N·T₂*)`. The prefactor
//!   `ħ/(g_e·μ_B)` is exactly `1/γ` for the electron, so the crate's working
//!   `γ/2π = 28 GHz/T` is used directly.
//! * Thermal magnetization noise: `η_the = √(k_B·T/(γ·M_s·V_y·Q₀))` — the
//!   fluctuation–dissipation estimate for the uniform precession mode. The
//!   literature carries different order-unity prefactors for this expression;
//!   treat it as an order-of-magnitude bound, not a calibrated number.
//!
//! For the reference 1 mm sphere the thermal limit sits roughly 70× above
//! the spin-projection limit: magnetization damping, not spin counting, is
//! what bounds a room-temperature device.

use crate::constants::{GAMMA, K_BOLTZMANN};
use serde::{Deserialize, Serialize};

/// Errors from limit calculators.
#[derive(Debug, thiserror::Error)]
pub enum LimitsError {
    #[error("invalid sphere specification: {0}")]
    InvalidSpec(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Physical description of the YIG sphere for limit calculations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    /// Sphere diameter, m.
    pub diameter: f64,
    /// Density of polarized unpaired spins, 1/m³.
    pub spin_density: f64,
    /// Dephasing time T₂*, s.
    pub t2_star: f64,
    /// Unloaded quality factor of the magnetostatic mode.
    pub q0: f64,
    /// Saturation magnetization, A/m.
    pub ms: f64,
    /// Temperature, K.
    pub temperature: f64,
}

impl SphereSpec {
    pub fn validate(&self) -> Result<(), LimitsError> {
        let fields = [
            ("diameter", self.diameter),
            ("spin_density", self.spin_density),
            ("t2_star", self.t2_star),
            ("q0", self.q0),
            ("ms", self.ms),
            ("temperature", self.temperature),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LimitsError::InvalidSpec(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Sphere volume `V_y = π·d³/6`, m³.
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.diameter.powi(3) / 6.0
    }

    /// Number of polarized spins `N = spin_density·V_y`.
    pub fn spin_count(&self) -> f64 {
        self.spin_density * self.volume()
    }

    /// The demonstration device: 1 mm YIG sphere, room-temperature spin
    /// density 1.5×10²⁸ m⁻³ (≈ 7.9×10¹⁸ spins), T₂* = 570 ns, Q₀ = 8900.
    pub fn reference() -> Self {
        SphereSpec {
            diameter: 1.0e-3,
            spin_density: 1.5e28,
            t2_star: 570.0e-9,
            q0: 8900.0,
            ms: crate::constants::YIG_MS,
            temperature: 300.0,
        }
    }
}

/// Spin-projection-limited sensitivity `η_spl = (1/γ)·1/√(N·T₂*)`, T·√s.
///
/// The quantum limit for a DC magnetometer built on `N` uncorrelated spins
/// dephasing in `T₂*`.
pub fn spin_projection_limit(spec: &SphereSpec) -> Result<f64, LimitsError> {
    spec.validate()?;
    Ok(1.0 / (GAMMA * (spec.spin_count() * spec.t2_star).sqrt()))
}

/// Thermal magnetization noise `η_the = √(k_B·T/(γ·M_s·V_y·Q₀))`, T·√s.
///
/// Order-unity prefactor uncertainty applies (see module docs).
pub fn thermal_limit(spec: &SphereSpec) -> Result<f64, LimitsError> {
    spec.validate()?;
    Ok((K_BOLTZMANN * spec.temperature / (GAMMA * spec.ms * spec.volume() * spec.q0)).sqrt())
}

/// Steady-state magnetization tip angle under a CW drive of amplitude `b_rf`:
/// `θ = arccos[1/(1 + ¼·γ²·B_rf²·T₁·T₂)]`, rad.
///
/// For small drives this expands to `θ ≈ γ·B_rf·√(T₁·T₂/2)`. `T₁ = T₂/2` is
/// the customary default when the energy relaxation time is not measured
/// separately; both times are explicit parameters here. `b_rf = 0` gives 0.
pub fn tip_angle(b_rf: f64, t1: f64, t2: f64) -> Result<f64, LimitsError> {
    if !(b_rf >= 0.0 && b_rf.is_finite()) {
        return Err(LimitsError::InvalidParameter(format!(
            "drive amplitude must be non-negative, got {b_rf} T"
        )));
    }
    if !(t1 > 0.0 && t1.is_finite() && t2 > 0.0 && t2.is_finite()) {
        return Err(LimitsError::InvalidParameter(format!(
            "relaxation times must be positive, got T1 = {t1} s, T2 = {t2} s"
        )));
    }
    let x = 0.25 * (GAMMA * b_rf).powi(2) * t1 * t2;
    Ok((1.0 / (1.0 + x)).acos())
}

/// Result of [`finite_bias_error`]: what a scalar `|B|` magnetometer reads
/// when the sensed field has a transverse component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteBias {
    /// What the magnetometer reports as the sensed field:
    /// `B∥ + B⊥²/(2·B₀)`, tesla.
    pub measured_projection: f64,
    /// Second-order heading error `B⊥²/(2·B₀)`, tesla.
    pub error: f64,
    /// Exact-norm reference `√((B₀+B∥)² + B⊥²) − B₀ − B∥` for validating the
    /// Taylor form, tesla.
    pub exact_error: f64,
}

/// Vector error of a finite-bias scalar measurement.
///
/// The oscillator measures `|B₀ + B_sen|`; a transverse component `b_perp`
/// pulls the reading up by `≈ B⊥²/(2·B₀)` (second order — it vanishes when
/// the sensed field is parallel to the bias). Valid for `|b_perp|, |b_par| ≪
/// b0`; the exact-norm reference is returned alongside so the approximation
/// can always be checked: the two differ by at most `(B⊥/B₀)⁴·B₀`.
pub fn finite_bias_error(
    b_perp: f64,
    b_par: f64,
    b0: f64,
) -> Result<FiniteBias, LimitsError> {
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(LimitsError::InvalidParameter(format!(
            "bias field must be positive, got {b0} T"
        )));
    }
    if !(b_perp.is_finite() && b_par.is_finite()) {
        return Err(LimitsError::InvalidParameter(
            "field components must be finite".into(),
        ));
    }
    let error = b_perp * b_perp / (2.0 * b0);
    // √(x² + y²) − x evaluated as y²/(x + √(x² + y²)) — algebraically equal,
    // but free of the catastrophic cancellation of two ~B₀-sized terms.
    let x = b0 + b_par;
    let exact = b_perp * b_perp / (x + x.hypot(b_perp));
    Ok(FiniteBias {
        measured_projection: b_par + error,
        error,
        exact_error: exact,
    })
}

/// Largest uniform field gradient the sphere tolerates before inhomogeneous
/// broadening exceeds its intrinsic linewidth: `γ·(G·ℓ) = κ₀`, so
/// `G = κ₀/(γ·ℓ)` in T/m, with `κ₀` in rad/s and `ℓ` the sphere scale in m.
pub fn gradient_tolerance(kappa0: f64, length_scale: f64) -> Result<f64, LimitsError> {
    if !(kappa0 > 0.0 && kappa0.is_finite()) {
        return Err(LimitsError::InvalidParameter(format!(
            "intrinsic linewidth must be positive, got {kappa0} rad/s"
        )));
    }
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(LimitsError::InvalidParameter(format!(
            "length scale must be positive, got {length_scale} m"
        )));
    }
    Ok(kappa0 / (GAMMA * length_scale))
}

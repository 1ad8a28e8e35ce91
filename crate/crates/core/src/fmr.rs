//! Ferrimagnetic-resonance physics of the YIG sphere and its two-port
//! coupling network.
//!
//! The sphere's uniform precession mode obeys Kittel's formula
//!
//! ```text
//! ω_y = sqrt{ [γB_z + (N_y−N_z)γμ₀M_z] · [γB_z + (N_x−N_z)γμ₀M_z] }
//! ```
//!
//! which for a sphere (N_x = N_y = N_z = 1/3) collapses to the strikingly
//! simple ω_y = γB_z: the resonance frequency is field-strength-to-frequency
//! conversion with slope γ/2π = 28 GHz/T and no material parameters. First-
//! order magnetocrystalline anisotropy adds an orientation-dependent shift
//! (see [`anisotropy_resonance`]) that vanishes at the zero-temperature-
//! compensated angle of ≈29.7° between the bias field and the <100> axis in
//! the {110} plane.
//!
//! Coupled to a transmission line by input/output loops with rates κ₁ and κ₂
//! (unloaded linewidth κ₀), the sphere forms a two-port bandpass filter whose
//! S-parameters near resonance are
//!
//! ```text
//! S11 = 1 − κ₁/D,   S21 = √(κ₁κ₂)/D · e^{−iπ/2},
//! S22 = 1 − κ₂/D,   S12 = √(κ₁κ₂)/D · e^{+iπ/2},   D = i(ω_d−ω_y) + κ_L/2,
//! ```
//!
//! with loaded linewidth κ_L = κ₀+κ₁+κ₂ (an angular FWHM). The ±π/2 phases
//! encode the gyrator-like non-reciprocity of the precessing magnetization:
//! |S21| = |S12| but the phases differ by π at every detuning. This model is
//! a near-resonance approximation; operations here are intended for detunings
//! within ±50·κ_L of ω_y.
//!
//! [`extract_coupling_rates`] inverts the on-resonance extrema |S11|²min and
//! |S21|²max together with κ_L into the three rates in closed form, and
//! [`fit_sweep`] wraps that inversion for sampled sweep data.

use crate::constants::{GAMMA, MU_0};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Errors from resonance evaluation, coupling-rate extraction, and sweep
/// fitting.
#[derive(Debug, thiserror::Error)]
pub enum FmrError {
    /// A bracketed factor of Kittel's formula went negative: the requested
    /// (field, magnetization, shape) combination has no uniform-precession
    /// resonance.
    #[error("Kittel formula out of domain: bracketed factor {factor:.6e} (rad/s)^2-scale is negative")]
    KittelDomain { factor: f64 },
    #[error("invalid resonator model: {0}")]
    InvalidModel(String),
    #[error("invalid extraction input: {0}")]
    InvalidExtractionInput(String),
    /// The measured (|S11|²min, |S21|²max, κ_L) triple implies κ₀ < 0.
    /// Passivity requires |S21|²max ≤ 1 − |S11|²min.
    #[error(
        "inconsistent measurement triple: recovered kappa0 = {kappa0_hz:.6e} Hz is negative \
         (requires |S21|^2 max <= 1 - |S11|^2 min)"
    )]
    InconsistentTriple { kappa0_hz: f64 },
    #[error("loaded linewidth must be positive, got kappa_l = {0:.6e} rad/s")]
    NonPositiveLinewidth(f64),
    #[error("sweep fit failed: {0}")]
    SweepFit(String),
}

/// Shape demagnetization factors (N_x, N_y, N_z); each in [0, 1], summing
/// to 1. All 1/3 for a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemagFactors {
    pub nx: f64,
    pub ny: f64,
    pub nz: f64,
}

impl DemagFactors {
    /// Sphere: N_x = N_y = N_z = 1/3.
    pub const SPHERE: DemagFactors = DemagFactors {
        nx: 1.0 / 3.0,
        ny: 1.0 / 3.0,
        nz: 1.0 / 3.0,
    };

    pub fn validate(&self) -> Result<(), FmrError> {
        let comps = [self.nx, self.ny, self.nz];
        if comps.iter().any(|n| !n.is_finite() || *n < 0.0 || *n > 1.0) {
            return Err(FmrError::InvalidModel(format!(
                "demagnetization factors must each lie in [0,1], got ({}, {}, {})",
                self.nx, self.ny, self.nz
            )));
        }
        let sum = self.nx + self.ny + self.nz;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(FmrError::InvalidModel(format!(
                "demagnetization factors must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Physical and coupling parameters of the YIG-sphere frequency discriminator.
///
/// Angular rates (`kappa*`) are in rad/s; fields in tesla; `ms` in A/m;
/// `theta` is the angle in the {110} plane between the <100> crystal axis and
/// the applied bias field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorModel {
    /// Unloaded FMR FWHM linewidth, rad/s.
    pub kappa0: f64,
    /// Input coupling rate, rad/s.
    pub kappa1: f64,
    /// Output coupling rate, rad/s.
    pub kappa2: f64,
    /// Bias flux density along ẑ, tesla.
    pub b0: f64,
    /// Saturation magnetization, A/m.
    pub ms: f64,
    /// Shape demagnetization factors.
    pub demag: DemagFactors,
    /// First-order anisotropy ratio K₁/(μ₀M_s), tesla (negative for YIG).
    pub k1_over_mu0ms: f64,
    /// Crystal orientation angle, radians.
    pub theta: f64,
}

impl ResonatorModel {
    /// Loaded linewidth κ_L = κ₀ + κ₁ + κ₂, rad/s (angular FWHM).
    pub fn kappa_l(&self) -> f64 {
        self.kappa0 + self.kappa1 + self.kappa2
    }

    /// Resonance frequency of the model, rad/s: Kittel's formula for the
    /// stored shape/bias/magnetization plus the first-order anisotropy shift
    /// at the stored orientation.
    pub fn resonance(&self) -> Result<f64, FmrError> {
        let kittel = kittel_frequency(self.b0, self.ms, self.demag)?;
        Ok(kittel + GAMMA * self.k1_over_mu0ms * anisotropy_polynomial(self.theta))
    }

    pub fn validate(&self) -> Result<(), FmrError> {
        if !(self.kappa0 > 0.0 && self.kappa1 > 0.0 && self.kappa2 > 0.0) {
            return Err(FmrError::InvalidModel(format!(
                "coupling rates must be positive, got kappa0={}, kappa1={}, kappa2={}",
                self.kappa0, self.kappa1, self.kappa2
            )));
        }
        self.demag.validate()?;
        if !(self.ms > 0.0) {
            return Err(FmrError::InvalidModel(format!(
                "saturation magnetization must be positive, got {}",
                self.ms
            )));
        }
        if !(GAMMA * self.b0 > 0.0) {
            return Err(FmrError::InvalidModel(format!(
                "bias field must give gamma*B0 > 0, got B0 = {} T",
                self.b0
            )));
        }
        Ok(())
    }

    /// The demonstration device this simulator ships with: a 1 mm YIG sphere
    /// biased at 0.178 T (≈5 GHz), oriented at the zero-temperature-
    /// compensated angle, with measured coupling rates
    /// κ₀/κ₁/κ₂ = 2π × (790, 315, 405) kHz.
    pub fn reference() -> Self {
        ResonatorModel {
            kappa0: 2.0 * PI * 790.0e3,
            kappa1: 2.0 * PI * 315.0e3,
            kappa2: 2.0 * PI * 405.0e3,
            b0: 0.178,
            ms: crate::constants::YIG_MS,
            demag: DemagFactors::SPHERE,
            k1_over_mu0ms: -4.2e-3,
            theta: ztc_angle(),
        }
    }
}

/// One sweep point of the two-port response, dimensionless S-parameters at
/// drive frequency `omega_d` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParameterPoint {
    pub omega_d: f64,
    pub s11: Complex64,
    pub s12: Complex64,
    pub s21: Complex64,
    pub s22: Complex64,
}

/// Kittel's formula for the uniform-precession frequency, rad/s.
///
/// `b_z` is the internal bias flux density (tesla), `m_z` the static
/// magnetization (A/m), `demag` the shape factors. Errors if either bracketed
/// factor is negative (non-physical regime: the mode is not a resonance).
pub fn kittel_frequency(b_z: f64, m_z: f64, demag: DemagFactors) -> Result<f64, FmrError> {
    let f1 = GAMMA * b_z + (demag.ny - demag.nz) * GAMMA * MU_0 * m_z;
    let f2 = GAMMA * b_z + (demag.nx - demag.nz) * GAMMA * MU_0 * m_z;
    if f1 < 0.0 {
        return Err(FmrError::KittelDomain { factor: f1 });
    }
    if f2 < 0.0 {
        return Err(FmrError::KittelDomain { factor: f2 });
    }
    Ok((f1 * f2).sqrt())
}

/// Resonance of a sphere: ω_y = γ·b exactly (demagnetization cancels).
pub fn sphere_resonance(b: f64) -> f64 {
    GAMMA * b
}

/// The orientation polynomial 2 + (15/2)sin⁴θ − 10sin²θ multiplying the
/// first-order anisotropy field K₁/(μ₀M_s).
pub fn anisotropy_polynomial(theta: f64) -> f64 {
    let s2 = theta.sin().powi(2);
    2.0 + 7.5 * s2 * s2 - 10.0 * s2
}

/// Sphere resonance including first-order cubic anisotropy, rad/s:
/// ω = γ[B + (K₁/μ₀M_s)(2 + (15/2)sin⁴θ − 10sin²θ)] for θ measured in the
/// {110} plane from the <100> axis. Higher-order anisotropy terms are
/// negligible for YIG and omitted.
pub fn anisotropy_resonance(b: f64, theta: f64, k1_over_mu0ms: f64) -> f64 {
    GAMMA * (b + k1_over_mu0ms * anisotropy_polynomial(theta))
}

/// Orientation at which the first-order anisotropy shift vanishes
/// ("zero temperature compensation"): arcsin√((10−2√10)/15) ≈ 29.7°.
///
/// At this angle the resonance is first-order insensitive to the
/// temperature-dependent anisotropy constant, so temperature drift of K₁
/// does not pull the oscillator.
pub fn ztc_angle() -> f64 {
    ((10.0 - 2.0 * 10.0f64.sqrt()) / 15.0).sqrt().asin()
}

/// Two-port S-parameters of the FMR filter at drive frequency `omega_d`
/// given resonance `omega_y` (both rad/s).
///
/// Valid near resonance (intended window: |ω_d−ω_y| ≲ 50·κ_L). |S21|² is a
/// Lorentzian peaked at ω_d = ω_y with FWHM κ_L; S21 carries e^{−iπ/2} and
/// S12 carries e^{+iπ/2} (gyrator phase).
pub fn s_parameters(model: &ResonatorModel, omega_d: f64, omega_y: f64) -> SParameterPoint {
    let denom = Complex64::new(model.kappa_l() / 2.0, omega_d - omega_y);
    let s11 = 1.0 - model.kappa1 / denom;
    let s22 = 1.0 - model.kappa2 / denom;
    let coupling = (model.kappa1 * model.kappa2).sqrt() / denom;
    // e^{∓iπ/2} = ∓i
    let s21 = coupling * Complex64::new(0.0, -1.0);
    let s12 = coupling * Complex64::new(0.0, 1.0);
    SParameterPoint {
        omega_d,
        s11,
        s12,
        s21,
        s22,
    }
}

/// Recovers (κ₀, κ₁, κ₂) in rad/s from the on-resonance reflection minimum
/// `s11_min_sq` = |S11|²min, transmission maximum `s21_max_sq` = |S21|²max,
/// and the loaded linewidth `kappa_l` (rad/s).
///
/// Closed form (undercoupled input port, κ₁ ≤ κ_L/2, assumed — the branch
/// with κ₁ ≥ κ_L/2 produces the same two magnitudes and cannot be
/// distinguished from them):
///
/// ```text
/// κ₁ = (κ_L/2)(1 − √S),   κ₂ = (κ_L/2)·P/(1 − √S),   κ₀ = κ_L − κ₁ − κ₂,
/// ```
///
/// with S = |S11|²min, P = |S21|²max. Errors if the triple implies κ₀ < 0,
/// which happens exactly when P > 1 − S (a passive two-port cannot do that);
/// κ₀ = 0 (fully coupling-dominated linewidth) is accepted.
pub fn extract_coupling_rates(
    s11_min_sq: f64,
    s21_max_sq: f64,
    kappa_l: f64,
) -> Result<(f64, f64, f64), FmrError> {
    if !(0.0..1.0).contains(&s11_min_sq) {
        return Err(FmrError::InvalidExtractionInput(format!(
            "|S11|^2 min must lie in [0, 1), got {s11_min_sq}"
        )));
    }
    if !(s21_max_sq > 0.0 && s21_max_sq <= 1.0) {
        return Err(FmrError::InvalidExtractionInput(format!(
            "|S21|^2 max must lie in (0, 1], got {s21_max_sq}"
        )));
    }
    if !(kappa_l > 0.0) {
        return Err(FmrError::NonPositiveLinewidth(kappa_l));
    }
    let root_s = s11_min_sq.sqrt();
    let half = kappa_l / 2.0;
    let kappa1 = half * (1.0 - root_s);
    let kappa2 = half * s21_max_sq / (1.0 - root_s);
    let kappa0 = kappa_l - kappa1 - kappa2;
    // Tolerate floating-point dust around the κ₀ = 0 boundary (critically
    // coupled, linewidth fully explained by the ports) but reject genuinely
    // negative solutions.
    if kappa0 < -1e-9 * kappa_l {
        return Err(FmrError::InconsistentTriple {
            kappa0_hz: kappa0 / (2.0 * PI),
        });
    }
    Ok((kappa0.max(0.0), kappa1, kappa2))
}

/// Loaded quality factor Q_L = ω_y/κ_L. `omega_y` overrides the model's own
/// resonance when supplied (e.g. to use a separately measured oscillation
/// frequency).
pub fn loaded_q(model: &ResonatorModel, omega_y: Option<f64>) -> Result<f64, FmrError> {
    let kappa_l = model.kappa_l();
    if !(kappa_l > 0.0) {
        return Err(FmrError::NonPositiveLinewidth(kappa_l));
    }
    let omega = match omega_y {
        Some(w) => w,
        None => model.resonance()?,
    };
    Ok(omega / kappa_l)
}

/// Leeson frequency f_L = κ_L/(4π) in Hz: κ_L is an angular FWHM, f_L the
/// non-angular half-width at which the filter starts regeneratively
/// amplifying in-loop phase noise.
pub fn leeson_frequency(model: &ResonatorModel) -> Result<f64, FmrError> {
    let kappa_l = model.kappa_l();
    if !(kappa_l > 0.0) {
        return Err(FmrError::NonPositiveLinewidth(kappa_l));
    }
    Ok(kappa_l / (4.0 * PI))
}

/// One row of a measured/synthesized S-parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub freq_hz: f64,
    pub s11: Complex64,
    pub s21: Complex64,
}

/// Result of fitting a swept two-port measurement: coupling rates plus the
/// derived loaded-Q and Leeson frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFit {
    /// Unloaded linewidth, rad/s.
    pub kappa0: f64,
    /// Input coupling rate, rad/s.
    pub kappa1: f64,
    /// Output coupling rate, rad/s.
    pub kappa2: f64,
    /// Interpolated resonance frequency, Hz.
    pub f_resonance_hz: f64,
    /// |S21|² full width at half maximum, Hz (κ_L/2π).
    pub fwhm_hz: f64,
    /// Loaded quality factor f_res/FWHM.
    pub q_loaded: f64,
    /// Leeson frequency FWHM/2, Hz.
    pub f_leeson_hz: f64,
}

/// Vertex of the parabola through three (x, y) samples; returns (x*, y*).
/// Falls back to the middle sample when the points are collinear.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    // Shift by the middle abscissa for conditioning.
    let u0 = x[0] - x[1];
    let u2 = x[2] - x[1];
    // Solve y = a + b·u + c·u² through (u0,y0), (0,y1), (u2,y2).
    let a = y[1];
    let det = u0 * u2 * (u0 - u2);
    let b = (u0 * u0 * (y[2] - a) - u2 * u2 * (y[0] - a)) / det;
    let c = (u2 * (y[0] - a) - u0 * (y[2] - a)) / det;
    if c == 0.0 {
        return (x[1], y[1]);
    }
    let u_star = -b / (2.0 * c);
    (x[1] + u_star, a - b * b / (4.0 * c))
}

/// Linear interpolation of the frequency where `p` crosses `target` between
/// adjacent samples i and i+1.
fn cross_between(freq: &[f64], p: &[f64], i: usize, target: f64) -> f64 {
    let t = (target - p[i]) / (p[i + 1] - p[i]);
    freq[i] + t * (freq[i + 1] - freq[i])
}

/// Locates |S21|²max, |S11|²min and the 3-dB width on a sampled sweep and
/// feeds them through [`extract_coupling_rates`].
///
/// Extrema are refined by quadratic interpolation around the extremal
/// samples; the half-power crossings by linear interpolation between the
/// bracketing samples. The sweep must be sorted by frequency, contain the
/// peak away from its edges, and reach below half power on both sides.
pub fn fit_sweep(points: &[SweepPoint]) -> Result<SweepFit, FmrError> {
    if points.len() < 5 {
        return Err(FmrError::SweepFit(format!(
            "need at least 5 sweep points, got {}",
            points.len()
        )));
    }
    let freq: Vec<f64> = points.iter().map(|p| p.freq_hz).collect();
    if freq.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FmrError::SweepFit(
            "sweep frequencies must be strictly increasing".into(),
        ));
    }
    let p21: Vec<f64> = points.iter().map(|p| p.s21.norm_sqr()).collect();
    let p11: Vec<f64> = points.iter().map(|p| p.s11.norm_sqr()).collect();

    let i_max = p21
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    if i_max == 0 || i_max == p21.len() - 1 {
        return Err(FmrError::SweepFit(
            "|S21|^2 peak sits at the sweep edge; widen the sweep".into(),
        ));
    }
    let (f_res, p21_max) = parabola_vertex(
        [freq[i_max - 1], freq[i_max], freq[i_max + 1]],
        [p21[i_max - 1], p21[i_max], p21[i_max + 1]],
    );

    let i_min = p11
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let p11_min = if i_min == 0 || i_min == p11.len() - 1 {
        p11[i_min]
    } else {
        // The interpolated minimum of a noisy dip can undershoot zero by a
        // hair; |S11|² is non-negative by definition.
        parabola_vertex(
            [freq[i_min - 1], freq[i_min], freq[i_min + 1]],
            [p11[i_min - 1], p11[i_min], p11[i_min + 1]],
        )
        .1
        .max(0.0)
    };

    let half = p21_max / 2.0;
    let left = (0..i_max)
        .rev()
        .find(|&i| p21[i] < half && p21[i + 1] >= half)
        .ok_or_else(|| {
            FmrError::SweepFit("no half-power crossing below the peak; widen the sweep".into())
        })?;
    let f_lo = cross_between(&freq, &p21, left, half);
    let right = (i_max..p21.len() - 1)
        .find(|&i| p21[i] >= half && p21[i + 1] < half)
        .ok_or_else(|| {
            FmrError::SweepFit("no half-power crossing above the peak; widen the sweep".into())
        })?;
    let f_hi = cross_between(&freq, &p21, right, half);

    let fwhm_hz = f_hi - f_lo;
    let kappa_l = 2.0 * PI * fwhm_hz;
    let (kappa0, kappa1, kappa2) = extract_coupling_rates(p11_min, p21_max, kappa_l)?;
    Ok(SweepFit {
        kappa0,
        kappa1,
        kappa2,
        f_resonance_hz: f_res,
        fwhm_hz,
        q_loaded: f_res / fwhm_hz,
        f_leeson_hz: fwhm_hz / 2.0,
    })
}

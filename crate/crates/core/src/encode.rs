//! Field → waveform encoding: how a sensed magnetic field becomes the phase
//! of the oscillator output.
//!
//! A field `b_sen(t)` along the bias axis shifts the oscillation frequency by
//! `γ·b_sen/2π`, so the output waveform is frequency-modulated:
//!
//! ```text
//! V(t) = A·cos( 2π·f_net·t + γ·∫₀ᵗ b_sen dt' + φ_noise(t) )
//! ```
//!
//! where `f_net = γ·B0/2π − f_LO` is the recorded (intermediate) carrier
//! frequency after an ideal mix by a local oscillator `f_LO`. For a sinusoidal
//! field of rms amplitude `B_rms` at `f_m`, the narrowband single-sideband
//! amplitude ratio is `s = γ·B_rms/(√2·ω_m)` ([`predict_sideband`]); the exact
//! line spectrum follows the Jacobi–Anger expansion with modulation index
//! `β = √2·γ·B_rms/ω_m = 2s` and line amplitudes `J_k(β)`
//! ([`sideband_spectrum_exact`]).
//!
//! Phase integration uses a sixth-order Lagrange quadrature rather than the
//! trapezoid rule: the encode → demodulate round trip must reproduce fields
//! to parts in 10⁴ at a tenth of Nyquist, and the trapezoid droop
//! `(πf/f_s)²/3` alone would exceed that budget.

use crate::constants::{GAMMA, GAMMA_HZ_PER_T};
use crate::fft::{complex_from_real, FftEngine};
use crate::{Warned, Warning};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Errors from field encoding and waveform manipulation.
#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("invalid field series: {0}")]
    InvalidSeries(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "carrier at {carrier_hz:.6e} Hz is outside the representable band \
         (0, {nyquist_hz:.6e}) Hz"
    )]
    CarrierOutOfBand { carrier_hz: f64, nyquist_hz: f64 },
    #[error("phase-noise series has {got} samples, field series has {expected}")]
    PhaseNoiseLength { expected: usize, got: usize },
    #[error("mixdown band violation: {0}")]
    MixdownBand(String),
}

/// A uniformly sampled record of the sensed field `b_sen(t)` in tesla —
/// the deviation from the static bias, not the total field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSeries {
    pub samples: Vec<f64>,
    /// Sample rate, Hz.
    pub sample_rate: f64,
}

impl FieldSeries {
    /// Validating constructor: positive sample rate, non-empty finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self, EncodeError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(EncodeError::InvalidSeries(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(EncodeError::InvalidSeries("empty sample array".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(EncodeError::InvalidSeries(
                "samples contain non-finite values".into(),
            ));
        }
        Ok(FieldSeries {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Record duration in seconds, `n/f_s`.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// A real sampled oscillator waveform at an intermediate frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    /// Sample rate, Hz.
    pub sample_rate: f64,
    /// Nominal carrier (intermediate) frequency of the record, Hz.
    pub carrier_hz: f64,
}

/// Carrier placement for [`synthesize_waveform`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    /// Static bias field B0, tesla. Sets the physical carrier γ·B0/2π.
    pub b0: f64,
    /// Local-oscillator frequency subtracted from the physical carrier to
    /// place the record at an intermediate frequency, Hz.
    pub lo_frequency_hz: f64,
    /// Waveform amplitude, arbitrary units.
    pub amplitude: f64,
}

impl CarrierSpec {
    /// The recorded carrier frequency `γ·B0/2π − f_LO`, Hz.
    pub fn net_carrier_hz(&self) -> f64 {
        GAMMA_HZ_PER_T * self.b0 - self.lo_frequency_hz
    }
}

// Sixth-order Lagrange quadrature: each inter-sample increment integrates the
// degree-5 interpolant through six neighboring samples. Interior steps use the
// symmetric stencil (nodes −2..3 about the step); the first/last two steps use
// one-sided stencils over the first/last six samples. All weights are exact
// integrals of the Lagrange basis, ×1440.
const QUAD_DEN: f64 = 1440.0;
const QUAD_FIRST: [f64; 6] = [475.0, 1427.0, -798.0, 482.0, -173.0, 27.0];
const QUAD_SECOND: [f64; 6] = [-27.0, 637.0, 1022.0, -258.0, 77.0, -11.0];
const QUAD_INTERIOR: [f64; 6] = [11.0, -93.0, 802.0, 802.0, -93.0, 11.0];
const QUAD_PENULTIMATE: [f64; 6] = [-11.0, 77.0, -258.0, 1022.0, 637.0, -27.0];
const QUAD_LAST: [f64; 6] = [27.0, -173.0, 482.0, -798.0, 1427.0, 475.0];

#[inline]
fn dot6(w: &[f64; 6], x: &[f64]) -> f64 {
    w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3] + w[4] * x[4] + w[5] * x[5]
}

/// Cumulative FM phase deviation `φ_dev[n] = γ·∫₀^{tₙ} b_sen dt`, rad.
///
/// `φ_dev[0] = 0`; the result has the same length as the input. Exact (to
/// rounding) for fields that are polynomials of degree ≤ 5 in time; for a
/// sinusoid the per-step error scales as `(ω/f_s)⁷`. Requires at least six
/// samples.
pub fn integrate_phase(field: &FieldSeries) -> Result<Vec<f64>, EncodeError> {
    let x = &field.samples;
    let n = x.len();
    if n < 6 {
        return Err(EncodeError::InvalidSeries(format!(
            "need at least 6 samples to integrate, got {n}"
        )));
    }
    let scale = GAMMA / (field.sample_rate * QUAD_DEN);
    let mut phi = Vec::with_capacity(n);
    phi.push(0.0);
    let mut acc = 0.0f64;
    acc += dot6(&QUAD_FIRST, &x[0..6]);
    phi.push(acc * scale);
    acc += dot6(&QUAD_SECOND, &x[0..6]);
    phi.push(acc * scale);
    for j in 2..n - 3 {
        acc += dot6(&QUAD_INTERIOR, &x[j - 2..j + 4]);
        phi.push(acc * scale);
    }
    acc += dot6(&QUAD_PENULTIMATE, &x[n - 6..n]);
    phi.push(acc * scale);
    acc += dot6(&QUAD_LAST, &x[n - 6..n]);
    phi.push(acc * scale);
    debug_assert_eq!(phi.len(), n);
    Ok(phi)
}

/// Synthesizes the oscillator waveform for a sensed-field record.
///
/// The carrier phase is computed per sample as `2π·frac(f_net·n/f_s)` rather
/// than by accumulating increments, so the cosine argument stays small and
/// carries no cumulative rounding; the field-induced phase from
/// [`integrate_phase`] and the optional phase-noise series are added to it.
/// `phase_noise`, when given, must match the field series length.
///
/// Warns [`Warning::LinearRegime`] when `max|b_sen|/B0 > 1e-3`, the bound
/// beyond which transverse-field projection errors reach the 10⁻⁶ level.
pub fn synthesize_waveform(
    field: &FieldSeries,
    carrier: &CarrierSpec,
    phase_noise: Option<&[f64]>,
) -> Result<Warned<Waveform>, EncodeError> {
    if !(carrier.b0 > 0.0 && carrier.b0.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "bias field must be positive, got {} T",
            carrier.b0
        )));
    }
    if !(carrier.amplitude > 0.0 && carrier.amplitude.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "amplitude must be positive, got {}",
            carrier.amplitude
        )));
    }
    let fs = field.sample_rate;
    let f_net = carrier.net_carrier_hz();
    let b_max = field.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let dev_hz = GAMMA_HZ_PER_T * b_max;
    if !(f_net - dev_hz > 0.0 && f_net + dev_hz < fs / 2.0) {
        return Err(EncodeError::CarrierOutOfBand {
            carrier_hz: f_net,
            nyquist_hz: fs / 2.0,
        });
    }
    if let Some(pn) = phase_noise {
        if pn.len() != field.len() {
            return Err(EncodeError::PhaseNoiseLength {
                expected: field.len(),
                got: pn.len(),
            });
        }
    }

    let phi_dev = integrate_phase(field)?;
    let cycles_per_sample = f_net / fs;
    let n = field.len();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let carrier_cycles = (cycles_per_sample * i as f64).rem_euclid(1.0);
        let mut phi = 2.0 * PI * carrier_cycles + phi_dev[i];
        if let Some(pn) = phase_noise {
            phi += pn[i];
        }
        samples.push(carrier.amplitude * phi.cos());
    }
    let waveform = Waveform {
        samples,
        sample_rate: fs,
        carrier_hz: f_net,
    };
    let ratio = b_max / carrier.b0;
    Ok(if ratio > 1e-3 {
        Warned::with(waveform, Warning::LinearRegime { ratio })
    } else {
        Warned::clean(waveform)
    })
}

/// Multiplies a waveform by the AM envelope `1 + depth·cos(2π·f_am·t)`.
///
/// Models sustaining-amplifier gain ripple; a phase-based demodulator must
/// reject it. `depth` must lie in `[0, 1)` so the envelope never crosses zero.
pub fn apply_amplitude_modulation(
    waveform: &mut Waveform,
    depth: f64,
    f_am_hz: f64,
) -> Result<(), EncodeError> {
    if !(0.0..1.0).contains(&depth) {
        return Err(EncodeError::InvalidParameter(format!(
            "AM depth must be in [0, 1), got {depth}"
        )));
    }
    if !(f_am_hz > 0.0 && f_am_hz < waveform.sample_rate / 2.0) {
        return Err(EncodeError::InvalidParameter(format!(
            "AM frequency {f_am_hz} Hz outside (0, Nyquist)"
        )));
    }
    let dt = 1.0 / waveform.sample_rate;
    for (i, s) in waveform.samples.iter_mut().enumerate() {
        *s *= 1.0 + depth * (2.0 * PI * f_am_hz * dt * i as f64).cos();
    }
    Ok(())
}

/// Narrowband-FM single-sideband amplitude ratio `s = γ·B_rms/(√2·ω_m)` for a
/// sinusoidal field of rms amplitude `b_rms` (T) at `f_m` (Hz).
///
/// Valid for modulation index `β = 2s ≪ 1`; warns [`Warning::NarrowbandFm`]
/// once `β > 0.1`, where the first-order Bessel truncation error passes 0.1%.
pub fn predict_sideband(b_rms: f64, f_m: f64) -> Result<Warned<f64>, EncodeError> {
    if !(f_m > 0.0 && f_m.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "modulation frequency must be positive, got {f_m} Hz"
        )));
    }
    if !(b_rms >= 0.0 && b_rms.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "field amplitude must be non-negative, got {b_rms} T"
        )));
    }
    let s = GAMMA * b_rms / (std::f64::consts::SQRT_2 * 2.0 * PI * f_m);
    let beta = 2.0 * s;
    Ok(if beta > 0.1 {
        Warned::with(s, Warning::NarrowbandFm { beta })
    } else {
        Warned::clean(s)
    })
}

/// One line of an exact FM spectrum: the component at `f_carrier + order·f_m`
/// with amplitude relative to the *unmodulated* carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidebandLine {
    pub order: i32,
    pub amplitude: f64,
}

/// Exact FM line spectrum of a sinusoidal field via the Jacobi–Anger
/// expansion: the line at order `k` has amplitude `J_k(β)` with
/// `β = √2·γ·B_rms/ω_m`. Orders run `−k_max..=k_max`; negative orders follow
/// `J₋ₖ = (−1)ᵏ·Jₖ`. The amplitudes satisfy `Σ J_k(β)² = 1` (power
/// conservation: FM redistributes, never creates, carrier power).
pub fn sideband_spectrum_exact(
    b_rms: f64,
    f_m: f64,
    k_max: u32,
) -> Result<Vec<SidebandLine>, EncodeError> {
    if !(f_m > 0.0 && f_m.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "modulation frequency must be positive, got {f_m} Hz"
        )));
    }
    if !(b_rms >= 0.0 && b_rms.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "field amplitude must be non-negative, got {b_rms} T"
        )));
    }
    let beta = std::f64::consts::SQRT_2 * GAMMA * b_rms / (2.0 * PI * f_m);
    let mut lines = Vec::with_capacity(2 * k_max as usize + 1);
    for order in -(k_max as i32)..=(k_max as i32) {
        let k = order.unsigned_abs() as i32;
        let jk = libm::jn(k, beta);
        let amplitude = if order < 0 && k % 2 == 1 { -jk } else { jk };
        lines.push(SidebandLine { order, amplitude });
    }
    Ok(lines)
}

/// Mixes a waveform down by `lo_hz`: multiply by `2·cos(2π·f_LO·t)`, then
/// brick-wall away everything above `f_s/4`, keeping the difference band at
/// unit gain. The sample rate is unchanged (no decimation).
///
/// Band requirements, all checked: the new carrier `f_c − f_LO` must lie in
/// `(0, f_s/4)`, and the sum image `f_c + f_LO` must land in
/// `(f_s/4, 3·f_s/4)` so the filter actually removes it (outside that range
/// it aliases back into the kept band).
pub fn mix_down(waveform: &Waveform, lo_hz: f64) -> Result<Waveform, EncodeError> {
    let fs = waveform.sample_rate;
    let fc = waveform.carrier_hz;
    if !(lo_hz > 0.0 && lo_hz.is_finite()) {
        return Err(EncodeError::InvalidParameter(format!(
            "LO frequency must be positive, got {lo_hz} Hz"
        )));
    }
    let f_if = fc - lo_hz;
    if f_if <= 0.0 {
        return Err(EncodeError::MixdownBand(format!(
            "LO at {lo_hz:.6e} Hz is at or above the {fc:.6e} Hz carrier"
        )));
    }
    if f_if >= fs / 4.0 {
        return Err(EncodeError::MixdownBand(format!(
            "intermediate frequency {f_if:.6e} Hz is not below f_s/4 = {:.6e} Hz",
            fs / 4.0
        )));
    }
    let image = fc + lo_hz;
    if image <= fs / 4.0 || image >= 0.75 * fs {
        return Err(EncodeError::MixdownBand(format!(
            "sum image at {image:.6e} Hz cannot be filtered (must lie in \
             ({:.6e}, {:.6e}) Hz)",
            fs / 4.0,
            0.75 * fs
        )));
    }

    let dt = 1.0 / fs;
    let mixed: Vec<f64> = waveform
        .samples
        .iter()
        .enumerate()
        .map(|(i, &s)| 2.0 * s * (2.0 * PI * ((lo_hz * dt * i as f64).rem_euclid(1.0))).cos())
        .collect();
    let n = mixed.len();
    let mut buf = complex_from_real(&mixed);
    drop(mixed);
    let mut engine = FftEngine::new();
    engine.forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        if 4 * k.min(n - k) > n {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    engine.inverse(&mut buf);
    Ok(Waveform {
        samples: buf.iter().map(|c| c.re).collect(),
        sample_rate: fs,
        carrier_hz: f_if,
    })
}

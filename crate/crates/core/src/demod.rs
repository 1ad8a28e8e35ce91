//! Waveform → field demodulation: the inverse of [`crate::encode`].
//!
//! The oscillator record is demodulated in three steps:
//!
//! 1. [`analytic_signal`] — Hilbert transform via the frequency domain:
//!    negative frequencies are zeroed, positive doubled, giving
//!    `a(t) = A(t)·e^{iφ(t)}` whose envelope carries amplitude information
//!    and whose angle carries the FM phase. Separating envelope from phase
//!    this way is valid when the modulation band stays clear of the carrier
//!    (the Bedrosian condition); a [`Warning::BedrosianMargin`] is raised
//!    when significant energy falls outside `[0.1·f_c, 1.9·f_c]`.
//! 2. [`unwrap_phase`] — principal-value angles are unwrapped by removing
//!    2π jumps between consecutive samples. Any true inter-sample step with
//!    magnitude ≥ π is fundamentally ambiguous, so steps within 10⁻³ rad of
//!    π are rejected as an integrity error rather than silently unwrapped.
//! 3. [`recover_field`] — the instantaneous frequency `dφ/dt` is computed by
//!    sixth-order central differences (second-order one-sided stencils on
//!    the [`RecoveredField::edge_len`] samples at each end) and converted
//!    back to tesla: `b_sen = (dφ/dt + 2π·f_LO)/γ − B0`.
//!
//! The differentiator order is matched to the sixth-order quadrature in the
//! encoder so the encode → demodulate round trip is transparent to parts in
//! 10⁴ even for signals at a tenth of Nyquist.

use crate::constants::GAMMA;
use crate::encode::{FieldSeries, Waveform};
use crate::fft::{complex_from_real, FftEngine};
use crate::{Warned, Warning};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Errors from demodulation.
#[derive(Debug, thiserror::Error)]
pub enum DemodError {
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("analytic-signal envelope vanishes at sample {index}; phase is undefined there")]
    ZeroEnvelope { index: usize },
    #[error(
        "phase unwrap integrity: step of {step:.6} rad at sample {index} is within 1e-3 of π, \
         the per-sample phase increment is ambiguous (undersampled or discontinuous phase)"
    )]
    UnwrapIntegrity { index: usize, step: f64 },
    #[error("record too short: need at least {min} samples, got {got}")]
    TooShort { got: usize, min: usize },
}

/// Complex analytic signal `a(t) = A(t)·e^{iφ(t)}` of a real waveform.
#[derive(Debug, Clone)]
pub struct AnalyticSignal {
    pub samples: Vec<Complex64>,
    /// Sample rate, Hz.
    pub sample_rate: f64,
    /// Carrier frequency inherited from the source waveform, Hz.
    pub carrier_hz: f64,
}

impl AnalyticSignal {
    /// Instantaneous envelope `|a(t)|`.
    pub fn envelope(&self) -> Vec<f64> {
        self.samples.iter().map(|c| c.norm()).collect()
    }
}

/// Fraction of positive-frequency energy allowed outside the Bedrosian band
/// before a margin warning is raised.
const BEDROSIAN_ENERGY_FRACTION: f64 = 1e-6;

/// Computes the analytic signal by the frequency-domain Hilbert transform.
///
/// Warns [`Warning::BedrosianMargin`] when more than a 10⁻⁶ fraction of the
/// record's positive-frequency energy lies outside `[0.1·f_c, 1.9·f_c]` —
/// envelope and phase then start to mix and phase demodulation degrades.
pub fn analytic_signal(waveform: &Waveform) -> Result<Warned<AnalyticSignal>, DemodError> {
    let n = waveform.samples.len();
    if n < 16 {
        return Err(DemodError::TooShort { got: n, min: 16 });
    }
    let fs = waveform.sample_rate;
    let fc = waveform.carrier_hz;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(DemodError::InvalidWaveform(format!(
            "sample rate must be positive, got {fs}"
        )));
    }
    if !(fc > 0.0 && fc < fs / 2.0) {
        return Err(DemodError::InvalidWaveform(format!(
            "carrier {fc} Hz outside (0, Nyquist = {} Hz)",
            fs / 2.0
        )));
    }

    let mut buf = complex_from_real(&waveform.samples);
    let mut engine = FftEngine::new();
    engine.forward(&mut buf);

    // Bedrosian margin check on the positive-frequency spectrum.
    let df = fs / n as f64;
    let (f_lo, f_hi) = (0.1 * fc, (1.9 * fc).min(fs / 2.0));
    let mut total = 0.0;
    let mut outside = 0.0;
    let mut worst = (0.0f64, 0.0f64); // (energy, |f − fc|) of worst offender
    for (k, v) in buf.iter().enumerate().take(n / 2 + 1) {
        let f = k as f64 * df;
        let e = v.norm_sqr();
        total += e;
        if f < f_lo || f > f_hi {
            outside += e;
            if e > worst.0 {
                worst = (e, (f - fc).abs());
            }
        }
    }
    let warn = (total > 0.0 && outside / total > BEDROSIAN_ENERGY_FRACTION)
        .then_some(Warning::BedrosianMargin {
            band_hz: worst.1,
            if_hz: fc,
        });

    // Hilbert multipliers: DC and Nyquist ×1, positive ×2, negative ×0.
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || 2 * k == n {
            // unchanged
        } else if 2 * k < n {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    engine.inverse(&mut buf);

    let signal = AnalyticSignal {
        samples: buf,
        sample_rate: fs,
        carrier_hz: fc,
    };
    Ok(match warn {
        Some(w) => Warned::with(signal, w),
        None => Warned::clean(signal),
    })
}

/// Margin below π at which an unwrap step is declared ambiguous.
const UNWRAP_GUARD: f64 = 1e-3;

/// Unwraps the principal-value phase of an analytic signal into a continuous
/// phase record, starting from the principal angle of the first sample.
///
/// Errors with [`DemodError::ZeroEnvelope`] if the envelope vanishes (angle
/// undefined) and [`DemodError::UnwrapIntegrity`] if any principal step
/// reaches within 10⁻³ rad of ±π — beyond that the 2π branch choice is no
/// longer trustworthy. Re-wrapping the output reproduces the input angles
/// exactly up to f64 rounding of the accumulated phase.
pub fn unwrap_phase(signal: &AnalyticSignal) -> Result<Vec<f64>, DemodError> {
    let n = signal.samples.len();
    if n == 0 {
        return Err(DemodError::TooShort { got: 0, min: 1 });
    }
    // Envelope sanity: an angle at a near-zero sample is numerical noise.
    let max_sq = signal
        .samples
        .iter()
        .fold(0.0f64, |m, c| m.max(c.norm_sqr()));
    if max_sq == 0.0 {
        return Err(DemodError::ZeroEnvelope { index: 0 });
    }
    let floor_sq = 1e-24 * max_sq;
    if let Some(index) = signal.samples.iter().position(|c| c.norm_sqr() < floor_sq) {
        return Err(DemodError::ZeroEnvelope { index });
    }

    let mut phase = Vec::with_capacity(n);
    let mut prev_raw = signal.samples[0].arg();
    let mut offset = 0.0f64;
    phase.push(prev_raw);
    for (i, c) in signal.samples.iter().enumerate().skip(1) {
        let raw = c.arg();
        let mut step = raw - prev_raw;
        if step > PI {
            step -= 2.0 * PI;
            offset -= 2.0 * PI;
        } else if step < -PI {
            step += 2.0 * PI;
            offset += 2.0 * PI;
        }
        if step.abs() >= PI - UNWRAP_GUARD {
            return Err(DemodError::UnwrapIntegrity { index: i, step });
        }
        phase.push(raw + offset);
        prev_raw = raw;
    }
    Ok(phase)
}

/// A recovered sensed-field record with its low-order edge region flagged.
#[derive(Debug, Clone)]
pub struct RecoveredField {
    pub series: FieldSeries,
    /// Samples at each end computed by second-order one-sided stencils
    /// instead of the sixth-order interior stencil; exclude them from
    /// precision-critical analyses.
    pub edge_len: usize,
}

// Sixth-order central first-derivative weights over nodes −3..3, and the
// second-order stencils used on the three edge samples at each end.
const D_CENTRAL: [f64; 7] = [
    -1.0 / 60.0,
    3.0 / 20.0,
    -3.0 / 4.0,
    0.0,
    3.0 / 4.0,
    -3.0 / 20.0,
    1.0 / 60.0,
];
const EDGE_LEN: usize = 3;

/// Differentiates the unwrapped phase and converts to tesla:
/// `b_sen = (dφ/dt + 2π·f_LO)/γ − B0`, undoing the encoder's carrier
/// placement (`f_LO` and `B0` as given to [`crate::encode::CarrierSpec`]).
pub fn recover_field(
    phase: &[f64],
    sample_rate: f64,
    lo_frequency_hz: f64,
    b0: f64,
) -> Result<RecoveredField, DemodError> {
    let n = phase.len();
    if n < 7 {
        return Err(DemodError::TooShort { got: n, min: 7 });
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(DemodError::InvalidWaveform(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    let dt = 1.0 / sample_rate;
    let mut dphi = vec![0.0f64; n];
    // One-sided / short-central stencils for the first and last three samples.
    dphi[0] = (-3.0 * phase[0] + 4.0 * phase[1] - phase[2]) / (2.0 * dt);
    dphi[1] = (phase[2] - phase[0]) / (2.0 * dt);
    dphi[2] = (phase[3] - phase[1]) / (2.0 * dt);
    for i in 3..n - 3 {
        let mut acc = 0.0;
        for (j, w) in D_CENTRAL.iter().enumerate() {
            acc += w * phase[i + j - 3];
        }
        dphi[i] = acc / dt;
    }
    dphi[n - 3] = (phase[n - 2] - phase[n - 4]) / (2.0 * dt);
    dphi[n - 2] = (phase[n - 1] - phase[n - 3]) / (2.0 * dt);
    dphi[n - 1] = (3.0 * phase[n - 1] - 4.0 * phase[n - 2] + phase[n - 3]) / (2.0 * dt);

    let two_pi_lo = 2.0 * PI * lo_frequency_hz;
    let samples: Vec<f64> = dphi
        .into_iter()
        .map(|d| (d + two_pi_lo) / GAMMA - b0)
        .collect();
    let series = FieldSeries::new(samples, sample_rate)
        .map_err(|e| DemodError::InvalidWaveform(e.to_string()))?;
    Ok(RecoveredField {
        series,
        edge_len: EDGE_LEN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{synthesize_waveform, CarrierSpec};
    use approx::assert_relative_eq;

    /// A unit-amplitude tone with an integer number of cycles, so the
    /// frequency-domain Hilbert transform is transient free.
    fn tone_waveform(fs: f64, fc: f64, n: usize) -> Waveform {
        let dt = 1.0 / fs;
        Waveform {
            samples: (0..n).map(|i| (2.0 * PI * fc * dt * i as f64).cos()).collect(),
            sample_rate: fs,
            carrier_hz: fc,
        }
    }

    #[test]
    fn analytic_signal_of_cosine_is_complex_exponential() {
        let (fs, fc, n) = (10.0e6, 2.0e6, 1000);
        let a = analytic_signal(&tone_waveform(fs, fc, n)).unwrap();
        assert!(a.is_clean());
        for (i, c) in a.value.samples.iter().enumerate() {
            let ang = 2.0 * PI * fc * i as f64 / fs;
            assert_relative_eq!(c.re, ang.cos(), epsilon = 1e-9);
            assert_relative_eq!(c.im, ang.sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn analytic_envelope_of_tone_is_flat() {
        let a = analytic_signal(&tone_waveform(5.0e6, 1.0e6, 4000)).unwrap();
        for e in a.value.envelope() {
            assert_relative_eq!(e, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn analytic_signal_warns_on_bedrosian_violation() {
        // A second tone at 0.05·fc puts energy below the 0.1·fc edge.
        let (fs, fc, n) = (10.0e6, 2.0e6, 2000);
        let dt = 1.0 / fs;
        let mut w = tone_waveform(fs, fc, n);
        for (i, s) in w.samples.iter_mut().enumerate() {
            *s += 0.01 * (2.0 * PI * 1.0e5 * dt * i as f64).cos();
        }
        let a = analytic_signal(&w).unwrap();
        assert!(matches!(
            a.warnings[0],
            Warning::BedrosianMargin { .. }
        ));
    }

    #[test]
    fn analytic_signal_rejects_bad_inputs() {
        let w = tone_waveform(10.0e6, 2.0e6, 8);
        assert!(matches!(
            analytic_signal(&w),
            Err(DemodError::TooShort { .. })
        ));
        let mut w = tone_waveform(10.0e6, 2.0e6, 64);
        w.carrier_hz = 6.0e6; // above Nyquist
        assert!(analytic_signal(&w).is_err());
    }

    #[test]
    fn unwrap_recovers_linear_phase() {
        let (fs, fc, n) = (10.0e6, 2.0e6, 1000);
        let a = analytic_signal(&tone_waveform(fs, fc, n)).unwrap().value;
        let phase = unwrap_phase(&a).unwrap();
        for (i, &p) in phase.iter().enumerate() {
            let expect = 2.0 * PI * fc * i as f64 / fs;
            assert!((p - expect).abs() < 1e-7, "sample {i}: {p} vs {expect}");
        }
    }

    #[test]
    fn unwrap_then_rewrap_is_identity() {
        let (fs, fc, n) = (10.0e6, 2.3e6, 5000);
        let dt = 1.0 / fs;
        // Direct complex exponential with a slow quadratic chirp on top.
        let samples: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let ang = 2.0 * PI * fc * t + 3.0e9 * t * t;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        let a = AnalyticSignal {
            samples: samples.clone(),
            sample_rate: fs,
            carrier_hz: fc,
        };
        let unwrapped = unwrap_phase(&a).unwrap();
        // Rewrapped phase must equal the raw angle to the rounding of the
        // accumulated phase (|φ| reaches ~1.5e3 rad → ulp ≈ 2e-13).
        for (i, (&u, c)) in unwrapped.iter().zip(&samples).enumerate() {
            let raw = c.arg();
            let mut diff = u - raw;
            diff -= 2.0 * PI * (diff / (2.0 * PI)).round();
            assert!(diff.abs() < 1e-9, "sample {i}: rewrap residual {diff:.3e}");
        }
    }

    #[test]
    fn unwrap_rejects_near_pi_steps() {
        // Carrier at 0.4999·fs: per-sample step 2π·0.4999 wraps to within
        // 1e-3 of π.
        let n = 64;
        let samples: Vec<Complex64> = (0..n)
            .map(|i| {
                let ang = 2.0 * PI * 0.4999 * i as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        let a = AnalyticSignal {
            samples,
            sample_rate: 1.0,
            carrier_hz: 0.4999,
        };
        assert!(matches!(
            unwrap_phase(&a),
            Err(DemodError::UnwrapIntegrity { index: 1, .. })
        ));
    }

    #[test]
    fn unwrap_rejects_zero_envelope() {
        let mut samples = vec![Complex64::new(1.0, 0.0); 32];
        samples[7] = Complex64::new(0.0, 0.0);
        let a = AnalyticSignal {
            samples,
            sample_rate: 1.0,
            carrier_hz: 0.1,
        };
        assert!(matches!(
            unwrap_phase(&a),
            Err(DemodError::ZeroEnvelope { index: 7 })
        ));
    }

    #[test]
    fn recover_field_round_trips_band_edge_tone() {
        // Tone at f_s/20 — the top of the specified round-trip band.
        let fs = 5.0e6;
        let n = 100_000; // 0.02 s; 250 kHz and 1 MHz are integer-cycle
        let f_m = fs / 20.0;
        let amp = 1.0e-9;
        let dt = 1.0 / fs;
        let b_in: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * f_m * dt * i as f64).sin())
            .collect();
        let field = FieldSeries::new(b_in.clone(), fs).unwrap();
        let carrier = CarrierSpec {
            b0: 0.178,
            lo_frequency_hz: 4.983e9,
            amplitude: 1.0,
        };
        let w = synthesize_waveform(&field, &carrier, None).unwrap().value;
        let a = analytic_signal(&w).unwrap().value;
        let phase = unwrap_phase(&a).unwrap();
        let rec = recover_field(&phase, fs, carrier.lo_frequency_hz, carrier.b0).unwrap();
        assert_eq!(rec.series.len(), n);
        let lo = rec.edge_len;
        let hi = n - rec.edge_len;
        let max_err = (lo..hi)
            .map(|i| (rec.series.samples[i] - b_in[i]).abs())
            .fold(0.0, f64::max);
        assert!(
            max_err / amp < 1.0e-4,
            "interior round-trip error {:.3e} relative",
            max_err / amp
        );
    }

    #[test]
    fn recover_field_handles_constant_offset_field() {
        // A constant b_sen shifts the carrier; recovery must return it
        // without edge drama beyond the flagged region.
        let fs = 5.0e6;
        let n = 10_000;
        let b_const = 5.0e-7; // 14 kHz deviation
        let field = FieldSeries::new(vec![b_const; n], fs).unwrap();
        let carrier = CarrierSpec {
            b0: 0.178,
            lo_frequency_hz: 4.983e9,
            amplitude: 1.0,
        };
        let w = synthesize_waveform(&field, &carrier, None).unwrap().value;
        let a = analytic_signal(&w).unwrap().value;
        let phase = unwrap_phase(&a).unwrap();
        let rec = recover_field(&phase, fs, carrier.lo_frequency_hz, carrier.b0).unwrap();
        for i in rec.edge_len..n - rec.edge_len {
            assert_relative_eq!(rec.series.samples[i], b_const, max_relative = 1e-4);
        }
    }

    #[test]
    fn recover_field_rejects_short_and_invalid_input() {
        assert!(matches!(
            recover_field(&[0.0; 6], 1.0, 0.0, 1.0),
            Err(DemodError::TooShort { .. })
        ));
        assert!(recover_field(&[0.0; 10], 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn amplitude_modulation_leaks_below_one_percent() {
        // 10% AM on the carrier must shift the recovered tone field by less
        // than 1% — phase demodulation rejects envelope noise.
        let fs = 5.0e6;
        let n = 100_000;
        let f_m = 35.0e3;
        let amp = 1.0e-9;
        let dt = 1.0 / fs;
        let b_in: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * PI * f_m * dt * i as f64).sin())
            .collect();
        let field = FieldSeries::new(b_in.clone(), fs).unwrap();
        let carrier = CarrierSpec {
            b0: 0.178,
            lo_frequency_hz: 4.983e9,
            amplitude: 1.0,
        };
        let demod = |w: &Waveform| -> Vec<f64> {
            let a = analytic_signal(w).unwrap().value;
            let phase = unwrap_phase(&a).unwrap();
            recover_field(&phase, fs, carrier.lo_frequency_hz, carrier.b0)
                .unwrap()
                .series
                .samples
        };
        let clean = synthesize_waveform(&field, &carrier, None).unwrap().value;
        let mut modulated = clean.clone();
        crate::encode::apply_amplitude_modulation(&mut modulated, 0.10, 10.0e3).unwrap();
        let b_clean = demod(&clean);
        let b_am = demod(&modulated);
        let max_dev = (3..n - 3)
            .map(|i| (b_am[i] - b_clean[i]).abs())
            .fold(0.0, f64::max);
        assert!(
            max_dev / amp < 0.01,
            "AM leakage {:.3e} of tone amplitude",
            max_dev / amp
        );
    }
}

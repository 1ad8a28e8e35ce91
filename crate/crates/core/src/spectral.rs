//! Spectral estimation and sensitivity: amplitude spectral densities of
//! recovered field records, Welch phase-noise spectra, phase-noise ↔ field
//! sensitivity conversions, and chopped-tone detection.
//!
//! Two reading conventions are provided and kept explicit:
//!
//! * **Amplitude mode** ([`AsdSpectrum`]): each bin holds
//!   `√(|X_k|² + |X_{N−k}|²)/Σw`, averaged across segments in power. A
//!   bin-centered sinusoid of rms amplitude `A` reads exactly `A` regardless
//!   of window; broadband noise of one-sided PSD `S` reads `√(S·ENBW)`, so
//!   [`AsdSpectrum::density`] divides by `√ENBW` to give T/√Hz. With the
//!   default Tukey(α = 0.01) window the noise density over-reads a
//!   rectangular segment by only 0.19% (ENBW = 1.0038 bins) while still
//!   suppressing leakage from strongly colored spectra.
//! * **PSD mode** ([`welch_psd`]): one-sided power spectral density
//!   `(|X_k|² + |X_{N−k}|²)/(f_s·Σw²)`, which satisfies Parseval's identity
//!   `Σ PSD·Δf = Σ(w·x)²/Σw²` per segment exactly.
//!
//! Sensitivity follows from phase noise as `η(f) = √2·f·ℒ^½(f)/(γ/2π)`:
//! a field at `f` produces FM sidebands, so the smallest detectable field is
//! the one whose sideband just clears the phase-noise floor. On the Leeson
//! model this has a plateau `η → f_L·√(F·k_B·T/P_s)/(γ/2π)` between the
//! flicker corner and the Leeson frequency.

use crate::constants::GAMMA_HZ_PER_T;
use crate::encode::FieldSeries;
use crate::fft::FftEngine;
use crate::leeson::{leeson_l_half, LeesonError, LeesonModel, PhaseNoiseSpectrum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Errors from spectral estimation.
#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("segment length {segment} exceeds record length {record}")]
    SegmentTooLong { segment: usize, record: usize },
    #[error("band [{lo_hz:.3e}, {hi_hz:.3e}] Hz contains no spectrum bins")]
    EmptyBand { lo_hz: f64, hi_hz: f64 },
    #[error(transparent)]
    Leeson(#[from] LeesonError),
}

/// Analysis window shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    Hann,
    /// Flat center with cosine tapers covering an `alpha` fraction of the
    /// segment (α = 0 is rectangular, α = 1 is Hann).
    Tukey { alpha: f64 },
}

impl WindowKind {
    fn validate(&self) -> Result<(), SpectralError> {
        if let WindowKind::Tukey { alpha } = self {
            if !(0.0..=1.0).contains(alpha) {
                return Err(SpectralError::InvalidInput(format!(
                    "Tukey alpha must be in [0, 1], got {alpha}"
                )));
            }
        }
        Ok(())
    }

    /// Window samples for a segment of length `n`.
    fn samples(&self, n: usize) -> Vec<f64> {
        match *self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect(),
            WindowKind::Tukey { alpha } => {
                let taper = ((alpha * n as f64 / 2.0).floor() as usize).min(n / 2);
                let mut w = vec![1.0; n];
                for i in 0..taper {
                    let x = PI * (2.0 * i as f64 / (alpha * n as f64) - 1.0);
                    let v = 0.5 * (1.0 + x.cos());
                    w[i] = v;
                    w[n - 1 - i] = v;
                }
                w
            }
        }
    }
}

/// Default analysis window: near-rectangular Tukey taper.
pub const DEFAULT_WINDOW: WindowKind = WindowKind::Tukey { alpha: 0.01 };

/// Amplitude-mode spectrum of a field record (see module docs).
#[derive(Debug, Clone, Serialize)]
pub struct AsdSpectrum {
    /// Bin frequencies 0..=f_s/2, Hz.
    pub frequencies_hz: Vec<f64>,
    /// RMS tone-equivalent amplitude per bin, input units (tesla for fields).
    pub amplitude: Vec<f64>,
    /// Equivalent noise bandwidth of one bin, Hz.
    pub enbw_hz: f64,
    /// Bin spacing f_s/N, Hz.
    pub resolution_hz: f64,
    pub window: WindowKind,
    pub segment_len: usize,
    pub n_segments: usize,
}

impl AsdSpectrum {
    /// Noise amplitude spectral density per bin, input units/√Hz.
    pub fn density(&self) -> Vec<f64> {
        let s = 1.0 / self.enbw_hz.sqrt();
        self.amplitude.iter().map(|a| a * s).collect()
    }

    /// RMS of the noise density over `[lo_hz, hi_hz]`, skipping bins within
    /// any of the `exclude` intervals (tone lines and their leakage skirts).
    pub fn band_density_rms(
        &self,
        lo_hz: f64,
        hi_hz: f64,
        exclude: &[(f64, f64)],
    ) -> Result<f64, SpectralError> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (&f, &a) in self.frequencies_hz.iter().zip(&self.amplitude) {
            if f < lo_hz || f > hi_hz {
                continue;
            }
            if exclude.iter().any(|&(x0, x1)| f >= x0 && f <= x1) {
                continue;
            }
            let d = a / self.enbw_hz.sqrt();
            sum += d * d;
            count += 1;
        }
        if count == 0 {
            return Err(SpectralError::EmptyBand {
                lo_hz,
                hi_hz,
            });
        }
        Ok((sum / count as f64).sqrt())
    }

    /// The bin index closest to `f_hz`.
    pub fn bin_of(&self, f_hz: f64) -> usize {
        ((f_hz / self.resolution_hz).round() as usize).min(self.frequencies_hz.len() - 1)
    }
}

fn check_segmenting(
    record: usize,
    segment_len: usize,
    window: &WindowKind,
) -> Result<(), SpectralError> {
    window.validate()?;
    if segment_len < 16 {
        return Err(SpectralError::InvalidInput(format!(
            "segment length must be at least 16, got {segment_len}"
        )));
    }
    if segment_len > record {
        return Err(SpectralError::SegmentTooLong {
            segment: segment_len,
            record,
        });
    }
    Ok(())
}

/// Per-bin mean power `(|X_k|² + |X_{N−k}|²)` of disjoint windowed segments,
/// plus the window sums needed for either normalization. Trailing samples
/// that do not fill a segment are dropped.
fn segment_power(
    x: &[f64],
    segment_len: usize,
    window: &WindowKind,
) -> (Vec<f64>, f64, f64, usize) {
    let w = window.samples(segment_len);
    let w_sum: f64 = w.iter().sum();
    let w_sq: f64 = w.iter().map(|v| v * v).sum();
    let n_segments = x.len() / segment_len;
    let half = segment_len / 2;
    let mut power = vec![0.0f64; half + 1];
    let mut engine = FftEngine::new();
    let mut buf: Vec<Complex64> = Vec::with_capacity(segment_len);
    for s in 0..n_segments {
        let seg = &x[s * segment_len..(s + 1) * segment_len];
        buf.clear();
        buf.extend(
            seg.iter()
                .zip(&w)
                .map(|(&xi, &wi)| Complex64::new(xi * wi, 0.0)),
        );
        engine.forward(&mut buf);
        power[0] += buf[0].norm_sqr();
        for (k, p) in power.iter_mut().enumerate().skip(1) {
            if 2 * k == segment_len {
                *p += buf[k].norm_sqr();
            } else {
                *p += buf[k].norm_sqr() + buf[segment_len - k].norm_sqr();
            }
        }
    }
    for p in &mut power {
        *p /= n_segments as f64;
    }
    (power, w_sum, w_sq, n_segments)
}

/// Amplitude-mode spectrum of a field record: disjoint segments of
/// `segment_len`, windowed, power-averaged. See module docs for the reading
/// conventions.
pub fn field_asd(
    field: &FieldSeries,
    segment_len: usize,
    window: WindowKind,
) -> Result<AsdSpectrum, SpectralError> {
    check_segmenting(field.len(), segment_len, &window)?;
    let fs = field.sample_rate;
    let (power, w_sum, w_sq, n_segments) = segment_power(&field.samples, segment_len, &window);
    let resolution_hz = fs / segment_len as f64;
    let enbw_hz = fs * w_sq / (w_sum * w_sum);
    let frequencies_hz = (0..power.len()).map(|k| k as f64 * resolution_hz).collect();
    let amplitude = power.iter().map(|p| p.sqrt() / w_sum).collect();
    Ok(AsdSpectrum {
        frequencies_hz,
        amplitude,
        enbw_hz,
        resolution_hz,
        window,
        segment_len,
        n_segments,
    })
}

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, Serialize)]
pub struct PsdSpectrum {
    /// Bin frequencies 0..=f_s/2, Hz.
    pub frequencies_hz: Vec<f64>,
    /// One-sided PSD, input units²/Hz.
    pub psd: Vec<f64>,
    pub resolution_hz: f64,
    pub n_segments: usize,
}

/// Welch's method with disjoint segments: one-sided PSD normalized so that
/// `Σ PSD·Δf = mean over segments of Σ(w·x)²/Σw²` exactly (Parseval).
pub fn welch_psd(
    x: &[f64],
    sample_rate: f64,
    segment_len: usize,
    window: WindowKind,
) -> Result<PsdSpectrum, SpectralError> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(SpectralError::InvalidInput(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    check_segmenting(x.len(), segment_len, &window)?;
    let (power, _w_sum, w_sq, n_segments) = segment_power(x, segment_len, &window);
    let resolution_hz = sample_rate / segment_len as f64;
    let frequencies_hz = (0..power.len()).map(|k| k as f64 * resolution_hz).collect();
    let psd = power.iter().map(|p| p / (sample_rate * w_sq)).collect();
    Ok(PsdSpectrum {
        frequencies_hz,
        psd,
        resolution_hz,
        n_segments,
    })
}

/// Single-sideband phase-noise spectrum ℒ(f) = S_φ(f)/2 of an unwrapped
/// phase record, estimated by Welch's method. The DC bin is dropped; any
/// linear phase ramp (the residual carrier) should be removed by the caller
/// first — [`crate::demod::recover_field`] output converted back to phase,
/// or a detrended phase record, both work.
pub fn phase_noise_spectrum(
    phase: &[f64],
    sample_rate: f64,
    segment_len: usize,
    window: WindowKind,
) -> Result<PhaseNoiseSpectrum, SpectralError> {
    let psd = welch_psd(phase, sample_rate, segment_len, window)?;
    let mut offsets = Vec::with_capacity(psd.psd.len() - 1);
    let mut l_db = Vec::with_capacity(psd.psd.len() - 1);
    for (&f, &p) in psd.frequencies_hz.iter().zip(&psd.psd).skip(1) {
        offsets.push(f);
        // ℒ = S_φ/2, floored well below any physical level to keep dB finite.
        l_db.push(10.0 * (p / 2.0).max(1e-300).log10());
    }
    Ok(PhaseNoiseSpectrum::new(offsets, l_db)?)
}

/// Rebins a spectrum onto a logarithmic frequency grid with
/// `points_per_decade` bands, averaging in linear power. Band centers are the
/// geometric means of the member offsets; empty bands are skipped.
pub fn log_bin(
    spectrum: &PhaseNoiseSpectrum,
    points_per_decade: usize,
) -> Result<PhaseNoiseSpectrum, SpectralError> {
    if points_per_decade == 0 {
        return Err(SpectralError::InvalidInput(
            "points_per_decade must be positive".into(),
        ));
    }
    let f0 = spectrum.offsets_hz[0];
    let step = 10.0f64.powf(1.0 / points_per_decade as f64);
    let mut out_f = Vec::new();
    let mut out_l = Vec::new();
    let mut edge = f0;
    let mut i = 0;
    while i < spectrum.len() {
        let hi = edge * step;
        let mut power = 0.0;
        let mut log_f = 0.0;
        let mut count = 0usize;
        while i < spectrum.len() && spectrum.offsets_hz[i] < hi * (1.0 + 1e-12) {
            power += 10.0f64.powf(spectrum.l_dbchz[i] / 10.0);
            log_f += spectrum.offsets_hz[i].ln();
            count += 1;
            i += 1;
        }
        if count > 0 {
            out_f.push((log_f / count as f64).exp());
            out_l.push(10.0 * (power / count as f64).log10());
        }
        edge = hi;
    }
    Ok(PhaseNoiseSpectrum::new(out_f, out_l)?)
}

/// Field sensitivity from a phase-noise level: `η(f) = √2·f·ℒ^½(f)/(γ/2π)`,
/// T/√Hz. The FM sideband of a field at `f` scales as `γ·B/(√2·ω)`, so the
/// field whose sideband equals the noise floor scales back with `√2·f/(γ/2π)`.
pub fn sensitivity_at(model: &LeesonModel, f: f64) -> Result<f64, LeesonError> {
    Ok(std::f64::consts::SQRT_2 * f * leeson_l_half(model, f)? / GAMMA_HZ_PER_T)
}

/// Mid-band sensitivity plateau of the Leeson model,
/// `η → f_L·√(F·k_B·T/P_s)/(γ/2π)` for `f_c ≪ f ≪ f_L`. The full curve sits
/// slightly above this floor everywhere and is minimized near `f ≈ f_L/6`.
pub fn sensitivity_plateau(model: &LeesonModel) -> f64 {
    model.f_leeson * model.floor_psd().sqrt() / GAMMA_HZ_PER_T
}

/// A sensitivity curve η(f) in T/√Hz.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityCurve {
    pub frequencies_hz: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Converts a measured phase-noise spectrum to field sensitivity point by
/// point: `η_i = √2·f_i·10^{ℒ_i/20}/(γ/2π)`.
pub fn sensitivity_from_phase_noise(spectrum: &PhaseNoiseSpectrum) -> SensitivityCurve {
    let eta = spectrum
        .offsets_hz
        .iter()
        .zip(&spectrum.l_dbchz)
        .map(|(&f, &l)| std::f64::consts::SQRT_2 * f * 10.0f64.powf(l / 20.0) / GAMMA_HZ_PER_T)
        .collect();
    SensitivityCurve {
        frequencies_hz: spectrum.offsets_hz.clone(),
        eta,
    }
}

/// Direct DFT of a real record at one arbitrary frequency (not necessarily a
/// bin): `Σ x_i·e^{−2πi·f·t_i}`. The phase argument is reduced modulo one
/// cycle per sample so precision holds over arbitrarily long records.
pub fn single_bin_dft(x: &[f64], sample_rate: f64, f_hz: f64) -> Complex64 {
    let cycles = f_hz / sample_rate;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        let ang = -2.0 * PI * ((cycles * i as f64).rem_euclid(1.0));
        acc += xi * Complex64::new(ang.cos(), ang.sin());
    }
    acc
}

/// RMS amplitude of the sinusoidal component at `f_hz`:
/// `√2·|Σ x·e^{−2πift}|/n`. Exact (to rounding) when the record spans an
/// integer number of cycles of every component present.
pub fn tone_rms_amplitude(x: &[f64], sample_rate: f64, f_hz: f64) -> f64 {
    std::f64::consts::SQRT_2 * single_bin_dft(x, sample_rate, f_hz).norm() / x.len() as f64
}

/// Chopped-tone detection result: tone readings during the ON and OFF
/// half-periods of the chop cycle.
#[derive(Debug, Clone, Serialize)]
pub struct ChopResult {
    /// Power-averaged rms tone amplitude over ON intervals, input units.
    pub on_amplitude: f64,
    /// The same reading over OFF intervals — noise leakage at the tone bin.
    pub off_amplitude: f64,
    /// `on_amplitude / off_amplitude`.
    pub separation: f64,
    pub n_periods: usize,
    /// Per-period rms tone reading during each ON interval, in record order.
    pub on_trace: Vec<f64>,
    /// Per-period rms tone reading during each OFF interval.
    pub off_trace: Vec<f64>,
}

/// Splits a record into the ON/OFF intervals of a square chop envelope
/// (`period_s`, duty cycle `duty`, ON first) and reads the rms amplitude at
/// `tone_hz` in each, power-averaged across periods.
///
/// Readings are exact for tones with an integer number of cycles per
/// interval; otherwise ordinary rectangular-window leakage applies. Partial
/// trailing periods are dropped.
pub fn chop_detect(
    field: &FieldSeries,
    period_s: f64,
    duty: f64,
    tone_hz: f64,
) -> Result<ChopResult, SpectralError> {
    let fs = field.sample_rate;
    if !(period_s > 0.0 && period_s.is_finite()) {
        return Err(SpectralError::InvalidInput(format!(
            "chop period must be positive, got {period_s}"
        )));
    }
    if !(duty > 0.0 && duty < 1.0) {
        return Err(SpectralError::InvalidInput(format!(
            "duty cycle must be in (0, 1), got {duty}"
        )));
    }
    if !(tone_hz > 0.0 && tone_hz < fs / 2.0) {
        return Err(SpectralError::InvalidInput(format!(
            "tone frequency {tone_hz} Hz outside (0, Nyquist)"
        )));
    }
    let per_period = (period_s * fs).round() as usize;
    let on_len = (duty * per_period as f64).round() as usize;
    if on_len == 0 || on_len == per_period {
        return Err(SpectralError::InvalidInput(
            "chop interval shorter than one sample".into(),
        ));
    }
    let n_periods = field.len() / per_period;
    if n_periods == 0 {
        return Err(SpectralError::InvalidInput(format!(
            "record shorter than one chop period ({per_period} samples)"
        )));
    }
    let mut on_power = 0.0;
    let mut off_power = 0.0;
    let mut on_trace = Vec::with_capacity(n_periods);
    let mut off_trace = Vec::with_capacity(n_periods);
    for p in 0..n_periods {
        let start = p * per_period;
        let on = &field.samples[start..start + on_len];
        let off = &field.samples[start + on_len..start + per_period];
        let a_on = tone_rms_amplitude(on, fs, tone_hz);
        let a_off = tone_rms_amplitude(off, fs, tone_hz);
        on_power += a_on * a_on;
        off_power += a_off * a_off;
        on_trace.push(a_on);
        off_trace.push(a_off);
    }
    let on_amplitude = (on_power / n_periods as f64).sqrt();
    let off_amplitude = (off_power / n_periods as f64).sqrt();
    let separation = if off_amplitude > 0.0 {
        on_amplitude / off_amplitude
    } else {
        f64::INFINITY
    };
    Ok(ChopResult {
        on_amplitude,
        off_amplitude,
        separation,
        n_periods,
        on_trace,
        off_trace,
    })
}

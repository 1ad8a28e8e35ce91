//! End-to-end simulation scenarios.
//!
//! A [`Scenario`] declares a complete bench setup — the resonator, the
//! oscillator noise model, the applied field program (tones, optional chop
//! gating), and the digitizer — and [`run_scenario`] executes the full
//! signal chain on it:
//!
//! ```text
//! tones + chop ──► FieldSeries ──► encode (FM carrier + phase noise)
//!        ──► demod (Hilbert → unwrap → d/dt) ──► recovered FieldSeries
//!        ──► spectral (ASD, noise floor, tone bins, chop detection,
//!                      phase-noise fit, sensitivity)
//! ```
//!
//! The runner is deterministic: for a fixed scenario (including its `seed`)
//! it produces bit-identical records and reports on every run. All stages
//! execute on the calling thread. Guard intervals of `guard_s` at each end
//! of the record absorb the demodulator's edge transients and are trimmed
//! before any spectral analysis; the analysis window is `duration_s` long.
//!
//! The local oscillator is tuned so the quiescent oscillator beats down to
//! exactly `if_hz`: `f_LO = γB₀ − f_IF`. Anisotropy offsets of the physical
//! resonance are absorbed into that tuning, so the FM encoding always works
//! about `γB₀` with slope `γ` (the anisotropy shift is field-independent and
//! drops out of the deviation).
//!
//! A real record at an intermediate frequency can only represent noise
//! offsets below `min(f_IF, f_Nyquist − f_IF)`: past that bound the upper
//! sideband aliases off the record and the lower sideband falls below DC, so
//! the measured phase-noise spectrum rolls off regardless of the oscillator.
//! The Leeson fit is therefore restricted to 90% of that bound; the reported
//! spectrum keeps the full range.
//!
//! Errors carry the pipeline stage that raised them, so a failed run can be
//! attributed to configuration, synthesis, demodulation, or analysis.

use serde::{Deserialize, Serialize};

use crate::constants::GAMMA_HZ_PER_T;
use crate::demod::{analytic_signal, recover_field, unwrap_phase, DemodError};
use crate::encode::{
    predict_sideband, synthesize_waveform, CarrierSpec, EncodeError, FieldSeries,
};
use crate::fmr::ResonatorModel;
use crate::leeson::{
    fit_leeson, synthesize_phase_noise, LeesonError, LeesonFit, LeesonModel, PhaseNoiseSpectrum,
    SYNTHESIS_MIN_SAMPLES,
};
use crate::spectral::{
    chop_detect, field_asd, log_bin, phase_noise_spectrum, sensitivity_at, sensitivity_plateau,
    single_bin_dft, AsdSpectrum, ChopResult, SpectralError, WindowKind, DEFAULT_WINDOW,
};
use crate::Warning;

use std::f64::consts::{SQRT_2, TAU};

/// Log-spaced points per decade used when rebinning the measured phase-noise
/// spectrum for fitting and reporting.
const FIT_POINTS_PER_DECADE: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    /// The scenario description itself is unusable (a configuration error).
    #[error("validation stage: {0}")]
    Validate(String),
    /// Phase-noise synthesis failed.
    #[error("noise-synthesis stage: {0}")]
    Noise(LeesonError),
    /// Waveform encoding failed.
    #[error("encode stage: {0}")]
    Encode(EncodeError),
    /// Demodulation failed.
    #[error("demodulation stage: {0}")]
    Demod(DemodError),
    /// Spectral analysis failed.
    #[error("spectral stage: {0}")]
    Spectral(SpectralError),
    /// Fitting the Leeson model to the measured phase noise failed.
    #[error("noise-fit stage: {0}")]
    Fit(LeesonError),
}

/// One applied test tone: `b(t) = √2·b_rms·cos(2πf·t + φ)` along the bias
/// axis, with `t = 0` at the start of the analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub f_hz: f64,
    pub b_rms_tesla: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

/// Square-wave gating of the entire field program: ON for `duty·period_s`,
/// then OFF, repeating, phase-locked to the start of the analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChopSchedule {
    pub period_s: f64,
    pub duty: f64,
}

/// Digitizer and downconversion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    /// Record sample rate, Hz.
    pub sample_rate_hz: f64,
    /// Intermediate frequency the quiescent oscillator beats down to, Hz.
    pub if_hz: f64,
    /// Analysis window length, seconds (excludes guards).
    pub duration_s: f64,
}

/// Spectral-analysis choices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    /// Welch segment length in samples; `0` selects 1 Hz bins
    /// (`segment_len = sample_rate`) capped at half the analysis window.
    #[serde(default)]
    pub segment_len: usize,
    /// Guard interval trimmed from each end of the record, seconds.
    #[serde(default)]
    pub guard_s: f64,
    /// Band over which the noise floor is reported, Hz.
    pub floor_band_hz: [f64; 2],
    /// Lowest offset used when fitting the measured phase noise, Hz.
    pub fit_f_min_hz: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            segment_len: 0,
            guard_s: 0.05,
            floor_band_hz: [20.0e3, 150.0e3],
            fit_f_min_hz: 3.0e3,
        }
    }
}

/// A complete, reproducible description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub resonator: ResonatorModel,
    /// Oscillator phase-noise model; `None` runs a noiseless oscillator.
    #[serde(default)]
    pub leeson: Option<LeesonModel>,
    /// Applied field program.
    #[serde(default)]
    pub tones: Vec<Tone>,
    /// Optional gating of the field program.
    #[serde(default)]
    pub chop: Option<ChopSchedule>,
    pub sampling: Sampling,
    #[serde(default)]
    pub analysis: Analysis,
    /// Seed for all stochastic stages; equal seeds give identical records.
    #[serde(default)]
    pub seed: u64,
}

/// Sample counts and derived frequencies of a validated scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunGeometry {
    /// Guard samples at each end of the record.
    pub n_guard: usize,
    /// Samples in the analysis window.
    pub n_analysis: usize,
    /// Total record length (`n_analysis + 2·n_guard`).
    pub n_total: usize,
    /// Welch segment length actually used.
    pub segment_len: usize,
    /// Physical oscillator frequency `γB₀`, Hz.
    pub carrier_hz: f64,
    /// Local-oscillator frequency `γB₀ − f_IF`, Hz.
    pub lo_frequency_hz: f64,
    /// Peak FM deviation of the programmed tones, Hz.
    pub max_deviation_hz: f64,
}

impl Scenario {
    /// Checks every invariant and returns the derived run geometry.
    pub fn resolve(&self) -> Result<RunGeometry, ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Validate(msg));

        self.resonator
            .validate()
            .map_err(|e| ScenarioError::Validate(format!("resonator: {e}")))?;
        if let Some(m) = &self.leeson {
            m.validate()
                .map_err(|e| ScenarioError::Validate(format!("leeson: {e}")))?;
        }

        let fs = self.sampling.sample_rate_hz;
        if !(fs > 0.0 && fs.is_finite()) {
            return bad(format!("sample rate must be positive, got {fs}"));
        }
        let f_if = self.sampling.if_hz;
        if !(f_if > 0.0 && f_if < fs / 2.0) {
            return bad(format!(
                "intermediate frequency must lie in (0, Nyquist) = (0, {}), got {f_if}",
                fs / 2.0
            ));
        }
        let dur = self.sampling.duration_s;
        if !(dur > 0.0 && dur.is_finite()) {
            return bad(format!("duration must be positive, got {dur}"));
        }
        let guard = self.analysis.guard_s;
        if !(guard >= 0.0 && guard.is_finite()) {
            return bad(format!("guard interval must be non-negative, got {guard}"));
        }

        let n_analysis = (dur * fs).round() as usize;
        let n_guard = (guard * fs).round() as usize;
        let n_total = n_analysis + 2 * n_guard;

        let segment_len = if self.analysis.segment_len == 0 {
            (fs.round() as usize).min(n_analysis / 2).max(16)
        } else {
            self.analysis.segment_len
        };
        if segment_len < 16 {
            return bad(format!(
                "segment length must be at least 16 samples, got {segment_len}"
            ));
        }
        if n_analysis < 2 * segment_len {
            return bad(format!(
                "analysis window must cover at least two spectral segments: \
                 {n_analysis} samples < 2 × {segment_len}"
            ));
        }
        if self.leeson.is_some() && n_total < SYNTHESIS_MIN_SAMPLES {
            return bad(format!(
                "phase-noise synthesis needs at least {SYNTHESIS_MIN_SAMPLES} samples, \
                 record has {n_total}"
            ));
        }

        let [band_lo, band_hi] = self.analysis.floor_band_hz;
        if !(band_lo > 0.0 && band_lo < band_hi && band_hi <= fs / 2.0) {
            return bad(format!(
                "noise-floor band must satisfy 0 < lo < hi ≤ Nyquist, got [{band_lo}, {band_hi}]"
            ));
        }
        if !(self.analysis.fit_f_min_hz > 0.0) {
            return bad(format!(
                "fit lower offset must be positive, got {}",
                self.analysis.fit_f_min_hz
            ));
        }
        if self.leeson.is_some() {
            let f_max_fit = 0.9 * f_if.min(fs / 2.0 - f_if);
            if self.analysis.fit_f_min_hz >= f_max_fit {
                return bad(format!(
                    "fit lower offset {} Hz reaches beyond the demodulable band \
                     (0.9·min(f_IF, f_N − f_IF) = {f_max_fit} Hz)",
                    self.analysis.fit_f_min_hz
                ));
            }
        }

        let mut peak_field = 0.0;
        for (i, t) in self.tones.iter().enumerate() {
            if !(t.f_hz > 0.0 && t.f_hz < fs / 2.0) {
                return bad(format!(
                    "tone {i}: frequency must lie in (0, Nyquist), got {} Hz",
                    t.f_hz
                ));
            }
            if !(t.b_rms_tesla >= 0.0 && t.b_rms_tesla.is_finite()) {
                return bad(format!(
                    "tone {i}: rms amplitude must be non-negative, got {} T",
                    t.b_rms_tesla
                ));
            }
            if !t.phase_rad.is_finite() {
                return bad(format!("tone {i}: phase must be finite"));
            }
            peak_field += SQRT_2 * t.b_rms_tesla;
        }
        let max_deviation_hz = GAMMA_HZ_PER_T * peak_field;
        if f_if - max_deviation_hz <= 0.0 || f_if + max_deviation_hz >= fs / 2.0 {
            return bad(format!(
                "field program drives the instantaneous frequency out of (0, Nyquist): \
                 {f_if} ± {max_deviation_hz} Hz"
            ));
        }

        if let Some(chop) = &self.chop {
            if !(chop.period_s > 0.0 && chop.period_s.is_finite()) {
                return bad(format!("chop period must be positive, got {}", chop.period_s));
            }
            if !(chop.duty > 0.0 && chop.duty < 1.0) {
                return bad(format!("chop duty must lie in (0, 1), got {}", chop.duty));
            }
            let per = (chop.period_s * fs).round() as usize;
            let on_len = (chop.duty * per as f64).round() as usize;
            if per < 2 || on_len == 0 || on_len == per {
                return bad("chop interval shorter than one sample".into());
            }
            if n_analysis < per {
                return bad(format!(
                    "analysis window must cover at least one chop period \
                     ({per} samples), has {n_analysis}"
                ));
            }
        }

        let carrier_hz = GAMMA_HZ_PER_T * self.resonator.b0;
        let lo_frequency_hz = carrier_hz - f_if;
        if lo_frequency_hz <= 0.0 {
            return bad(format!(
                "LO frequency γB₀ − f_IF = {lo_frequency_hz} Hz must be positive"
            ));
        }

        Ok(RunGeometry {
            n_guard,
            n_analysis,
            n_total,
            segment_len,
            carrier_hz,
            lo_frequency_hz,
            max_deviation_hz,
        })
    }

    /// Convenience wrapper over [`Scenario::resolve`] discarding the geometry.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.resolve().map(|_| ())
    }
}

/// Reading of one programmed tone out of the recovered-field spectrum and the
/// encoded waveform.
#[derive(Debug, Clone, Serialize)]
pub struct ToneReading {
    /// Programmed frequency, Hz.
    pub f_hz: f64,
    /// Center of the spectrum bin actually read, Hz.
    pub bin_hz: f64,
    pub configured_rms_tesla: f64,
    /// RMS amplitude of the ASD bin nearest `f_hz` in the recovered field.
    pub measured_rms_tesla: f64,
    /// Narrowband-FM prediction of the single-sideband/carrier amplitude
    /// ratio for this tone.
    pub predicted_sideband_rel: f64,
    /// `|X(f_IF + f)| / |X(f_IF)|` measured on the encoded waveform.
    pub measured_sideband_upper_rel: f64,
    /// `|X(f_IF − f)| / |X(f_IF)|` measured on the encoded waveform.
    pub measured_sideband_lower_rel: f64,
}

/// Chop detection outcome for one tone.
#[derive(Debug, Clone, Serialize)]
pub struct ChopReading {
    pub f_hz: f64,
    #[serde(flatten)]
    pub result: ChopResult,
}

/// Noise floor of the recovered field over the configured band, tone bins
/// excluded.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseFloor {
    pub band_hz: [f64; 2],
    pub asd_tesla_per_sqrt_hz: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToneSensitivity {
    pub f_hz: f64,
    pub eta_tesla_per_sqrt_hz: f64,
}

/// Closed-form sensitivity of the configured oscillator model.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityReport {
    /// White-noise plateau `f_L·√(FkT/P_s)/γ`, T/√Hz.
    pub plateau_tesla_per_sqrt_hz: f64,
    /// Best sensitivity over the floor band.
    pub minimum_tesla_per_sqrt_hz: f64,
    /// Offset frequency of the minimum, Hz.
    pub minimum_at_hz: f64,
    pub at_tones: Vec<ToneSensitivity>,
}

/// Everything the run measured, ready for JSON serialization. Field order is
/// fixed by this struct, so serialized reports are byte-stable per seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Echo of the scenario that produced this report.
    pub config: Scenario,
    pub geometry: RunGeometry,
    /// Spectrum bin spacing, Hz.
    pub resolution_hz: f64,
    /// Validity notices raised anywhere in the pipeline, in stage order.
    pub warnings: Vec<Warning>,
    pub noise_floor: NoiseFloor,
    pub tones: Vec<ToneReading>,
    pub chop: Option<Vec<ChopReading>>,
    /// Leeson model fitted to the phase noise measured back out of the
    /// record (only when a noise model was configured).
    pub leeson_fit: Option<LeesonFit>,
    pub sensitivity: Option<SensitivityReport>,
}

/// Full output of a run: the report plus the bulk artifacts.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    /// Recovered field over the analysis window (guards trimmed).
    pub field: FieldSeries,
    /// ASD of the recovered field.
    pub asd: AsdSpectrum,
    /// Log-binned measured phase-noise spectrum (when noise was configured).
    pub phase_noise: Option<PhaseNoiseSpectrum>,
}

/// Builds the applied field record: the tone sum, chop-gated, with `t = 0`
/// at the start of the analysis window.
fn build_field(scenario: &Scenario, geo: &RunGeometry) -> Vec<f64> {
    let fs = scenario.sampling.sample_rate_hz;
    let n0 = geo.n_guard as f64;
    let mut samples = vec![0.0f64; geo.n_total];
    for tone in &scenario.tones {
        let amp = SQRT_2 * tone.b_rms_tesla;
        if amp == 0.0 {
            continue;
        }
        let cycles_per_sample = tone.f_hz / fs;
        for (i, s) in samples.iter_mut().enumerate() {
            let cycles = cycles_per_sample * (i as f64 - n0);
            *s += amp * (TAU * cycles.rem_euclid(1.0) + tone.phase_rad).cos();
        }
    }
    if let Some(chop) = &scenario.chop {
        let per = (chop.period_s * fs).round() as i64;
        let on_len = (chop.duty * per as f64).round() as i64;
        let n0 = geo.n_guard as i64;
        for (i, s) in samples.iter_mut().enumerate() {
            if (i as i64 - n0).rem_euclid(per) >= on_len {
                *s = 0.0;
            }
        }
    }
    samples
}

/// Executes the scenario end to end and returns the report plus artifacts.
///
/// Stages run in order — noise synthesis, field program, FM encoding,
/// demodulation, spectral analysis, noise fit — each feeding the next on a
/// single thread; intermediate records are dropped as soon as the next stage
/// has consumed them, which keeps peak memory near two records' worth even
/// for multi-second captures.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    let geo = scenario.resolve()?;
    let fs = scenario.sampling.sample_rate_hz;
    let f_if = scenario.sampling.if_hz;
    let (a, b) = (geo.n_guard, geo.n_guard + geo.n_analysis);
    let mut warnings: Vec<Warning> = Vec::new();

    // Oscillator phase noise for the whole record.
    let phase_noise = match &scenario.leeson {
        Some(model) => {
            let noise = synthesize_phase_noise(model, fs, geo.n_total, scenario.seed)
                .map_err(ScenarioError::Noise)?;
            warnings.extend(noise.warnings.iter().cloned());
            Some(noise.value)
        }
        None => None,
    };

    // Field program → FM waveform at the intermediate frequency.
    let field_in =
        FieldSeries::new(build_field(scenario, &geo), fs).map_err(ScenarioError::Encode)?;
    let carrier = CarrierSpec {
        b0: scenario.resonator.b0,
        lo_frequency_hz: geo.lo_frequency_hz,
        amplitude: 1.0,
    };
    let wave = synthesize_waveform(&field_in, &carrier, phase_noise.as_deref())
        .map_err(ScenarioError::Encode)?;
    warnings.extend(wave.warnings.iter().cloned());
    let wave = wave.value;
    drop(field_in);
    drop(phase_noise);

    // Sideband bookkeeping straight off the encoded waveform, before the
    // record is consumed by demodulation.
    let wave_analysis = &wave.samples[a..b];
    let carrier_amp = single_bin_dft(wave_analysis, fs, f_if).norm();
    let mut sidebands = Vec::with_capacity(scenario.tones.len());
    for tone in &scenario.tones {
        let predicted = if tone.b_rms_tesla > 0.0 {
            let p = predict_sideband(tone.b_rms_tesla, tone.f_hz)
                .map_err(ScenarioError::Encode)?;
            warnings.extend(p.warnings.iter().cloned());
            p.value
        } else {
            0.0
        };
        let upper = single_bin_dft(wave_analysis, fs, f_if + tone.f_hz).norm();
        let lower = single_bin_dft(wave_analysis, fs, f_if - tone.f_hz).norm();
        sidebands.push((predicted, upper / carrier_amp, lower / carrier_amp));
    }

    // Demodulation back to a field record.
    let analytic = analytic_signal(&wave).map_err(ScenarioError::Demod)?;
    warnings.extend(analytic.warnings.iter().cloned());
    let analytic = analytic.value;
    drop(wave);
    let mut phase = unwrap_phase(&analytic).map_err(ScenarioError::Demod)?;
    drop(analytic);
    let recovered = recover_field(&phase, fs, geo.lo_frequency_hz, scenario.resonator.b0)
        .map_err(ScenarioError::Demod)?;

    // Trim the guards in place; t = 0 is the start of the analysis window.
    let mut samples = recovered.series.samples;
    samples.copy_within(a..b, 0);
    samples.truncate(geo.n_analysis);
    let field = FieldSeries::new(samples, fs).map_err(ScenarioError::Encode)?;

    // Spectral analysis of the recovered field.
    let asd = field_asd(&field, geo.segment_len, DEFAULT_WINDOW).map_err(ScenarioError::Spectral)?;

    // Tone bins are excluded from the floor, padded for chop sidebands
    // (spaced 1/period) when the program is gated.
    let exclusion_halfwidth = 3.0 * asd.resolution_hz
        + scenario.chop.map_or(0.0, |c| 8.0 / c.period_s);
    let exclusions: Vec<(f64, f64)> = scenario
        .tones
        .iter()
        .map(|t| (t.f_hz - exclusion_halfwidth, t.f_hz + exclusion_halfwidth))
        .collect();
    let [band_lo, band_hi] = scenario.analysis.floor_band_hz;
    let floor = asd
        .band_density_rms(band_lo, band_hi, &exclusions)
        .map_err(ScenarioError::Spectral)?;

    let tones: Vec<ToneReading> = scenario
        .tones
        .iter()
        .zip(&sidebands)
        .map(|(t, &(predicted, upper, lower))| {
            let bin = asd.bin_of(t.f_hz);
            ToneReading {
                f_hz: t.f_hz,
                bin_hz: asd.frequencies_hz[bin],
                configured_rms_tesla: t.b_rms_tesla,
                measured_rms_tesla: asd.amplitude[bin],
                predicted_sideband_rel: predicted,
                measured_sideband_upper_rel: upper,
                measured_sideband_lower_rel: lower,
            }
        })
        .collect();

    let chop = match &scenario.chop {
        Some(c) => {
            let mut readings = Vec::with_capacity(scenario.tones.len());
            for t in &scenario.tones {
                let result = chop_detect(&field, c.period_s, c.duty, t.f_hz)
                    .map_err(ScenarioError::Spectral)?;
                readings.push(ChopReading { f_hz: t.f_hz, result });
            }
            Some(readings)
        }
        None => None,
    };

    // Phase-noise fit: strip the IF ramp from the unwrapped phase and fit
    // the Leeson model to the Welch spectrum of the residual.
    let (leeson_fit, phase_noise_out) = match &scenario.leeson {
        Some(model) => {
            let cycles_per_sample = f_if / fs;
            let phi0 = phase[a];
            for (i, p) in phase[a..b].iter_mut().enumerate() {
                *p -= phi0 + TAU * cycles_per_sample * i as f64;
            }
            let spectrum =
                phase_noise_spectrum(&phase[a..b], fs, geo.segment_len, WindowKind::Hann)
                    .map_err(ScenarioError::Spectral)?;
            // Programmed tones are signal, not oscillator noise: drop their
            // lines (same exclusion intervals as the floor) before fitting.
            let spectrum = if exclusions.is_empty() {
                spectrum
            } else {
                let mut offsets = Vec::with_capacity(spectrum.len());
                let mut l_db = Vec::with_capacity(spectrum.len());
                for (&f, &l) in spectrum.offsets_hz.iter().zip(&spectrum.l_dbchz) {
                    if !exclusions.iter().any(|&(x0, x1)| f >= x0 && f <= x1) {
                        offsets.push(f);
                        l_db.push(l);
                    }
                }
                PhaseNoiseSpectrum::new(offsets, l_db)
                    .map_err(|e| ScenarioError::Spectral(SpectralError::from(e)))?
            };
            let binned =
                log_bin(&spectrum, FIT_POINTS_PER_DECADE).map_err(ScenarioError::Spectral)?;
            drop(spectrum);
            // A real record at IF only represents offsets below
            // min(f_IF, f_Nyquist − f_IF): beyond that the upper sideband
            // aliases and the lower one falls below DC. Both the fit and the
            // exported spectrum stay inside 90% of that bound — bins past it
            // hold digitizer artifacts, not oscillator noise, and would poison
            // any downstream refit.
            let f_max = 0.9 * f_if.min(fs / 2.0 - f_if);
            let mut offsets = Vec::new();
            let mut l_db = Vec::new();
            for (&f, &l) in binned.offsets_hz.iter().zip(&binned.l_dbchz) {
                if f <= f_max {
                    offsets.push(f);
                    l_db.push(l);
                }
            }
            let kept = PhaseNoiseSpectrum::new(offsets, l_db)
                .map_err(|e| ScenarioError::Spectral(SpectralError::from(e)))?;
            let fit = fit_leeson(
                &kept,
                model.p_sustain,
                model.temperature,
                scenario.analysis.fit_f_min_hz,
            )
            .map_err(ScenarioError::Fit)?;
            (Some(fit), Some(kept))
        }
        None => (None, None),
    };
    drop(phase);

    // Closed-form sensitivity of the configured model over the floor band.
    let sensitivity = match &scenario.leeson {
        Some(model) => {
            let mut best = (f64::INFINITY, band_lo);
            let steps = 4000;
            let ratio = (band_hi / band_lo).powf(1.0 / steps as f64);
            let mut f = band_lo;
            for _ in 0..=steps {
                let eta = sensitivity_at(model, f)
                    .map_err(|e| ScenarioError::Spectral(SpectralError::from(e)))?;
                if eta < best.0 {
                    best = (eta, f);
                }
                f *= ratio;
            }
            let mut at_tones = Vec::with_capacity(scenario.tones.len());
            for t in &scenario.tones {
                at_tones.push(ToneSensitivity {
                    f_hz: t.f_hz,
                    eta_tesla_per_sqrt_hz: sensitivity_at(model, t.f_hz)
                        .map_err(|e| ScenarioError::Spectral(SpectralError::from(e)))?,
                });
            }
            Some(SensitivityReport {
                plateau_tesla_per_sqrt_hz: sensitivity_plateau(model),
                minimum_tesla_per_sqrt_hz: best.0,
                minimum_at_hz: best.1,
                at_tones,
            })
        }
        None => None,
    };

    let report = RunReport {
        config: scenario.clone(),
        geometry: geo,
        resolution_hz: asd.resolution_hz,
        warnings,
        noise_floor: NoiseFloor {
            band_hz: [band_lo, band_hi],
            asd_tesla_per_sqrt_hz: floor,
        },
        tones,
        chop,
        leeson_fit,
        sensitivity,
    };

    Ok(RunOutput {
        report,
        field,
        asd,
        phase_noise: phase_noise_out,
    })
}

//! Oscillator phase noise: Leeson-model evaluation, fitting, the
//! regenerative "Leeson effect" transfer, and seeded synthesis of phase-noise
//! time series.
//!
//! The single-sideband phase-noise amplitude spectral density of a
//! self-sustained oscillator at offset `f_m` from the carrier is modeled as
//!
//! ```text
//! ℒ^½(f_m) = sqrt{ ½ · [f_L²/f_m² + 1] · [f_c/f_m + 1] · F·k_B·T/P_s }
//! ```
//!
//! where `f_L` is the Leeson frequency (half the loaded linewidth of the
//! frequency discriminator, in Hz), `f_c` the amplifier flicker corner, `F`
//! the wideband noise factor, `P_s` the power reaching the sustaining
//! amplifier, and `T` the temperature. ℒ(f) is the single-sideband
//! convention: the positive-frequency half of the double-sided phase
//! spectrum, i.e. ℒ = S_φ/2 with S_φ the one-sided phase PSD in rad²/Hz.
//!
//! Physically the model is regenerative: additive in-loop phase fluctuations
//! S_ψ re-circulate through the resonator and are amplified below `f_L`
//! ([`leeson_effect`]), while above `f_L` they pass through unchanged. The
//! buffer amplifier and mixer outside the loop contribute much less and are
//! not modeled.

use crate::constants::K_BOLTZMANN;
use crate::fft::{complex_from_real, FftEngine};
use crate::{Warned, Warning};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Errors from phase-noise evaluation, fitting, and synthesis.
#[derive(Debug, thiserror::Error)]
pub enum LeesonError {
    #[error("invalid Leeson model: {0}")]
    InvalidModel(String),
    #[error("offset frequency must be positive, got {0} Hz")]
    OffsetDomain(f64),
    #[error("invalid phase-noise spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("need at least {min} spectrum points at or above f_min, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error(
        "degenerate data: spectrum varies by only {range_db:.2} dB above f_min, \
         the Leeson frequency is unidentifiable"
    )]
    DegenerateData { range_db: f64 },
    #[error("fit did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("phase-noise synthesis parameters: {0}")]
    SynthesisParams(String),
}

/// Leeson phase-noise model parameters. All fields strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeesonModel {
    /// Leeson frequency f_L, Hz (κ_L/4π of the loaded discriminator).
    pub f_leeson: f64,
    /// Flicker corner f_c, Hz.
    pub f_corner: f64,
    /// Wideband noise factor F, dimensionless.
    pub noise_factor: f64,
    /// Sustaining-amplifier input power P_s, watts.
    pub p_sustain: f64,
    /// Temperature, kelvin.
    pub temperature: f64,
}

impl LeesonModel {
    pub fn validate(&self) -> Result<(), LeesonError> {
        let fields = [
            ("f_leeson", self.f_leeson),
            ("f_corner", self.f_corner),
            ("noise_factor", self.noise_factor),
            ("p_sustain", self.p_sustain),
            ("temperature", self.temperature),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LeesonError::InvalidModel(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// White phase-noise floor coefficient F·k_B·T/P_s (the one-sided phase
    /// PSD far above f_L and f_c), rad²/Hz.
    pub fn floor_psd(&self) -> f64 {
        self.noise_factor * K_BOLTZMANN * self.temperature / self.p_sustain
    }

    /// The fitted demonstration-oscillator model this simulator ships with:
    /// f_L = 600 kHz, f_c = 6.6 kHz, F = 8 at P_s = 2 mW and 300 K.
    pub fn reference() -> Self {
        LeesonModel {
            f_leeson: 600.0e3,
            f_corner: 6.6e3,
            noise_factor: 8.0,
            p_sustain: 2.0e-3,
            temperature: 300.0,
        }
    }
}

/// A measured (or synthesized) single-sideband phase-noise spectrum:
/// strictly increasing positive offsets with ℒ in dBc/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseSpectrum {
    pub offsets_hz: Vec<f64>,
    pub l_dbchz: Vec<f64>,
}

impl PhaseNoiseSpectrum {
    pub fn new(offsets_hz: Vec<f64>, l_dbchz: Vec<f64>) -> Result<Self, LeesonError> {
        if offsets_hz.len() != l_dbchz.len() {
            return Err(LeesonError::InvalidSpectrum(format!(
                "offset and level arrays differ in length: {} vs {}",
                offsets_hz.len(),
                l_dbchz.len()
            )));
        }
        if offsets_hz.is_empty() {
            return Err(LeesonError::InvalidSpectrum("empty spectrum".into()));
        }
        if offsets_hz[0] <= 0.0 {
            return Err(LeesonError::InvalidSpectrum(
                "offsets must be positive".into(),
            ));
        }
        if offsets_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LeesonError::InvalidSpectrum(
                "offsets must be strictly increasing".into(),
            ));
        }
        if offsets_hz
            .iter()
            .chain(l_dbchz.iter())
            .any(|v| !v.is_finite())
        {
            return Err(LeesonError::InvalidSpectrum(
                "spectrum contains non-finite values".into(),
            ));
        }
        Ok(PhaseNoiseSpectrum {
            offsets_hz,
            l_dbchz,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets_hz.is_empty()
    }
}

/// ℒ^½(f_m): single-sideband phase-noise *amplitude* spectral density,
/// carrier-normalized, 1/√Hz. Errors for f_m ≤ 0.
pub fn leeson_l_half(model: &LeesonModel, f_m: f64) -> Result<f64, LeesonError> {
    if !(f_m > 0.0) {
        return Err(LeesonError::OffsetDomain(f_m));
    }
    let fl = model.f_leeson / f_m;
    let shape = (fl * fl + 1.0) * (model.f_corner / f_m + 1.0);
    Ok((0.5 * shape * model.floor_psd()).sqrt())
}

/// ℒ(f_m) in dBc/Hz: 10·log₁₀ of the power quantity (ℒ^½)².
pub fn leeson_l_db(model: &LeesonModel, f_m: f64) -> Result<f64, LeesonError> {
    Ok(20.0 * leeson_l_half(model, f_m)?.log10())
}

/// The Leeson effect: output phase PSD from the PSD of additive phase shifts
/// ψ inside the oscillator loop, S_φ = [1 + f_L²/f_m²]·S_ψ (rad²/Hz in,
/// rad²/Hz out).
pub fn leeson_effect(s_psi: f64, f_m: f64, f_leeson: f64) -> f64 {
    let r = f_leeson / f_m;
    (1.0 + r * r) * s_psi
}

/// Result of [`fit_leeson`]: the fitted model plus fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeesonFit {
    pub model: LeesonModel,
    /// RMS of the dB residuals over the fitted points.
    pub residual_rms_db: f64,
    pub iterations: usize,
    pub n_points: usize,
}

const FIT_MAX_ITERATIONS: usize = 100;
const FIT_MIN_POINTS: usize = 10;

/// Fits (f_L, f_c, F) of the Leeson model to a measured spectrum by
/// least-squares on the dB residuals, restricted to offsets ≥ `f_min`.
///
/// `p_sustain` (W) and `temperature` (K) are known externally and held
/// fixed; the fit runs over (ln f_L, ln f_c, ln F) with a Levenberg-style
/// damped Gauss–Newton iteration seeded by a linear least-squares solve in
/// the power domain (the model is linear in 1/f³, 1/f², 1/f, 1 there). Fits
/// in log-log space with equal weights — phase-noise data spans decades and
/// nothing privileges any octave.
pub fn fit_leeson(
    spectrum: &PhaseNoiseSpectrum,
    p_sustain: f64,
    temperature: f64,
    f_min: f64,
) -> Result<LeesonFit, LeesonError> {
    if !(p_sustain > 0.0 && temperature > 0.0) {
        return Err(LeesonError::InvalidModel(format!(
            "p_sustain and temperature must be positive, got {p_sustain} W, {temperature} K"
        )));
    }
    let mut f = Vec::new();
    let mut db = Vec::new();
    for (&fi, &li) in spectrum.offsets_hz.iter().zip(&spectrum.l_dbchz) {
        if fi >= f_min {
            f.push(fi);
            db.push(li);
        }
    }
    if f.len() < FIT_MIN_POINTS {
        return Err(LeesonError::TooFewPoints {
            got: f.len(),
            min: FIT_MIN_POINTS,
        });
    }
    let range_db = db.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - db.iter().cloned().fold(f64::INFINITY, f64::min);
    if range_db < 1.0 {
        return Err(LeesonError::DegenerateData { range_db });
    }

    let kt = K_BOLTZMANN * temperature / p_sustain;
    // θ = (ln f_L, ln f_c, ln F).
    let mut theta = initial_guess(&f, &db, kt);
    let model_db = |theta: &[f64; 3], fi: f64| -> f64 {
        let u = (theta[0].exp() / fi).powi(2);
        let v = theta[1].exp() / fi;
        10.0 * (0.5 * (u + 1.0) * (v + 1.0) * theta[2].exp() * kt).log10()
    };
    let cost = |theta: &[f64; 3]| -> f64 {
        f.iter()
            .zip(&db)
            .map(|(&fi, &di)| {
                let r = model_db(theta, fi) - di;
                r * r
            })
            .sum()
    };

    let dbl = 10.0 / std::f64::consts::LN_10;
    let mut lambda = 1e-3;
    let mut c = cost(&theta);
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..FIT_MAX_ITERATIONS {
        iterations = iter + 1;
        // Normal equations JᵀJ·Δ = −Jᵀr with analytic Jacobian in θ.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&fi, &di) in f.iter().zip(&db) {
            let u = (theta[0].exp() / fi).powi(2);
            let v = theta[1].exp() / fi;
            let j = [
                dbl * 2.0 * u / (u + 1.0),
                dbl * v / (v + 1.0),
                dbl,
            ];
            let r = model_db(&theta, fi) - di;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        // Damped step; retry with stronger damping until the cost drops.
        let mut stepped = false;
        for _ in 0..12 {
            let mut a = jtj;
            for d in 0..3 {
                a[d][d] += lambda * jtj[d][d].max(1e-12);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2]];
            let Some(delta) = solve3(a, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = theta;
            for d in 0..3 {
                // ln-space bounds keep exp() sane on wild data.
                trial[d] = (theta[d] + delta[d]).clamp(-40.0, 40.0);
            }
            let ct = cost(&trial);
            if ct <= c {
                let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
                let rel_drop = if c > 0.0 { (c - ct) / c } else { 0.0 };
                theta = trial;
                c = ct;
                lambda = (lambda / 3.0).max(1e-12);
                stepped = true;
                if step < 1e-10 || rel_drop < 1e-14 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // No downhill step found at any damping: we are at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(LeesonError::NotConverged(FIT_MAX_ITERATIONS));
    }

    let model = LeesonModel {
        f_leeson: theta[0].exp(),
        f_corner: theta[1].exp(),
        noise_factor: theta[2].exp(),
        p_sustain,
        temperature,
    };
    model.validate()?;
    Ok(LeesonFit {
        model,
        residual_rms_db: (c / f.len() as f64).sqrt(),
        iterations,
        n_points: f.len(),
    })
}

/// Linear least squares in the power domain for the starting point:
/// ℒ = c₀ + c₁/f + c₂/f² + c₃/f³ with c₀ = A/2, c₁ = A·f_c/2, c₂ = A·f_L²/2.
/// Rows are weighted by 1/ℒ so every decade counts comparably.
fn initial_guess(f: &[f64], db: &[f64], kt: f64) -> [f64; 3] {
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    for (&fi, &di) in f.iter().zip(db) {
        let y = 10.0f64.powf(di / 10.0);
        let w = 1.0 / y.max(1e-300);
        let basis = [1.0, 1.0 / fi, 1.0 / (fi * fi), 1.0 / (fi * fi * fi)];
        for a in 0..4 {
            atb[a] += w * w * basis[a] * y;
            for b in 0..4 {
                ata[a][b] += w * w * basis[a] * basis[b];
            }
        }
    }
    let sol = solve4(ata, atb);
    let fallback_floor = db.iter().cloned().fold(f64::INFINITY, f64::min);
    let fallback_a = 2.0 * 10.0f64.powf(fallback_floor / 10.0);
    let geo_mid = (f[0] * f[f.len() - 1]).sqrt();
    let (a2, fc, fl) = match sol {
        Some(c) if c[0] > 0.0 => {
            let a2 = 2.0 * c[0];
            let fc = if c[1] > 0.0 { c[1] / c[0] } else { f[0] };
            let fl = if c[2] > 0.0 {
                (c[2] / c[0]).sqrt()
            } else {
                geo_mid
            };
            (a2, fc, fl)
        }
        _ => (fallback_a, f[0], geo_mid),
    };
    let big_f = (a2 / kt).max(1e-6);
    [fl.max(1e-3).ln(), fc.max(1e-3).ln(), big_f.ln()]
}

/// Gaussian elimination with partial pivoting, 3×3.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let m = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Gaussian elimination with partial pivoting, 4×4.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let m = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Minimum record length accepted by [`synthesize_phase_noise`].
pub const SYNTHESIS_MIN_SAMPLES: usize = 1 << 14;

/// Synthesizes a zero-mean phase time series φ(t) (rad) whose single-sideband
/// spectrum follows the Leeson model, deterministically for a fixed seed.
///
/// Method (the stated, testable contract): draw white Gaussian phase samples
/// at the model's floor — per-sample variance σ² = (F·k_B·T/P_s)·f_s/2 so the
/// one-sided PSD is exactly the floor — then shape in the frequency domain by
/// multiplying the DFT by √([f_L²/f² + 1][f_c/f + 1]) with |f| mirrored
/// across Nyquist (Hermitian-preserving) and the f = 0 bin zeroed, and
/// inverse-transform.
///
/// The estimated ℒ(f) of the output matches the model within 2 dB over
/// roughly [40/T, f_s/4] with T = n/f_s, once enough spectral averaging is
/// applied. Sample rates below 4·f_L truncate the shaped band and raise a
/// [`Warning::NoiseBandTruncated`].
pub fn synthesize_phase_noise(
    model: &LeesonModel,
    sample_rate: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Warned<Vec<f64>>, LeesonError> {
    model.validate()?;
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(LeesonError::SynthesisParams(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    if n_samples < SYNTHESIS_MIN_SAMPLES {
        return Err(LeesonError::SynthesisParams(format!(
            "need at least {SYNTHESIS_MIN_SAMPLES} samples for a representable noise band, \
             got {n_samples}"
        )));
    }
    let mut warnings = Vec::new();
    if sample_rate <= 4.0 * model.f_leeson {
        warnings.push(Warning::NoiseBandTruncated {
            sample_rate_hz: sample_rate,
            four_fl_hz: 4.0 * model.f_leeson,
        });
    }

    let sigma = (model.floor_psd() * sample_rate / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = gaussian_vec(&mut rng, n_samples, sigma);

    let mut engine = FftEngine::new();
    let mut buf = complex_from_real(&white);
    drop(white);
    engine.forward(&mut buf);
    buf[0] = num_complex::Complex64::new(0.0, 0.0);
    let n = n_samples;
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let kf = k.min(n - k) as f64;
        let f = kf * sample_rate / n as f64;
        let fl = model.f_leeson / f;
        let gain = ((fl * fl + 1.0) * (model.f_corner / f + 1.0)).sqrt();
        *v *= gain;
    }
    engine.inverse(&mut buf);
    let phase: Vec<f64> = buf.iter().map(|c| c.re).collect();
    Ok(Warned {
        value: phase,
        warnings,
    })
}

/// `n` independent N(0, σ²) draws via the Box–Muller transform — explicit and
/// generator-stable, so seeded output never shifts under dependency bumps.
fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        // u1 ∈ (0, 1] keeps the log finite.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        out.push(sigma * r * c);
        if out.len() < n {
            out.push(sigma * r * s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_model_floor_coefficient() {
        // F·k_B·T/P_s = 8·1.381e-23·300/0.002.
        assert_relative_eq!(
            LeesonModel::reference().floor_psd(),
            1.6572e-17,
            max_relative = 1e-12
        );
    }

    #[test]
    fn l_half_reference_values_at_10k_and_100k() {
        let m = LeesonModel::reference();
        // Direct evaluation: ½·3601·1.66·1.6572e-17 → −133.05 dBc/Hz,
        // ½·37·1.066·1.6572e-17 → −154.86 dBc/Hz.
        assert!((leeson_l_db(&m, 10.0e3).unwrap() - (-133.05)).abs() < 0.01);
        assert!((leeson_l_db(&m, 100.0e3).unwrap() - (-154.86)).abs() < 0.01);
    }

    #[test]
    fn l_half_approaches_white_floor() {
        let m = LeesonModel::reference();
        let l = leeson_l_half(&m, 1e12).unwrap();
        assert_relative_eq!(l * l, 0.5 * m.floor_psd(), max_relative = 1e-5);
    }

    #[test]
    fn l_half_rejects_nonpositive_offsets() {
        let m = LeesonModel::reference();
        assert!(matches!(
            leeson_l_half(&m, 0.0),
            Err(LeesonError::OffsetDomain(_))
        ));
        assert!(leeson_l_half(&m, -1.0).is_err());
    }

    #[test]
    fn l_half_monotonically_nonincreasing() {
        let m = LeesonModel::reference();
        let mut prev = f64::INFINITY;
        for i in 0..400 {
            let f = 10.0f64.powf(0.02 * i as f64); // 1 Hz … 1e8 Hz
            let l = leeson_l_half(&m, f).unwrap();
            assert!(l <= prev * (1.0 + 1e-12), "not monotone at {f} Hz");
            prev = l;
        }
    }

    #[test]
    fn quadrupled_power_drops_l_by_3db_everywhere() {
        let m = LeesonModel::reference();
        let m4 = LeesonModel {
            p_sustain: 4.0 * m.p_sustain,
            ..m
        };
        for &f in &[100.0, 3.3e3, 99.0e3, 4.5e6] {
            let ratio = leeson_l_half(&m4, f).unwrap() / leeson_l_half(&m, f).unwrap();
            assert_relative_eq!(ratio, 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn leeson_effect_gains() {
        assert_relative_eq!(leeson_effect(1.0, 600e3, 600e3), 2.0, max_relative = 1e-12);
        assert_relative_eq!(leeson_effect(1.0, 6e8, 600e3), 1.0, max_relative = 1e-6);
        assert_relative_eq!(leeson_effect(1.0, 60e3, 600e3), 101.0, max_relative = 1e-12);
    }

    fn spectrum_from(model: &LeesonModel, f_lo: f64, f_hi: f64, n: usize) -> PhaseNoiseSpectrum {
        let offsets: Vec<f64> = (0..n)
            .map(|i| f_lo * (f_hi / f_lo).powf(i as f64 / (n - 1) as f64))
            .collect();
        let l: Vec<f64> = offsets
            .iter()
            .map(|&f| leeson_l_db(model, f).unwrap())
            .collect();
        PhaseNoiseSpectrum::new(offsets, l).unwrap()
    }

    #[test]
    fn fit_round_trips_noise_free_spectrum() {
        let truth = LeesonModel::reference();
        let spec = spectrum_from(&truth, 3.0e3, 5.0e6, 200);
        let fit = fit_leeson(&spec, truth.p_sustain, truth.temperature, 3.0e3).unwrap();
        assert_relative_eq!(fit.model.f_leeson, truth.f_leeson, max_relative = 1e-2);
        assert_relative_eq!(fit.model.f_corner, truth.f_corner, max_relative = 1e-2);
        assert_relative_eq!(fit.model.noise_factor, truth.noise_factor, max_relative = 1e-2);
        assert!(fit.residual_rms_db < 1e-6);
    }

    #[test]
    fn fit_respects_f_min_restriction() {
        // Corrupt everything below f_min; the fit must not care.
        let truth = LeesonModel::reference();
        let mut spec = spectrum_from(&truth, 100.0, 5.0e6, 300);
        for (f, l) in spec.offsets_hz.iter().zip(spec.l_dbchz.iter_mut()) {
            if *f < 3.0e3 {
                *l = -20.0;
            }
        }
        let fit = fit_leeson(&spec, truth.p_sustain, truth.temperature, 3.0e3).unwrap();
        assert_relative_eq!(fit.model.f_leeson, truth.f_leeson, max_relative = 1e-2);
    }

    #[test]
    fn fit_recovers_within_10pct_under_0p2db_noise() {
        let truth = LeesonModel::reference();
        let base = spectrum_from(&truth, 3.0e3, 5.0e6, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(20260814);
        for _trial in 0..100 {
            let noisy = PhaseNoiseSpectrum::new(
                base.offsets_hz.clone(),
                base.l_dbchz
                    .iter()
                    .map(|&l| l + 0.2 * gaussian_vec(&mut rng, 1, 1.0)[0])
                    .collect(),
            )
            .unwrap();
            let fit = fit_leeson(&noisy, truth.p_sustain, truth.temperature, 3.0e3).unwrap();
            assert_relative_eq!(fit.model.f_leeson, truth.f_leeson, max_relative = 0.10);
            assert_relative_eq!(fit.model.f_corner, truth.f_corner, max_relative = 0.10);
            assert_relative_eq!(fit.model.noise_factor, truth.noise_factor, max_relative = 0.10);
        }
    }

    #[test]
    fn fit_rejects_flat_spectrum_as_degenerate() {
        let offsets: Vec<f64> = (0..50).map(|i| 3.0e3 * 1.2f64.powi(i)).collect();
        let l = vec![-150.0; 50];
        let spec = PhaseNoiseSpectrum::new(offsets, l).unwrap();
        let err = fit_leeson(&spec, 2e-3, 300.0, 3.0e3).unwrap_err();
        assert!(matches!(err, LeesonError::DegenerateData { .. }));
    }

    #[test]
    fn fit_rejects_too_few_points() {
        let truth = LeesonModel::reference();
        let spec = spectrum_from(&truth, 3.0e3, 5.0e6, 9);
        assert!(matches!(
            fit_leeson(&spec, 2e-3, 300.0, 3.0e3),
            Err(LeesonError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn spectrum_validation() {
        assert!(PhaseNoiseSpectrum::new(vec![1.0, 2.0], vec![-100.0]).is_err());
        assert!(PhaseNoiseSpectrum::new(vec![], vec![]).is_err());
        assert!(PhaseNoiseSpectrum::new(vec![0.0, 1.0], vec![-1.0, -2.0]).is_err());
        assert!(PhaseNoiseSpectrum::new(vec![2.0, 1.0], vec![-1.0, -2.0]).is_err());
        assert!(PhaseNoiseSpectrum::new(vec![1.0, f64::NAN], vec![-1.0, -2.0]).is_err());
        assert!(PhaseNoiseSpectrum::new(vec![1.0, 2.0], vec![-1.0, -2.0]).is_ok());
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let m = LeesonModel::reference();
        let a = synthesize_phase_noise(&m, 20.0e6, 1 << 14, 42).unwrap();
        let b = synthesize_phase_noise(&m, 20.0e6, 1 << 14, 42).unwrap();
        assert_eq!(a.value, b.value);
        let c = synthesize_phase_noise(&m, 20.0e6, 1 << 14, 43).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn synthesis_output_is_zero_mean() {
        let m = LeesonModel::reference();
        let phase = synthesize_phase_noise(&m, 20.0e6, 1 << 16, 7).unwrap().value;
        let mean = phase.iter().sum::<f64>() / phase.len() as f64;
        assert!(mean.abs() < 1e-12, "mean = {mean}");
    }

    #[test]
    fn synthesis_rejects_short_records_and_warns_on_low_rate() {
        let m = LeesonModel::reference();
        assert!(matches!(
            synthesize_phase_noise(&m, 20.0e6, 1 << 13, 1),
            Err(LeesonError::SynthesisParams(_))
        ));
        let w = synthesize_phase_noise(&m, 2.0e6, 1 << 14, 1).unwrap();
        assert!(matches!(
            w.warnings[0],
            Warning::NoiseBandTruncated { .. }
        ));
    }

    /// Independent single-bin PSD oracle: Hann-windowed, disjoint segments,
    /// one-sided PSD at bin k, averaged over segments. Deliberately separate
    /// from the production Welch estimator.
    fn hann_psd_at_bin(x: &[f64], fs: f64, seg_len: usize, k: usize) -> f64 {
        let w: Vec<f64> = (0..seg_len)
            .map(|i| {
                0.5 * (1.0 - (2.0 * PI * i as f64 / seg_len as f64).cos())
            })
            .collect();
        let wsq: f64 = w.iter().map(|v| v * v).sum();
        let n_seg = x.len() / seg_len;
        let mut acc = 0.0;
        for s in 0..n_seg {
            let seg = &x[s * seg_len..(s + 1) * seg_len];
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (i, (&xi, &wi)) in seg.iter().zip(&w).enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / seg_len as f64;
                re += wi * xi * ang.cos();
                im += wi * xi * ang.sin();
            }
            acc += re * re + im * im;
        }
        2.0 * acc / (n_seg as f64 * fs * wsq)
    }

    #[test]
    fn synthesized_psd_matches_model_at_probe_bins() {
        let m = LeesonModel::reference();
        let fs = 20.0e6;
        let n = 1 << 18;
        let phase = synthesize_phase_noise(&m, fs, n, 11).unwrap().value;
        let seg = 1 << 12;
        for k in [10usize, 30, 100, 400] {
            let f = k as f64 * fs / seg as f64;
            let measured = hann_psd_at_bin(&phase, fs, seg, k);
            // ℒ = S_φ/2; compare in dB.
            let measured_db = 10.0 * (measured / 2.0).log10();
            let expected_db = leeson_l_db(&m, f).unwrap();
            assert!(
                (measured_db - expected_db).abs() < 2.0,
                "bin {k} ({f:.0} Hz): measured {measured_db:.2} dB, expected {expected_db:.2} dB"
            );
        }
    }

    #[test]
    fn noise_factor_x4_raises_floor_6db() {
        let m = LeesonModel::reference();
        let m4 = LeesonModel {
            noise_factor: 4.0 * m.noise_factor,
            ..m
        };
        let fs = 20.0e6;
        let n = 1 << 18;
        let a = synthesize_phase_noise(&m, fs, n, 5).unwrap().value;
        let b = synthesize_phase_noise(&m4, fs, n, 6).unwrap().value;
        let seg = 1 << 10;
        // Average the floor over bins in [fs/8, fs/4], where the shaping is
        // within 0.3 dB of flat (and identical for both models anyway).
        let (k_lo, k_hi) = (seg / 8, seg / 4);
        let mut pa = 0.0;
        let mut pb = 0.0;
        for k in k_lo..=k_hi {
            pa += hann_psd_at_bin(&a, fs, seg, k);
            pb += hann_psd_at_bin(&b, fs, seg, k);
        }
        let ratio_db = 10.0 * (pb / pa).log10();
        assert!(
            (ratio_db - 6.02).abs() < 0.5,
            "floor rise {ratio_db:.2} dB, expected 6.02 ± 0.5"
        );
    }
}

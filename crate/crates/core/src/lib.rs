//! Digital twin of a ferrimagnetic (YIG) oscillator magnetometer.
//!
//! A YIG sphere biased by a static field `B0` precesses at `ω_y = γB` and acts
//! as the frequency-selective element of a microwave oscillator. A magnetic
//! field along the bias axis therefore frequency-modulates the oscillator
//! output, and demodulating the oscillator waveform recovers the field. This
//! crate models that whole chain numerically:
//!
//! * [`fmr`] — ferrimagnetic-resonance physics: Kittel/anisotropy resonance
//!   frequencies, two-port S-parameters of the FMR filter, and coupling-rate
//!   extraction from swept S-parameter data.
//! * [`leeson`] — oscillator phase noise: Leeson-model evaluation, fitting
//!   measured phase-noise spectra, and synthesis of phase-noise time series
//!   with the matching spectrum.
//! * [`encode`] — field → waveform: phase integration, carrier synthesis with
//!   optional phase noise, FM sideband prediction (narrowband and exact
//!   Bessel forms), and mixdown to an intermediate frequency.
//! * [`demod`] — waveform → field: analytic-signal construction via the
//!   Hilbert transform, phase unwrapping, and differentiation back to tesla.
//! * [`spectral`] — amplitude spectral densities of recovered fields,
//!   phase-noise spectra, sensitivity conversions, and chopped-tone detection.
//! * [`limits`] — closed-form fundamental limits: spin-projection and thermal
//!   magnetization noise, drive tip angle, finite-bias vector error, and
//!   field-gradient tolerance.
//! * [`scenario`] — end-to-end simulation runs combining all of the above
//!   into a reproducible, seeded pipeline with a JSON-serializable report.
//!
//! All physics operations are pure functions of value inputs; every stochastic
//! operation takes an explicit seed and is bit-reproducible for a fixed seed.
//! SI units are used throughout the API (tesla, Hz or rad/s as documented per
//! field, watts, kelvin); dB quantities appear only in spectra and reports.

pub mod constants;
pub mod demod;
pub mod encode;
mod fft;
pub mod fmr;
pub mod io;
pub mod leeson;
pub mod limits;
pub mod scenario;
pub mod spectral;

use serde::{Deserialize, Serialize};

/// Non-fatal validity notices raised by operations whose result is usable but
/// outside (or near the edge of) a model's stated domain of validity.
///
/// Warnings are data, not log lines: callers decide whether to surface them.
/// The scenario runner collects them into the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
pub enum Warning {
    /// `max|B_sen|/B0` exceeds the linear vector-projection regime bound.
    #[error("field series leaves the linear regime: max|B_sen|/B0 = {ratio:.3e} > 1e-3")]
    LinearRegime { ratio: f64 },
    /// Narrowband-FM sideband formula used with modulation index β > 0.1.
    #[error("narrowband FM approximation degrades: modulation index beta = {beta:.3} > 0.1")]
    NarrowbandFm { beta: f64 },
    /// Signal energy extends within 10% of the carrier/intermediate frequency,
    /// straining the Bedrosian separation assumed by Hilbert demodulation.
    #[error(
        "Bedrosian margin: signal band extends to {band_hz:.3e} Hz, within 10% of the \
         {if_hz:.3e} Hz carrier"
    )]
    BedrosianMargin { band_hz: f64, if_hz: f64 },
    /// Phase-noise synthesis asked for a sample rate below the recommended
    /// `4·f_L`, so the shaped band is truncated near the Leeson knee.
    #[error(
        "sample rate {sample_rate_hz:.3e} Hz is below the recommended 4·f_L = {four_fl_hz:.3e} Hz"
    )]
    NoiseBandTruncated {
        sample_rate_hz: f64,
        four_fl_hz: f64,
    },
}

/// A value bundled with any validity warnings raised while computing it.
#[derive(Debug, Clone)]
pub struct Warned<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Warned<T> {
    /// Wraps a value that raised no warnings.
    pub fn clean(value: T) -> Self {
        Warned {
            value,
            warnings: Vec::new(),
        }
    }

    /// Wraps a value with one warning.
    pub fn with(value: T, warning: Warning) -> Self {
        Warned {
            value,
            warnings: vec![warning],
        }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    /// Maps the carried value, keeping the warnings.
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Warned<U> {
        Warned {
            value: f(self.value),
            warnings: self.warnings,
        }
    }
}

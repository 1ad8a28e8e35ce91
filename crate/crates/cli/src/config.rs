//! TOML scenario configuration with explicit unit suffixes.
//!
//! The on-disk schema deliberately differs from the engine's own `Scenario`
//! type: every physical key carries its unit in the name (`_hz`, `_tesla`,
//! `_s`, `_w`, `_k`), linewidths and coupling rates are ordinary frequencies
//! (cycles per second, as quoted on data sheets) rather than angular rates,
//! and sustaining power may be given in dBm. All conversions happen exactly
//! once, here, on the way into the engine. Unknown keys are rejected: a
//! misspelled unit suffix must fail loudly, not fall back to a default.
//!
//! Any key can be overridden from the environment: `FOMSIM_` plus the key
//! path with `__` between nesting levels, e.g. `FOMSIM_SAMPLING__IF_HZ=2e6`
//! or `FOMSIM_SEED=7`. Values are parsed as TOML, so arrays and inline
//! tables work too.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use fomsim_core::constants::YIG_MS;
use fomsim_core::fmr::{ztc_angle, DemagFactors, ResonatorModel};
use fomsim_core::leeson::LeesonModel;
use fomsim_core::scenario::{Analysis, ChopSchedule, Sampling, Scenario, Tone};

/// Environment prefix for configuration overrides.
pub const ENV_PREFIX: &str = "FOMSIM_";

/// Converts a CLI-boundary dBm level into watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1.0e-3 * 10.0f64.powf(dbm / 10.0)
}

/// Reads a scenario TOML file, applies environment overrides, and converts
/// into the engine's `Scenario`. Returns the scenario plus the dotted names
/// of the overrides that were applied (for the run summary).
pub fn load_scenario<I>(path: &Path, env: I) -> Result<(Scenario, Vec<String>), String>
where
    I: IntoIterator<Item = (String, String)>,
{
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let overrides = apply_env_overrides(&mut table, env)?;
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let scenario = config.into_scenario()?;
    Ok((scenario, overrides))
}

/// Applies `FOMSIM_*` overrides onto a parsed TOML table, creating nested
/// tables as needed. Keys are lowercased; application order is sorted, so
/// the result does not depend on environment iteration order.
pub fn apply_env_overrides<I>(table: &mut toml::Table, env: I) -> Result<Vec<String>, String>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut items: Vec<(String, String)> = env
        .into_iter()
        .filter_map(|(key, value)| {
            key.strip_prefix(ENV_PREFIX)
                .map(|rest| (rest.to_string(), value))
        })
        .collect();
    items.sort();

    let mut applied = Vec::with_capacity(items.len());
    for (path, raw) in items {
        let segments: Vec<String> = path.split("__").map(str::to_ascii_lowercase).collect();
        if segments.iter().any(String::is_empty) {
            return Err(format!("{ENV_PREFIX}{path}: empty key segment"));
        }
        let mut node = &mut *table;
        for segment in &segments[..segments.len() - 1] {
            node = node
                .entry(segment.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    format!("{ENV_PREFIX}{path}: `{segment}` is not a table in the config")
                })?;
        }
        let last = segments.last().expect("split yields at least one segment");
        node.insert(last.clone(), parse_env_value(&raw));
        applied.push(segments.join("."));
    }
    Ok(applied)
}

/// Parses an override value as a TOML literal (number, boolean, array,
/// inline table, quoted string); anything unparseable becomes a string.
fn parse_env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    resonator: ResonatorConfig,
    /// Omit the whole table for a noiseless oscillator.
    leeson: Option<LeesonConfig>,
    #[serde(default)]
    tones: Vec<ToneConfig>,
    chop: Option<ChopConfig>,
    sampling: SamplingConfig,
    #[serde(default)]
    analysis: AnalysisConfig,
    #[serde(default)]
    seed: u64,
}

impl RunConfig {
    pub fn into_scenario(self) -> Result<Scenario, String> {
        Ok(Scenario {
            resonator: self.resonator.into_model(),
            leeson: self.leeson.map(LeesonConfig::into_model).transpose()?,
            tones: self.tones.into_iter().map(ToneConfig::into_tone).collect(),
            chop: self.chop.map(|c| ChopSchedule {
                period_s: c.period_s,
                duty: c.duty,
            }),
            sampling: Sampling {
                sample_rate_hz: self.sampling.sample_rate_hz,
                if_hz: self.sampling.if_hz,
                duration_s: self.sampling.duration_s,
            },
            analysis: Analysis {
                segment_len: self.analysis.segment_len,
                guard_s: self.analysis.guard_s,
                floor_band_hz: self.analysis.floor_band_hz,
                fit_f_min_hz: self.analysis.fit_f_min_hz,
            },
            seed: self.seed,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonatorConfig {
    /// Unloaded linewidth κ₀/2π, Hz.
    kappa0_hz: f64,
    /// Input coupling κ₁/2π, Hz.
    kappa1_hz: f64,
    /// Output coupling κ₂/2π, Hz.
    kappa2_hz: f64,
    b0_tesla: f64,
    #[serde(default = "yig_ms")]
    ms_a_per_m: f64,
    /// Shape demagnetization factors; omitted means a sphere.
    demag: Option<DemagConfig>,
    #[serde(default = "yig_k1")]
    k1_over_mu0ms_tesla: f64,
    /// Crystal orientation; omitted means the zero-temperature-coefficient
    /// angle.
    theta_rad: Option<f64>,
}

fn yig_ms() -> f64 {
    YIG_MS
}

fn yig_k1() -> f64 {
    -4.2e-3
}

impl ResonatorConfig {
    fn into_model(self) -> ResonatorModel {
        ResonatorModel {
            kappa0: TAU * self.kappa0_hz,
            kappa1: TAU * self.kappa1_hz,
            kappa2: TAU * self.kappa2_hz,
            b0: self.b0_tesla,
            ms: self.ms_a_per_m,
            demag: self.demag.map_or(DemagFactors::SPHERE, |d| DemagFactors {
                nx: d.nx,
                ny: d.ny,
                nz: d.nz,
            }),
            k1_over_mu0ms: self.k1_over_mu0ms_tesla,
            theta: self.theta_rad.unwrap_or_else(ztc_angle),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemagConfig {
    nx: f64,
    ny: f64,
    nz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeesonConfig {
    f_leeson_hz: f64,
    f_corner_hz: f64,
    noise_factor: f64,
    /// Sustaining power in watts; mutually exclusive with `p_sustain_dbm`.
    p_sustain_w: Option<f64>,
    /// Sustaining power in dBm, converted to watts on load.
    p_sustain_dbm: Option<f64>,
    #[serde(default = "room_temperature")]
    temperature_k: f64,
}

fn room_temperature() -> f64 {
    300.0
}

impl LeesonConfig {
    fn into_model(self) -> Result<LeesonModel, String> {
        let p_sustain = match (self.p_sustain_w, self.p_sustain_dbm) {
            (Some(w), None) => w,
            (None, Some(dbm)) => dbm_to_watts(dbm),
            (None, None) => {
                return Err("leeson: set one of p_sustain_w or p_sustain_dbm".into())
            }
            (Some(_), Some(_)) => {
                return Err("leeson: p_sustain_w and p_sustain_dbm are mutually exclusive".into())
            }
        };
        Ok(LeesonModel {
            f_leeson: self.f_leeson_hz,
            f_corner: self.f_corner_hz,
            noise_factor: self.noise_factor,
            p_sustain,
            temperature: self.temperature_k,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToneConfig {
    f_hz: f64,
    b_rms_tesla: f64,
    #[serde(default)]
    phase_rad: f64,
}

impl ToneConfig {
    fn into_tone(self) -> Tone {
        Tone {
            f_hz: self.f_hz,
            b_rms_tesla: self.b_rms_tesla,
            phase_rad: self.phase_rad,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChopConfig {
    period_s: f64,
    duty: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplingConfig {
    sample_rate_hz: f64,
    if_hz: f64,
    duration_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisConfig {
    #[serde(default)]
    segment_len: usize,
    #[serde(default = "default_guard")]
    guard_s: f64,
    #[serde(default = "default_floor_band")]
    floor_band_hz: [f64; 2],
    #[serde(default = "default_fit_f_min")]
    fit_f_min_hz: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            segment_len: 0,
            guard_s: default_guard(),
            floor_band_hz: default_floor_band(),
            fit_f_min_hz: default_fit_f_min(),
        }
    }
}

fn default_guard() -> f64 {
    Analysis::default().guard_s
}

fn default_floor_band() -> [f64; 2] {
    Analysis::default().floor_band_hz
}

fn default_fit_f_min() -> f64 {
    Analysis::default().fit_f_min_hz
}

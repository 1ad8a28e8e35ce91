//! `fomsim` — scenario runner and analysis front end for the YIG oscillator
//! magnetometer model.
//!
//! Subcommands:
//!
//! * `run` — execute an end-to-end simulation described by a TOML file
//!   (field program → oscillator → demodulation → spectra → report).
//! * `fit-leeson` — fit the Leeson model to a measured phase-noise CSV.
//! * `extract-kappas` — extract coupling rates from an S-parameter sweep CSV.
//! * `limits` — evaluate the closed-form fundamental sensitivity limits.
//! * `demod` — demodulate a binary IF waveform back to a field record.
//! * `asd` — amplitude spectral density of a field record, file to file.
//!
//! Exit codes: 0 on success, 2 on configuration/input errors (bad flags,
//! unreadable or malformed files, invalid parameter combinations), 3 on
//! numerical failures over well-formed input (non-convergent fits,
//! out-of-domain physics). Orchestration is single-threaded; for a fixed
//! seed, `run` writes byte-identical reports across invocations.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fomsim_core::constants::YIG_MS;

/// A command failure, classified for the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable/malformed input, invalid configuration.
    Config(String),
    /// Numerical failure while processing well-formed input.
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Human-readable summary.
    Text,
    /// Machine-readable JSON.
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "fomsim", version, about = "YIG oscillator magnetometer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an end-to-end simulation from a TOML scenario file.
    ///
    /// Any config key can be overridden from the environment: FOMSIM_ plus
    /// the key path with __ between nesting levels, e.g.
    /// FOMSIM_SAMPLING__IF_HZ=2e6.
    Run(RunArgs),
    /// Fit the Leeson model to a phase-noise CSV (freq_hz, l_dbchz).
    FitLeeson(FitLeesonArgs),
    /// Extract coupling rates from an S-parameter sweep CSV.
    ExtractKappas(ExtractKappasArgs),
    /// Evaluate closed-form sensitivity limits for a YIG sphere.
    Limits(LimitsArgs),
    /// Demodulate a binary IF waveform into a field record.
    Demod(DemodArgs),
    /// Compute the amplitude spectral density of a field record.
    Asd(AsdArgs),
}

#[derive(Debug, Parser)]
struct RunArgs {
    /// Scenario TOML file.
    config: PathBuf,
    /// Override the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json, asd.csv, field.f64, phase_noise.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Skip writing the bulk field record (field.f64 + sidecar).
    #[arg(long)]
    no_field: bool,
}

#[derive(Debug, Parser)]
struct FitLeesonArgs {
    /// Phase-noise CSV: `freq_hz, l_dbchz` rows, `#` comments.
    input: PathBuf,
    /// Sustaining power at the resonator, W.
    #[arg(long, required_unless_present = "p_sustain_dbm")]
    p_sustain_w: Option<f64>,
    /// Sustaining power in dBm (converted to watts immediately).
    #[arg(long, conflicts_with = "p_sustain_w")]
    p_sustain_dbm: Option<f64>,
    /// Oscillator temperature, K.
    #[arg(long, default_value_t = 300.0)]
    temperature_k: f64,
    /// Lowest offset included in the fit; defaults to the lowest in the file.
    #[arg(long)]
    f_min_hz: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Parser)]
struct ExtractKappasArgs {
    /// Sweep CSV: `freq_hz, re(S11), im(S11), re(S21), im(S21)` rows.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Parser)]
struct LimitsArgs {
    /// Sphere diameter, m.
    #[arg(long, default_value_t = 1.0e-3)]
    diameter_m: f64,
    /// Polarized spin density, 1/m³.
    #[arg(long, default_value_t = 1.5e28)]
    spin_density_per_m3: f64,
    /// Dephasing time T₂*, s.
    #[arg(long, default_value_t = 570.0e-9)]
    t2_star_s: f64,
    /// Unloaded quality factor.
    #[arg(long, default_value_t = 8900.0)]
    q0: f64,
    /// Saturation magnetization, A/m.
    #[arg(long, default_value_t = YIG_MS)]
    ms_a_per_m: f64,
    /// Temperature, K.
    #[arg(long, default_value_t = 300.0)]
    temperature_k: f64,
    /// Bias field for the finite-bias vector error, T.
    #[arg(long, default_value_t = 0.178)]
    b0_tesla: f64,
    /// Transverse stray field, T.
    #[arg(long, default_value_t = 0.05e-3)]
    b_perp_tesla: f64,
    /// Parallel stray field, T.
    #[arg(long, default_value_t = 0.0)]
    b_par_tesla: f64,
    /// RF drive amplitude for the tip angle, T.
    #[arg(long, default_value_t = 2.0e-6)]
    b_rf_tesla: f64,
    /// Longitudinal relaxation time, s; defaults to T₂/2.
    #[arg(long)]
    t1_s: Option<f64>,
    /// Transverse relaxation time, s; defaults to 1/(π·kappa0_hz).
    #[arg(long)]
    t2_s: Option<f64>,
    /// Unloaded linewidth κ₀/2π used for T₂ and gradient tolerance, Hz.
    #[arg(long, default_value_t = 790.0e3)]
    kappa0_hz: f64,
    /// Gradient length scale, m; defaults to the sphere diameter.
    #[arg(long)]
    length_scale_m: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Parser)]
struct DemodArgs {
    /// Binary waveform (f64 LE) with a `.json` sidecar carrying the rates.
    input: PathBuf,
    /// Output field record (f64 LE) plus `.json` sidecar.
    output: PathBuf,
    /// Static bias field the encoder was programmed with, T.
    #[arg(long, default_value_t = 0.178)]
    b0_tesla: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hann,
    Tukey,
}

#[derive(Debug, Parser)]
struct AsdArgs {
    /// Field record: `.csv` (time_s, b_tesla) or binary f64 LE + sidecar.
    input: PathBuf,
    /// Output ASD CSV (a `.json` metadata sidecar is written next to it).
    output: PathBuf,
    /// Samples per Welch segment; 0 picks one-second segments (min 16).
    #[arg(long, default_value_t = 0)]
    segment_len: usize,
    #[arg(long, value_enum, default_value_t = WindowArg::Tukey)]
    window: WindowArg,
    /// Taper fraction for the Tukey window.
    #[arg(long, default_value_t = 0.01)]
    tukey_alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::FitLeeson(args) => commands::fit_leeson(args),
        Command::ExtractKappas(args) => commands::extract_kappas(args),
        Command::Limits(args) => commands::limits(args),
        Command::Demod(args) => commands::demod(args),
        Command::Asd(args) => commands::asd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("fomsim: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}

//! Subcommand implementations: wire files and flags into the engine, map
//! errors onto the exit-code taxonomy (input problems → 2, numerical
//! failures on well-formed input → 3), and render text or JSON output.

use std::f64::consts::{PI, TAU};
use std::fmt::Display;
use std::fs;
use std::path::Path;

use serde::Serialize;

use fomsim_core::constants::GAMMA_HZ_PER_T;
use fomsim_core::demod::{analytic_signal, recover_field, unwrap_phase};
use fomsim_core::fmr::{fit_sweep, ztc_angle};
use fomsim_core::io::{
    read_field_binary, read_field_csv, read_phase_noise_csv, read_sweep_csv,
    read_waveform_binary, write_asd_csv, write_field_binary, write_phase_noise_csv,
    LeesonFitRecord, SweepFitRecord,
};
use fomsim_core::leeson::fit_leeson as fit_leeson_model;
use fomsim_core::limits::{
    finite_bias_error, gradient_tolerance, spin_projection_limit, thermal_limit, tip_angle,
    FiniteBias, SphereSpec,
};
use fomsim_core::scenario::{run_scenario, RunReport, ScenarioError};
use fomsim_core::spectral::{field_asd, WindowKind};
use fomsim_core::{Warned, Warning};

use crate::config::{dbm_to_watts, load_scenario};
use crate::{
    AsdArgs, DemodArgs, ExtractKappasArgs, Failure, FitLeesonArgs, Format, LimitsArgs, RunArgs,
    WindowArg,
};

fn config_err(e: impl Display) -> Failure {
    Failure::Config(e.to_string())
}

fn numerical_err(e: impl Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Validate(_) => Failure::Config(e.to_string()),
        other => Failure::Numerical(other.to_string()),
    }
}

fn write_json_file(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, json + "\n").map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn print_json(value: &impl Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report types serialize")
    );
}

fn db20(ratio: f64) -> f64 {
    20.0 * ratio.log10()
}

pub fn run(args: RunArgs) -> Result<(), Failure> {
    let (mut scenario, overrides) =
        load_scenario(&args.config, std::env::vars()).map_err(Failure::Config)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let out = run_scenario(&scenario).map_err(scenario_failure)?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.out_dir.display())))?;
    write_json_file(&args.out_dir.join("report.json"), &out.report)?;
    write_asd_csv(&args.out_dir.join("asd.csv"), &out.asd).map_err(config_err)?;
    let mut wrote = vec!["report.json".to_string(), "asd.csv".to_string()];
    if let Some(spectrum) = &out.phase_noise {
        write_phase_noise_csv(&args.out_dir.join("phase_noise.csv"), spectrum)
            .map_err(config_err)?;
        wrote.push("phase_noise.csv".to_string());
    }
    if !args.no_field {
        write_field_binary(&args.out_dir.join("field.f64"), &out.field).map_err(config_err)?;
        wrote.push("field.f64".to_string());
    }

    match args.format {
        Format::Json => print_json(&out.report),
        Format::Text => print_run_summary(&out.report, &overrides, &args.out_dir, &wrote),
    }
    Ok(())
}

fn print_run_summary(report: &RunReport, overrides: &[String], out_dir: &Path, wrote: &[String]) {
    let geo = &report.geometry;
    let sampling = &report.config.sampling;
    println!("seed: {}", report.config.seed);
    if !overrides.is_empty() {
        println!("env overrides: {}", overrides.join(", "));
    }
    println!(
        "record: {} samples @ {:.6e} Hz, IF {:.6e} Hz, analysis window {:.3} s",
        geo.n_total,
        sampling.sample_rate_hz,
        sampling.if_hz,
        geo.n_analysis as f64 / sampling.sample_rate_hz,
    );
    println!(
        "asd: {} segments of {} samples, {:.6} Hz bins",
        geo.n_analysis / geo.segment_len,
        geo.segment_len,
        report.resolution_hz,
    );
    println!(
        "noise floor: {:.4e} T/sqrt(Hz) over [{:.3e}, {:.3e}] Hz",
        report.noise_floor.asd_tesla_per_sqrt_hz,
        report.noise_floor.band_hz[0],
        report.noise_floor.band_hz[1],
    );
    for tone in &report.tones {
        println!(
            "tone {:.6e} Hz: measured {:.4e} T rms (configured {:.4e}); \
             sidebands {:.2} / {:.2} dBc, predicted {:.2} dBc",
            tone.f_hz,
            tone.measured_rms_tesla,
            tone.configured_rms_tesla,
            db20(tone.measured_sideband_upper_rel),
            db20(tone.measured_sideband_lower_rel),
            db20(tone.predicted_sideband_rel),
        );
    }
    if let Some(chops) = &report.chop {
        for chop in chops {
            println!(
                "chop {:.6e} Hz: {} periods, on {:.4e} T, off {:.4e} T, separation {:.1}",
                chop.f_hz,
                chop.result.n_periods,
                chop.result.on_amplitude,
                chop.result.off_amplitude,
                chop.result.separation,
            );
        }
    }
    if let Some(fit) = &report.leeson_fit {
        println!(
            "leeson fit: f_leeson = {:.4e} Hz, f_corner = {:.4e} Hz, noise factor = {:.3} \
             (residual {:.2} dB rms over {} points)",
            fit.model.f_leeson,
            fit.model.f_corner,
            fit.model.noise_factor,
            fit.residual_rms_db,
            fit.n_points,
        );
    }
    if let Some(sens) = &report.sensitivity {
        println!(
            "sensitivity: plateau {:.4e} T/sqrt(Hz), best {:.4e} T/sqrt(Hz) at {:.4e} Hz",
            sens.plateau_tesla_per_sqrt_hz, sens.minimum_tesla_per_sqrt_hz, sens.minimum_at_hz,
        );
    }
    if report.warnings.is_empty() {
        println!("warnings: none");
    } else {
        for warning in &report.warnings {
            println!("warning: {warning}");
        }
    }
    let paths: Vec<String> = wrote
        .iter()
        .map(|name| out_dir.join(name).display().to_string())
        .collect();
    println!("wrote: {}", paths.join(", "));
}

pub fn fit_leeson(args: FitLeesonArgs) -> Result<(), Failure> {
    let spectrum = read_phase_noise_csv(&args.input).map_err(config_err)?;
    let p_sustain = match (args.p_sustain_w, args.p_sustain_dbm) {
        (Some(w), None) => w,
        (None, Some(dbm)) => dbm_to_watts(dbm),
        _ => unreachable!("clap enforces exactly one power flag"),
    };
    if !(p_sustain > 0.0 && p_sustain.is_finite()) {
        return Err(Failure::Config(format!(
            "sustaining power must be positive, got {p_sustain} W"
        )));
    }
    if !(args.temperature_k > 0.0 && args.temperature_k.is_finite()) {
        return Err(Failure::Config(format!(
            "temperature must be positive, got {} K",
            args.temperature_k
        )));
    }
    let f_min = args.f_min_hz.unwrap_or(spectrum.offsets_hz[0]);
    let fit = fit_leeson_model(&spectrum, p_sustain, args.temperature_k, f_min)
        .map_err(numerical_err)?;
    match args.format {
        Format::Json => print_json(&LeesonFitRecord::from(&fit)),
        Format::Text => {
            println!("points fitted: {} at offsets >= {:.4e} Hz", fit.n_points, f_min);
            println!("f_leeson: {:.6e} Hz", fit.model.f_leeson);
            println!("f_corner: {:.6e} Hz", fit.model.f_corner);
            println!("noise factor: {:.4}", fit.model.noise_factor);
            println!("residual: {:.3} dB rms", fit.residual_rms_db);
        }
    }
    Ok(())
}

pub fn extract_kappas(args: ExtractKappasArgs) -> Result<(), Failure> {
    let points = read_sweep_csv(&args.input).map_err(config_err)?;
    let fit = fit_sweep(&points).map_err(numerical_err)?;
    let record = SweepFitRecord::from(&fit);
    match args.format {
        Format::Json => print_json(&record),
        Format::Text => {
            println!("kappa0: {:.6e} Hz", record.kappa0_hz);
            println!("kappa1: {:.6e} Hz", record.kappa1_hz);
            println!("kappa2: {:.6e} Hz", record.kappa2_hz);
            println!("f_resonance: {:.6e} Hz", record.f_resonance_hz);
            println!("q_loaded: {:.1}", record.q_loaded);
            println!("f_leeson: {:.6e} Hz", record.f_leeson_hz);
        }
    }
    Ok(())
}

/// Everything the `limits` subcommand computes, with the inputs echoed.
#[derive(Debug, Serialize)]
struct LimitsReport {
    sphere: SphereSpec,
    eta_spl_tesla_sqrt_s: f64,
    eta_thermal_tesla_sqrt_s: f64,
    thermal_to_spl_ratio: f64,
    b_rf_tesla: f64,
    t1_s: f64,
    t2_s: f64,
    tip_angle_rad: f64,
    b0_tesla: f64,
    b_perp_tesla: f64,
    b_par_tesla: f64,
    finite_bias: FiniteBias,
    kappa0_hz: f64,
    length_scale_m: f64,
    gradient_tolerance_t_per_m: f64,
    ztc_angle_deg: f64,
}

pub fn limits(args: LimitsArgs) -> Result<(), Failure> {
    let sphere = SphereSpec {
        diameter: args.diameter_m,
        spin_density: args.spin_density_per_m3,
        t2_star: args.t2_star_s,
        q0: args.q0,
        ms: args.ms_a_per_m,
        temperature: args.temperature_k,
    };
    // All inputs are CLI flags, so every rejection here is a config error.
    let eta_spl = spin_projection_limit(&sphere).map_err(config_err)?;
    let eta_thermal = thermal_limit(&sphere).map_err(config_err)?;
    if !(args.kappa0_hz > 0.0 && args.kappa0_hz.is_finite()) {
        return Err(Failure::Config(format!(
            "--kappa0-hz must be positive, got {}",
            args.kappa0_hz
        )));
    }
    let t2 = args.t2_s.unwrap_or(1.0 / (PI * args.kappa0_hz));
    let t1 = args.t1_s.unwrap_or(t2 / 2.0);
    let tip = tip_angle(args.b_rf_tesla, t1, t2).map_err(config_err)?;
    let bias = finite_bias_error(args.b_perp_tesla, args.b_par_tesla, args.b0_tesla)
        .map_err(config_err)?;
    let length_scale = args.length_scale_m.unwrap_or(args.diameter_m);
    let gradient =
        gradient_tolerance(TAU * args.kappa0_hz, length_scale).map_err(config_err)?;
    let report = LimitsReport {
        sphere,
        eta_spl_tesla_sqrt_s: eta_spl,
        eta_thermal_tesla_sqrt_s: eta_thermal,
        thermal_to_spl_ratio: eta_thermal / eta_spl,
        b_rf_tesla: args.b_rf_tesla,
        t1_s: t1,
        t2_s: t2,
        tip_angle_rad: tip,
        b0_tesla: args.b0_tesla,
        b_perp_tesla: args.b_perp_tesla,
        b_par_tesla: args.b_par_tesla,
        finite_bias: bias,
        kappa0_hz: args.kappa0_hz,
        length_scale_m: length_scale,
        gradient_tolerance_t_per_m: gradient,
        ztc_angle_deg: ztc_angle().to_degrees(),
    };
    match args.format {
        Format::Json => print_json(&report),
        Format::Text => {
            println!(
                "sphere: d = {:.3e} m, {:.3e} spins/m^3, T2* = {:.3e} s, Q0 = {:.0}, T = {:.1} K",
                report.sphere.diameter,
                report.sphere.spin_density,
                report.sphere.t2_star,
                report.sphere.q0,
                report.sphere.temperature,
            );
            println!(
                "spin-projection limit: {:.4e} T*sqrt(s)",
                report.eta_spl_tesla_sqrt_s
            );
            println!(
                "thermal limit: {:.4e} T*sqrt(s) ({:.1}x spin-projection)",
                report.eta_thermal_tesla_sqrt_s, report.thermal_to_spl_ratio,
            );
            println!(
                "tip angle: {:.4} rad at B_rf = {:.3e} T (T1 = {:.3e} s, T2 = {:.3e} s)",
                report.tip_angle_rad, report.b_rf_tesla, report.t1_s, report.t2_s,
            );
            println!(
                "finite-bias error: {:.4e} T (exact {:.4e} T) for B_perp = {:.3e} T, \
                 B_par = {:.3e} T at B0 = {:.3} T",
                report.finite_bias.error,
                report.finite_bias.exact_error,
                report.b_perp_tesla,
                report.b_par_tesla,
                report.b0_tesla,
            );
            println!(
                "gradient tolerance: {:.4e} T/m over {:.3e} m (kappa0 = 2pi x {:.3e} Hz)",
                report.gradient_tolerance_t_per_m, report.length_scale_m, report.kappa0_hz,
            );
            println!("ztc angle: {:.4} deg", report.ztc_angle_deg);
        }
    }
    Ok(())
}

/// Summary of a file-to-file demodulation.
#[derive(Debug, Serialize)]
struct DemodReport {
    n_samples: usize,
    sample_rate_hz: f64,
    duration_s: f64,
    carrier_hz: f64,
    lo_hz: f64,
    b0_tesla: f64,
    /// Samples at each end computed with lower-order stencils.
    edge_len: usize,
    warnings: Vec<Warning>,
}

pub fn demod(args: DemodArgs) -> Result<(), Failure> {
    let waveform = read_waveform_binary(&args.input).map_err(config_err)?;
    let lo_hz = GAMMA_HZ_PER_T * args.b0_tesla - waveform.carrier_hz;
    if !(lo_hz > 0.0) {
        return Err(Failure::Config(format!(
            "local oscillator gamma*B0/2pi - f_IF = {lo_hz:.6e} Hz is not positive; \
             check --b0-tesla against the record's carrier_hz"
        )));
    }
    let Warned {
        value: signal,
        warnings,
    } = analytic_signal(&waveform).map_err(numerical_err)?;
    let phase = unwrap_phase(&signal).map_err(numerical_err)?;
    let recovered = recover_field(&phase, waveform.sample_rate, lo_hz, args.b0_tesla)
        .map_err(numerical_err)?;
    write_field_binary(&args.output, &recovered.series).map_err(config_err)?;

    let report = DemodReport {
        n_samples: recovered.series.samples.len(),
        sample_rate_hz: recovered.series.sample_rate,
        duration_s: recovered.series.samples.len() as f64 / recovered.series.sample_rate,
        carrier_hz: waveform.carrier_hz,
        lo_hz,
        b0_tesla: args.b0_tesla,
        edge_len: recovered.edge_len,
        warnings,
    };
    match args.format {
        Format::Json => print_json(&report),
        Format::Text => {
            println!(
                "demodulated {} samples @ {:.6e} Hz ({:.3} s)",
                report.n_samples, report.sample_rate_hz, report.duration_s,
            );
            println!(
                "carrier {:.6e} Hz, LO {:.6e} Hz, B0 {:.4} T",
                report.carrier_hz, report.lo_hz, report.b0_tesla,
            );
            println!("edge samples (lower-order stencils): {} per end", report.edge_len);
            if report.warnings.is_empty() {
                println!("warnings: none");
            } else {
                for warning in &report.warnings {
                    println!("warning: {warning}");
                }
            }
            println!(
                "wrote: {} (+ {}.json)",
                args.output.display(),
                args.output.display()
            );
        }
    }
    Ok(())
}

/// Summary of a file-to-file spectral-density computation.
#[derive(Debug, Serialize)]
struct AsdReport {
    n_samples: usize,
    sample_rate_hz: f64,
    window: WindowKind,
    segment_len: usize,
    n_segments: usize,
    resolution_hz: f64,
    enbw_hz: f64,
}

pub fn asd(args: AsdArgs) -> Result<(), Failure> {
    let is_csv = args
        .input
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"));
    let field = if is_csv {
        read_field_csv(&args.input)
    } else {
        read_field_binary(&args.input)
    }
    .map_err(config_err)?;

    let window = match args.window {
        WindowArg::Rectangular => WindowKind::Rectangular,
        WindowArg::Hann => WindowKind::Hann,
        WindowArg::Tukey => {
            if !(0.0..=1.0).contains(&args.tukey_alpha) {
                return Err(Failure::Config(format!(
                    "--tukey-alpha must be in [0, 1], got {}",
                    args.tukey_alpha
                )));
            }
            WindowKind::Tukey {
                alpha: args.tukey_alpha,
            }
        }
    };
    // 0 means auto: one-second segments, capped at half the record, min 16 —
    // the same rule the scenario runner applies.
    let segment_len = if args.segment_len == 0 {
        (field.sample_rate.round() as usize)
            .min(field.samples.len() / 2)
            .max(16)
    } else {
        args.segment_len
    };
    let spectrum = field_asd(&field, segment_len, window).map_err(numerical_err)?;
    write_asd_csv(&args.output, &spectrum).map_err(config_err)?;

    let report = AsdReport {
        n_samples: field.samples.len(),
        sample_rate_hz: field.sample_rate,
        window: spectrum.window,
        segment_len: spectrum.segment_len,
        n_segments: spectrum.n_segments,
        resolution_hz: spectrum.resolution_hz,
        enbw_hz: spectrum.enbw_hz,
    };
    match args.format {
        Format::Json => print_json(&report),
        Format::Text => {
            println!(
                "asd: {} segments of {} samples, {:.6} Hz bins, ENBW {:.6} Hz",
                report.n_segments, report.segment_len, report.resolution_hz, report.enbw_hz,
            );
            println!(
                "wrote: {} (+ {}.json)",
                args.output.display(),
                args.output.display()
            );
        }
    }
    Ok(())
}

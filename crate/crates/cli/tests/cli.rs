//! End-to-end tests of the `fomsim` binary: exit codes, artifacts on disk,
//! determinism, and agreement of file round trips with the engine.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fomsim_core::constants::GAMMA_HZ_PER_T;
use fomsim_core::encode::{synthesize_waveform, CarrierSpec, FieldSeries};
use fomsim_core::fmr::{s_parameters, ResonatorModel, SweepPoint};
use fomsim_core::io::{read_field_binary, write_phase_noise_csv, write_sweep_csv, write_waveform_binary};
use fomsim_core::leeson::{leeson_l_db, LeesonModel, PhaseNoiseSpectrum};
use fomsim_core::spectral::tone_rms_amplitude;

fn fomsim(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fomsim"));
    cmd.args(args);
    cmd
}

fn output(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("binary runs");
    (
        status.code().expect("exit code"),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

/// Minimal valid scenario: noiseless oscillator, one 5 kHz tone, 0.1 s at
/// 400 kS/s — runs in milliseconds.
const TINY: &str = r#"
    seed = 5

    [resonator]
    kappa0_hz = 790e3
    kappa1_hz = 315e3
    kappa2_hz = 405e3
    b0_tesla = 0.178

    [[tones]]
    f_hz = 5e3
    b_rms_tesla = 1e-9

    [sampling]
    sample_rate_hz = 400e3
    if_hz = 100e3
    duration_s = 0.1

    [analysis]
    floor_band_hz = [10e3, 40e3]
"#;

fn write_tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path
}

#[test]
fn run_writes_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("out");
    let (code, stdout, stderr) = output(&mut fomsim(&[
        "run",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    assert!(stdout.contains("noise floor"), "stdout: {stdout}");
    assert!(stdout.contains("tone 5"), "stdout: {stdout}");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 5);
    assert_eq!(report["config"]["sampling"]["if_hz"], 100.0e3);
    let measured = report["tones"][0]["measured_rms_tesla"].as_f64().unwrap();
    assert!(
        (measured / 1.0e-9 - 1.0).abs() < 0.02,
        "tone read {measured} T"
    );
    assert!(out.join("asd.csv").exists());
    assert!(out.join("asd.csv.json").exists());
    assert!(out.join("field.f64").exists());
    assert!(out.join("field.f64.json").exists());
}

#[test]
fn same_seed_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&out_a, &out_b] {
        let (code, _, stderr) = output(&mut fomsim(&[
            "run",
            config.to_str().unwrap(),
            "--seed",
            "7",
            "--no-field",
            "--out-dir",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, 0, "stderr: {stderr}");
    }
    let a = fs::read(out_a.join("report.json")).unwrap();
    let b = fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(a, b, "same seed must give byte-identical reports");
}

#[test]
fn no_field_skips_the_bulk_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("out");
    let (code, _, _) = output(&mut fomsim(&[
        "run",
        config.to_str().unwrap(),
        "--no-field",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0);
    assert!(out.join("report.json").exists());
    assert!(!out.join("field.f64").exists());
}

#[test]
fn env_overrides_apply_and_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("out");
    let (code, stdout, stderr) = output(
        fomsim(&[
            "run",
            config.to_str().unwrap(),
            "--no-field",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .env("FOMSIM_SEED", "9"),
    );
    assert_eq!(code, 0, "stderr: {stderr}");
    assert!(stdout.contains("env overrides: seed"), "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 9);
}

#[test]
fn seed_flag_wins_over_env_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = dir.path().join("out");
    let (code, _, _) = output(
        fomsim(&[
            "run",
            config.to_str().unwrap(),
            "--seed",
            "11",
            "--no-field",
            "--out-dir",
            out.to_str().unwrap(),
        ])
        .env("FOMSIM_SEED", "9"),
    );
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 11);
}

#[test]
fn missing_config_file_exits_2() {
    let (code, _, stderr) = output(&mut fomsim(&["run", "/nonexistent/nowhere.toml"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("nowhere.toml"), "stderr: {stderr}");
}

#[test]
fn malformed_toml_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "not = [toml").unwrap();
    let (code, _, _) = output(&mut fomsim(&["run", path.to_str().unwrap()]));
    assert_eq!(code, 2);
}

#[test]
fn unknown_config_keys_exit_2_and_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    fs::write(&path, TINY.replace("if_hz = 100e3", "if_khz = 100")).unwrap();
    let (code, _, stderr) = output(&mut fomsim(&["run", path.to_str().unwrap()]));
    assert_eq!(code, 2);
    assert!(stderr.contains("if_khz"), "stderr: {stderr}");
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad_if.toml");
    // IF at 300 kHz sits above the 200 kHz Nyquist.
    fs::write(&path, TINY.replace("if_hz = 100e3", "if_hz = 300e3")).unwrap();
    let (code, _, stderr) = output(&mut fomsim(&["run", path.to_str().unwrap()]));
    assert_eq!(code, 2);
    assert!(stderr.contains("intermediate frequency"), "stderr: {stderr}");
}

#[test]
fn fit_leeson_recovers_the_model_from_a_csv_with_dbm_power() {
    let dir = tempfile::tempdir().unwrap();
    let model = LeesonModel::reference();
    let offsets: Vec<f64> = (0..=120)
        .map(|i| 1.0e3 * 10.0f64.powf(i as f64 / 40.0))
        .collect();
    let l_db: Vec<f64> = offsets
        .iter()
        .map(|&f| leeson_l_db(&model, f).unwrap())
        .collect();
    let spectrum = PhaseNoiseSpectrum::new(offsets, l_db).unwrap();
    let path = dir.path().join("phase_noise.csv");
    write_phase_noise_csv(&path, &spectrum).unwrap();

    let (code, stdout, stderr) = output(&mut fomsim(&[
        "fit-leeson",
        path.to_str().unwrap(),
        "--p-sustain-dbm",
        "3.0102999566398120",
        "--format",
        "json",
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    let fit: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let rel = |key: &str, want: f64| {
        let got = fit[key].as_f64().unwrap();
        assert!(
            (got / want - 1.0).abs() < 0.01,
            "{key}: got {got}, want {want}"
        );
    };
    rel("f_leeson_hz", 600.0e3);
    rel("f_corner_hz", 6.6e3);
    rel("noise_factor", 8.0);
    let p = fit["p_sustain_w"].as_f64().unwrap();
    assert!((p / 2.0e-3 - 1.0).abs() < 1.0e-9, "dBm conversion: {p} W");
}

#[test]
fn fit_leeson_converges_on_a_runs_own_export() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("noisy.toml");
    // Short noisy capture; the exported phase_noise.csv must be directly
    // refittable (band-edge artifact bins stay out of the export).
    fs::write(
        &config,
        r#"
        seed = 3
        [resonator]
        kappa0_hz = 790e3
        kappa1_hz = 315e3
        kappa2_hz = 405e3
        b0_tesla = 0.178
        [leeson]
        f_leeson_hz = 600e3
        f_corner_hz = 6.6e3
        noise_factor = 8.0
        p_sustain_w = 2e-3
        [sampling]
        sample_rate_hz = 5e6
        if_hz = 1.25e6
        duration_s = 0.2
        [analysis]
        floor_band_hz = [30e3, 100e3]
        "#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, _, stderr) = output(&mut fomsim(&[
        "run",
        config.to_str().unwrap(),
        "--no-field",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");

    let pn = out.join("phase_noise.csv");
    let (code, stdout, stderr) = output(&mut fomsim(&[
        "fit-leeson",
        pn.to_str().unwrap(),
        "--p-sustain-w",
        "2e-3",
        "--f-min-hz",
        "3e3",
        "--format",
        "json",
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    let fit: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    // Loose windows: a 0.2 s low-IF record carries the known image-fold
    // bias; the point is that the artifact refits cleanly.
    let f_l = fit["f_leeson_hz"].as_f64().unwrap();
    assert!((2.0e5..1.2e6).contains(&f_l), "refit f_leeson {f_l} Hz");
    let f_c = fit["f_corner_hz"].as_f64().unwrap();
    assert!((2.0e3..2.0e4).contains(&f_c), "refit f_corner {f_c} Hz");
}

#[test]
fn fit_leeson_without_a_power_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pn.csv");
    fs::write(&path, "# freq_hz, l_dbchz\n1e3, -100\n1e4, -130\n").unwrap();
    let (code, _, _) = output(&mut fomsim(&["fit-leeson", path.to_str().unwrap()]));
    assert_eq!(code, 2);
}

#[test]
fn malformed_csv_reports_the_line_number_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pn.csv");
    fs::write(&path, "# freq_hz, l_dbchz\n1e3, -100\nbogus row\n").unwrap();
    let (code, _, stderr) = output(&mut fomsim(&[
        "fit-leeson",
        path.to_str().unwrap(),
        "--p-sustain-w",
        "2e-3",
    ]));
    assert_eq!(code, 2);
    assert!(stderr.contains(":3:"), "stderr should name line 3: {stderr}");
}

#[test]
fn extract_kappas_recovers_the_reference_rates() {
    let dir = tempfile::tempdir().unwrap();
    let model = ResonatorModel::reference();
    let omega_y = model.resonance().unwrap();
    let f_center = omega_y / TAU;
    let points: Vec<SweepPoint> = (0..801)
        .map(|i| {
            let f = f_center - 5.0e6 + 1.25e4 * i as f64;
            let s = s_parameters(&model, TAU * f, omega_y);
            SweepPoint {
                freq_hz: f,
                s11: s.s11,
                s21: s.s21,
            }
        })
        .collect();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&path, &points).unwrap();

    let (code, stdout, stderr) = output(&mut fomsim(&[
        "extract-kappas",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    let fit: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let kappa0 = fit["kappa0_hz"].as_f64().unwrap();
    let q = fit["q_loaded"].as_f64().unwrap();
    assert!((kappa0 / 790.0e3 - 1.0).abs() < 0.01, "kappa0 = {kappa0} Hz");
    assert!((q / 3300.0 - 1.0).abs() < 0.01, "q_loaded = {q}");
}

#[test]
fn extract_kappas_numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    // Valid format, but three flat points carry no resonance to fit.
    fs::write(
        &path,
        "# freq_hz, re(S11), im(S11), re(S21), im(S21)\n\
         4.0e9, 0.5, 0.0, 0.5, 0.0\n\
         4.1e9, 0.5, 0.0, 0.5, 0.0\n\
         4.2e9, 0.5, 0.0, 0.5, 0.0\n",
    )
    .unwrap();
    let (code, _, stderr) = output(&mut fomsim(&["extract-kappas", path.to_str().unwrap()]));
    assert_eq!(code, 3, "stderr: {stderr}");
}

#[test]
fn demod_then_asd_chain_recovers_a_tone() {
    let dir = tempfile::tempdir().unwrap();
    let fs_hz = 1_048_576.0;
    let n = 1 << 18;
    let f_m = 5.0e3;
    let b_rms = 1.0e-7;
    let b0 = 0.178;
    let samples: Vec<f64> = (0..n)
        .map(|i| std::f64::consts::SQRT_2 * b_rms * (TAU * f_m * i as f64 / fs_hz).cos())
        .collect();
    let field = FieldSeries::new(samples, fs_hz).unwrap();
    let carrier = CarrierSpec {
        b0,
        lo_frequency_hz: GAMMA_HZ_PER_T * b0 - fs_hz / 4.0,
        amplitude: 1.0,
    };
    let waveform = synthesize_waveform(&field, &carrier, None).unwrap().value;
    let wf_path = dir.path().join("if_record.f64");
    write_waveform_binary(&wf_path, &waveform).unwrap();

    let field_path = dir.path().join("recovered.f64");
    let (code, stdout, stderr) = output(&mut fomsim(&[
        "demod",
        wf_path.to_str().unwrap(),
        field_path.to_str().unwrap(),
        "--b0-tesla",
        "0.178",
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    assert!(stdout.contains("demodulated"), "stdout: {stdout}");

    let recovered = read_field_binary(&field_path).unwrap();
    assert_eq!(recovered.samples.len(), n);
    let interior = &recovered.samples[8..n - 8];
    let read = tone_rms_amplitude(interior, fs_hz, f_m);
    assert!(
        (read / b_rms - 1.0).abs() < 0.01,
        "tone through the file chain: {read} T"
    );

    let asd_path = dir.path().join("asd.csv");
    let (code, _, stderr) = output(&mut fomsim(&[
        "asd",
        field_path.to_str().unwrap(),
        asd_path.to_str().unwrap(),
        "--segment-len",
        "65536",
        "--window",
        "hann",
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    let mut sidecar = asd_path.clone().into_os_string();
    sidecar.push(".json");
    assert!(Path::new(&sidecar).exists(), "missing ASD metadata sidecar");

    // The ASD's strongest bin must sit at the tone frequency.
    let text = fs::read_to_string(&asd_path).unwrap();
    let (mut peak_f, mut peak_a) = (0.0f64, 0.0f64);
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        let f: f64 = cols.next().unwrap().trim().parse().unwrap();
        let a: f64 = cols.next().unwrap().trim().parse().unwrap();
        if f > 1.0 && a > peak_a {
            (peak_f, peak_a) = (f, a);
        }
    }
    assert!(
        (peak_f - f_m).abs() <= fs_hz / 65536.0,
        "ASD peak at {peak_f} Hz, expected {f_m} Hz"
    );
}

#[test]
fn demod_rejects_an_inconsistent_bias_field() {
    let dir = tempfile::tempdir().unwrap();
    let fs_hz = 1.0e6;
    let samples: Vec<f64> = (0..4096)
        .map(|i| (TAU * 0.25 * i as f64).cos())
        .collect();
    let waveform = fomsim_core::encode::Waveform {
        samples,
        sample_rate: fs_hz,
        carrier_hz: 2.5e5,
    };
    let wf_path = dir.path().join("record.f64");
    write_waveform_binary(&wf_path, &waveform).unwrap();
    let out_path = dir.path().join("out.f64");
    // γ·B0/2π = 28 kHz sits far below the 250 kHz record carrier.
    let (code, _, stderr) = output(&mut fomsim(&[
        "demod",
        wf_path.to_str().unwrap(),
        out_path.to_str().unwrap(),
        "--b0-tesla",
        "1e-6",
    ]));
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("local oscillator"), "stderr: {stderr}");
}

#[test]
fn asd_rejects_a_bad_tukey_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let field = FieldSeries::new(vec![1.0e-12; 4096], 1.0e4).unwrap();
    let path = dir.path().join("field.f64");
    fomsim_core::io::write_field_binary(&path, &field).unwrap();
    let out = dir.path().join("asd.csv");
    let (code, _, stderr) = output(&mut fomsim(&[
        "asd",
        path.to_str().unwrap(),
        out.to_str().unwrap(),
        "--tukey-alpha",
        "1.5",
    ]));
    assert_eq!(code, 2);
    assert!(stderr.contains("tukey-alpha"), "stderr: {stderr}");
}

#[test]
fn limits_json_matches_the_closed_forms() {
    let (code, stdout, stderr) = output(&mut fomsim(&["limits", "--format", "json"]));
    assert_eq!(code, 0, "stderr: {stderr}");
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let ztc = report["ztc_angle_deg"].as_f64().unwrap();
    assert!((ztc - 29.67).abs() < 0.01, "ztc angle {ztc} deg");
    let spl = report["eta_spl_tesla_sqrt_s"].as_f64().unwrap();
    assert!((spl / 2.6865e-18 - 1.0).abs() < 1.0e-3, "eta_spl {spl}");
    let ratio = report["thermal_to_spl_ratio"].as_f64().unwrap();
    assert!((ratio - 70.2).abs() < 0.5, "thermal/spl ratio {ratio}");
}

//! File formats: plain-text tables, binary records, and JSON sidecars.
//!
//! Text tables are comma-separated with optional whitespace, support `#`
//! comments (full-line or trailing) and blank lines, and report parse errors
//! with 1-based line numbers. Floating-point values are written with Rust's
//! shortest round-trip representation, so write → read is lossless.
//!
//! Large records (waveforms, field series) use a raw little-endian `f64`
//! array next to a JSON sidecar named `<file>.json` carrying the sampling
//! metadata; text is impractical at 5·10⁷ samples.

use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encode::{FieldSeries, Waveform};
use crate::fmr::{SweepFit, SweepPoint};
use crate::leeson::{LeesonFit, PhaseNoiseSpectrum};
use crate::spectral::{AsdSpectrum, WindowKind};

use std::f64::consts::TAU;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        message: String,
    },
    /// The file parsed but its contents are not a valid record.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

/// Parses a comma- or whitespace-separated table of `COLS` floats per row,
/// skipping comments and blank lines; yields `(line_number, row)`.
fn parse_table<const COLS: usize>(
    path: &Path,
    text: &str,
) -> Result<Vec<(usize, [f64; COLS])>, IoError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.len() != COLS {
            return Err(IoError::parse(
                path,
                line_no,
                format!("expected {COLS} columns, found {}", fields.len()),
            ));
        }
        let mut row = [0.0f64; COLS];
        for (slot, field) in row.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|_| {
                IoError::parse(path, line_no, format!("invalid number {field:?}"))
            })?;
        }
        rows.push((line_no, row));
    }
    Ok(rows)
}

fn write_text(path: &Path, render: impl FnOnce(&mut String)) -> Result<(), IoError> {
    let mut text = String::new();
    render(&mut text);
    fs::write(path, text).map_err(|e| IoError::file(path, e))
}

// ---------------------------------------------------------------------------
// Field series: two-column text `time_s, b_tesla`.
// ---------------------------------------------------------------------------

/// Relative non-uniformity of the time column tolerated by the reader.
const TIME_GRID_TOLERANCE: f64 = 1.0e-6;

/// Reads a field record from `time_s, b_tesla` text. The time column must be
/// a uniform grid; the sample rate is inferred from it.
pub fn read_field_csv(path: &Path) -> Result<FieldSeries, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let rows = parse_table::<2>(path, &text)?;
    if rows.len() < 2 {
        return Err(IoError::format(
            path,
            format!("need at least 2 samples to infer a sample rate, got {}", rows.len()),
        ));
    }
    let t0 = rows[0].1[0];
    let dt = rows[1].1[0] - t0;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IoError::parse(
            path,
            rows[1].0,
            format!("time column must increase, first step is {dt} s"),
        ));
    }
    let mut samples = Vec::with_capacity(rows.len());
    for (i, (line_no, [t, b])) in rows.iter().enumerate() {
        let expected = t0 + dt * i as f64;
        if (t - expected).abs() > TIME_GRID_TOLERANCE * dt {
            return Err(IoError::parse(
                path,
                *line_no,
                format!("non-uniform time grid: expected {expected} s, found {t} s"),
            ));
        }
        samples.push(*b);
    }
    // The full span gives the least noisy rate estimate once uniformity holds.
    let span_dt = (rows[rows.len() - 1].1[0] - t0) / (rows.len() - 1) as f64;
    FieldSeries::new(samples, 1.0 / span_dt).map_err(|e| IoError::format(path, e.to_string()))
}

/// Writes a field record as `time_s, b_tesla` text with `t = i/f_s`.
pub fn write_field_csv(path: &Path, field: &FieldSeries) -> Result<(), IoError> {
    write_text(path, |out| {
        out.push_str("# time_s, b_tesla\n");
        let dt = 1.0 / field.sample_rate;
        for (i, b) in field.samples.iter().enumerate() {
            out.push_str(&format!("{}, {b}\n", i as f64 * dt));
        }
    })
}

// ---------------------------------------------------------------------------
// Binary records with JSON sidecars.
// ---------------------------------------------------------------------------

/// Sidecar metadata for binary little-endian `f64` records. `carrier_hz` is
/// present for waveforms and absent for baseband field records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySidecar {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".json");
    PathBuf::from(os)
}

fn write_binary(path: &Path, samples: &[f64], sidecar: &BinarySidecar) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|e| IoError::file(path, e))?;
    let mut out = BufWriter::new(file);
    for v in samples {
        out.write_all(&v.to_le_bytes())
            .map_err(|e| IoError::file(path, e))?;
    }
    out.flush().map_err(|e| IoError::file(path, e))?;
    let meta = sidecar_path(path);
    let json = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    fs::write(&meta, json).map_err(|e| IoError::file(&meta, e))
}

fn read_binary(path: &Path) -> Result<(Vec<f64>, BinarySidecar), IoError> {
    let meta = sidecar_path(path);
    let text = fs::read_to_string(&meta).map_err(|e| IoError::file(&meta, e))?;
    let sidecar: BinarySidecar = serde_json::from_str(&text)
        .map_err(|e| IoError::format(&meta, format!("invalid sidecar: {e}")))?;
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    if bytes.len() != 8 * sidecar.n_samples {
        return Err(IoError::format(
            path,
            format!(
                "expected {} samples ({} bytes), file has {} bytes",
                sidecar.n_samples,
                8 * sidecar.n_samples,
                bytes.len()
            ),
        ));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((samples, sidecar))
}

/// Writes a waveform as raw little-endian `f64` plus a `<file>.json` sidecar.
pub fn write_waveform_binary(path: &Path, waveform: &Waveform) -> Result<(), IoError> {
    write_binary(
        path,
        &waveform.samples,
        &BinarySidecar {
            sample_rate_hz: waveform.sample_rate,
            n_samples: waveform.samples.len(),
            carrier_hz: Some(waveform.carrier_hz),
        },
    )
}

/// Reads a waveform written by [`write_waveform_binary`].
pub fn read_waveform_binary(path: &Path) -> Result<Waveform, IoError> {
    let (samples, sidecar) = read_binary(path)?;
    let carrier_hz = sidecar.carrier_hz.ok_or_else(|| {
        IoError::format(&sidecar_path(path), "waveform sidecar lacks carrier_hz")
    })?;
    if !(sidecar.sample_rate_hz > 0.0 && sidecar.sample_rate_hz.is_finite()) {
        return Err(IoError::format(
            &sidecar_path(path),
            format!("sample rate must be positive, got {}", sidecar.sample_rate_hz),
        ));
    }
    Ok(Waveform {
        samples,
        sample_rate: sidecar.sample_rate_hz,
        carrier_hz,
    })
}

/// Writes a baseband field record in the same binary-plus-sidecar convention.
pub fn write_field_binary(path: &Path, field: &FieldSeries) -> Result<(), IoError> {
    write_binary(
        path,
        &field.samples,
        &BinarySidecar {
            sample_rate_hz: field.sample_rate,
            n_samples: field.len(),
            carrier_hz: None,
        },
    )
}

/// Reads a field record written by [`write_field_binary`].
pub fn read_field_binary(path: &Path) -> Result<FieldSeries, IoError> {
    let (samples, sidecar) = read_binary(path)?;
    FieldSeries::new(samples, sidecar.sample_rate_hz)
        .map_err(|e| IoError::format(path, e.to_string()))
}

// ---------------------------------------------------------------------------
// Phase-noise spectra: two-column text `offset_hz, l_dbchz`.
// ---------------------------------------------------------------------------

/// Reads a phase-noise spectrum from `offset_hz, l_dbchz` text.
pub fn read_phase_noise_csv(path: &Path) -> Result<PhaseNoiseSpectrum, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let rows = parse_table::<2>(path, &text)?;
    let offsets = rows.iter().map(|(_, r)| r[0]).collect();
    let l_db = rows.iter().map(|(_, r)| r[1]).collect();
    PhaseNoiseSpectrum::new(offsets, l_db).map_err(|e| IoError::format(path, e.to_string()))
}

/// Writes a phase-noise spectrum as `offset_hz, l_dbchz` text.
pub fn write_phase_noise_csv(path: &Path, spectrum: &PhaseNoiseSpectrum) -> Result<(), IoError> {
    write_text(path, |out| {
        out.push_str("# offset_hz, l_dbchz\n");
        for (f, l) in spectrum.offsets_hz.iter().zip(&spectrum.l_dbchz) {
            out.push_str(&format!("{f}, {l}\n"));
        }
    })
}

/// Fitted Leeson model in the external JSON convention (non-angular Hz,
/// watts, kelvin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeesonFitRecord {
    pub f_leeson_hz: f64,
    pub f_corner_hz: f64,
    pub noise_factor: f64,
    pub p_sustain_w: f64,
    pub temperature_k: f64,
    pub residual_rms_db: f64,
}

impl From<&LeesonFit> for LeesonFitRecord {
    fn from(fit: &LeesonFit) -> Self {
        LeesonFitRecord {
            f_leeson_hz: fit.model.f_leeson,
            f_corner_hz: fit.model.f_corner,
            noise_factor: fit.model.noise_factor,
            p_sustain_w: fit.model.p_sustain,
            temperature_k: fit.model.temperature,
            residual_rms_db: fit.residual_rms_db,
        }
    }
}

// ---------------------------------------------------------------------------
// S-parameter sweeps: `freq_hz, re(S11), im(S11), re(S21), im(S21)`.
// ---------------------------------------------------------------------------

/// Reads an S-parameter sweep table.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepPoint>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let rows = parse_table::<5>(path, &text)?;
    let mut points = Vec::with_capacity(rows.len());
    for (line_no, [f, re11, im11, re21, im21]) in rows {
        if !(f > 0.0 && f.is_finite()) {
            return Err(IoError::parse(
                path,
                line_no,
                format!("frequency must be positive, got {f}"),
            ));
        }
        points.push(SweepPoint {
            freq_hz: f,
            s11: Complex64::new(re11, im11),
            s21: Complex64::new(re21, im21),
        });
    }
    Ok(points)
}

/// Writes an S-parameter sweep table.
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<(), IoError> {
    write_text(path, |out| {
        out.push_str("# freq_hz, re(S11), im(S11), re(S21), im(S21)\n");
        for p in points {
            out.push_str(&format!(
                "{}, {}, {}, {}, {}\n",
                p.freq_hz, p.s11.re, p.s11.im, p.s21.re, p.s21.im
            ));
        }
    })
}

/// Sweep fit in the external JSON convention: coupling rates as non-angular
/// Hz (`κ/2π`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepFitRecord {
    pub kappa0_hz: f64,
    pub kappa1_hz: f64,
    pub kappa2_hz: f64,
    pub f_resonance_hz: f64,
    pub q_loaded: f64,
    pub f_leeson_hz: f64,
}

impl From<&SweepFit> for SweepFitRecord {
    fn from(fit: &SweepFit) -> Self {
        SweepFitRecord {
            kappa0_hz: fit.kappa0 / TAU,
            kappa1_hz: fit.kappa1 / TAU,
            kappa2_hz: fit.kappa2 / TAU,
            f_resonance_hz: fit.f_resonance_hz,
            q_loaded: fit.q_loaded,
            f_leeson_hz: fit.f_leeson_hz,
        }
    }
}

// ---------------------------------------------------------------------------
// ASD spectra: `freq_hz, asd_t_per_rthz` plus JSON metadata.
// ---------------------------------------------------------------------------

/// Sidecar metadata describing how an exported ASD table was computed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsdMetadata {
    pub window: WindowKind,
    pub segment_len: usize,
    pub n_segments: usize,
    pub resolution_hz: f64,
    pub enbw_hz: f64,
    /// Normalization convention of the table's second column.
    pub convention: String,
}

/// Writes an ASD as `freq_hz, asd_t_per_rthz` text plus a `<file>.json`
/// metadata sidecar. The second column is the noise-density normalization
/// (bin amplitude divided by √ENBW).
pub fn write_asd_csv(path: &Path, asd: &AsdSpectrum) -> Result<(), IoError> {
    write_text(path, |out| {
        out.push_str("# freq_hz, asd_t_per_rthz\n");
        let density = asd.density();
        for (f, d) in asd.frequencies_hz.iter().zip(&density) {
            out.push_str(&format!("{f}, {d}\n"));
        }
    })?;
    let meta = AsdMetadata {
        window: asd.window,
        segment_len: asd.segment_len,
        n_segments: asd.n_segments,
        resolution_hz: asd.resolution_hz,
        enbw_hz: asd.enbw_hz,
        convention: "noise amplitude spectral density, rms, per √Hz".to_string(),
    };
    let meta_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&meta_path, json).map_err(|e| IoError::file(&meta_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmr::{fit_sweep, s_parameters, ResonatorModel};
    use crate::spectral::{field_asd, DEFAULT_WINDOW};
    use std::f64::consts::PI;

    fn dir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn field_csv_round_trips_and_infers_the_rate() {
        let d = dir();
        let p = d.path().join("field.csv");
        let field = FieldSeries::new(
            (0..64).map(|i| (i as f64 * 0.3).sin() * 1e-12).collect(),
            48_000.0,
        )
        .unwrap();
        write_field_csv(&p, &field).unwrap();
        let back = read_field_csv(&p).unwrap();
        assert_eq!(back.samples, field.samples);
        assert!((back.sample_rate / field.sample_rate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn field_csv_accepts_comments_and_whitespace_layout() {
        let d = dir();
        let p = d.path().join("field.csv");
        fs::write(
            &p,
            "# a header\n\n0.0  1.0e-12\n0.001\t2.0e-12 # trailing note\n0.002 3e-12\n",
        )
        .unwrap();
        let field = read_field_csv(&p).unwrap();
        assert_eq!(field.samples, vec![1.0e-12, 2.0e-12, 3.0e-12]);
        assert!((field.sample_rate - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn field_csv_rejects_bad_rows_with_line_numbers() {
        let d = dir();
        let p = d.path().join("field.csv");

        fs::write(&p, "0.0, 1e-12\n0.001, oops\n").unwrap();
        let err = read_field_csv(&p).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }), "{err}");

        fs::write(&p, "0.0, 1e-12\n0.001, 2e-12\n0.005, 3e-12\n").unwrap();
        let err = read_field_csv(&p).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("non-uniform"), "{err}");

        fs::write(&p, "0.0, 1e-12\n0.001\n").unwrap();
        let err = read_field_csv(&p).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn waveform_binary_round_trips_bit_exactly() {
        let d = dir();
        let p = d.path().join("wave.f64");
        let wave = Waveform {
            samples: (0..257).map(|i| (i as f64 * 0.11).cos()).collect(),
            sample_rate: 5.0e6,
            carrier_hz: 1.0e6,
        };
        write_waveform_binary(&p, &wave).unwrap();
        let back = read_waveform_binary(&p).unwrap();
        assert_eq!(back.samples, wave.samples);
        assert_eq!(back.sample_rate, wave.sample_rate);
        assert_eq!(back.carrier_hz, wave.carrier_hz);
        assert!(p.with_extension("f64.json").exists());
    }

    #[test]
    fn field_binary_round_trips_and_checks_length() {
        let d = dir();
        let p = d.path().join("field.f64");
        let field =
            FieldSeries::new((0..100).map(|i| i as f64 * 1e-15).collect(), 5.0e6).unwrap();
        write_field_binary(&p, &field).unwrap();
        let back = read_field_binary(&p).unwrap();
        assert_eq!(back.samples, field.samples);

        // Truncate the payload: the sidecar no longer matches.
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        let err = read_field_binary(&p).unwrap_err();
        assert!(matches!(err, IoError::Format { .. }), "{err}");
    }

    #[test]
    fn phase_noise_csv_round_trips() {
        let d = dir();
        let p = d.path().join("pn.csv");
        let spectrum = PhaseNoiseSpectrum::new(
            vec![1.0e3, 1.0e4, 1.0e5],
            vec![-80.0, -110.0, -140.0],
        )
        .unwrap();
        write_phase_noise_csv(&p, &spectrum).unwrap();
        let back = read_phase_noise_csv(&p).unwrap();
        assert_eq!(back.offsets_hz, spectrum.offsets_hz);
        assert_eq!(back.l_dbchz, spectrum.l_dbchz);

        // Unsorted offsets are a format error, not a line error.
        fs::write(&p, "1e4, -110\n1e3, -80\n").unwrap();
        assert!(matches!(
            read_phase_noise_csv(&p).unwrap_err(),
            IoError::Format { .. }
        ));
    }

    #[test]
    fn sweep_csv_round_trips_and_feeds_the_fitter() {
        let d = dir();
        let p = d.path().join("sweep.csv");
        let model = ResonatorModel::reference();
        let omega_y = model.resonance().unwrap();
        let f0 = omega_y / TAU;
        let points: Vec<SweepPoint> = (0..801)
            .map(|i| {
                let f = f0 + (i as f64 - 400.0) * 10.0e3;
                let s = s_parameters(&model, TAU * f, omega_y);
                SweepPoint {
                    freq_hz: f,
                    s11: s.s11,
                    s21: s.s21,
                }
            })
            .collect();
        write_sweep_csv(&p, &points).unwrap();
        let back = read_sweep_csv(&p).unwrap();
        assert_eq!(back.len(), points.len());
        for (a, b) in back.iter().zip(&points) {
            assert_eq!(a.freq_hz, b.freq_hz);
            assert_eq!(a.s11, b.s11);
            assert_eq!(a.s21, b.s21);
        }
        let fit = fit_sweep(&back).unwrap();
        let record = SweepFitRecord::from(&fit);
        assert!((record.kappa0_hz / 790.0e3 - 1.0).abs() < 0.01, "{record:?}");
        assert!((record.kappa1_hz / 315.0e3 - 1.0).abs() < 0.01);
        assert!((record.kappa2_hz / 405.0e3 - 1.0).abs() < 0.01);
    }

    #[test]
    fn leeson_fit_record_uses_external_names() {
        let fit = LeesonFit {
            model: crate::leeson::LeesonModel::reference(),
            residual_rms_db: 0.12,
            iterations: 9,
            n_points: 40,
        };
        let record = LeesonFitRecord::from(&fit);
        let json = serde_json::to_value(record).unwrap();
        assert_eq!(json["f_leeson_hz"], 600.0e3);
        assert_eq!(json["f_corner_hz"], 6.6e3);
        assert_eq!(json["p_sustain_w"], 2.0e-3);
        assert_eq!(json["temperature_k"], 300.0);
    }

    #[test]
    fn asd_export_writes_density_and_metadata() {
        let d = dir();
        let p = d.path().join("asd.csv");
        let fs_hz = 8192.0;
        let n = 8192;
        let field = FieldSeries::new(
            (0..n)
                .map(|i| 2.0e-12 * (2.0 * PI * 1024.0 * i as f64 / fs_hz).cos())
                .collect(),
            fs_hz,
        )
        .unwrap();
        let asd = field_asd(&field, 2048, DEFAULT_WINDOW).unwrap();
        write_asd_csv(&p, &asd).unwrap();

        let text = fs::read_to_string(&p).unwrap();
        let rows = parse_table::<2>(&p, &text).unwrap();
        assert_eq!(rows.len(), asd.frequencies_hz.len());
        // Row at the tone bin carries amplitude/√ENBW.
        let bin = asd.bin_of(1024.0);
        let expected = asd.amplitude[bin] / asd.enbw_hz.sqrt();
        assert!((rows[bin].1[1] / expected - 1.0).abs() < 1e-12);

        let meta: AsdMetadata =
            serde_json::from_str(&fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
        assert_eq!(meta.segment_len, 2048);
        assert_eq!(meta.n_segments, 4);
        assert!(matches!(meta.window, WindowKind::Tukey { .. }));
        assert!(meta.convention.contains("√Hz"));
    }
}

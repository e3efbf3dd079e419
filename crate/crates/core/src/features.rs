//! STFT power spectrograms, `log(1 + S)` scaling and standardisation.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    /// Symmetric (`n - 1` denominator) Hann window; `false` selects the
    /// periodic form.
    pub symmetric: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 128,
            hop: 64,
            symmetric: true,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || self.hop * 2 != self.window_len {
            return Err(Error::Config(format!(
                "STFT needs window >= 2 and 50% overlap, got window {} hop {}",
                self.window_len, self.hop
            )));
        }
        Ok(())
    }

    pub fn freq_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn frames(&self, signal_len: usize) -> usize {
        if signal_len < self.window_len {
            0
        } else {
            (signal_len - self.window_len) / self.hop + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    RawPower,
    LogScaled,
    Standardized,
}

/// Time-frequency matrix with frequency bins as rows and frames as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f64>,
    pub stage: Stage,
}

impl Spectrogram {
    pub fn bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }
}

pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    hann(n, true)
}

fn hann(n: usize, symmetric: bool) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!("Hann window needs at least 2 points, got {n}")));
    }
    let denom = if symmetric { n - 1 } else { n } as f64;
    Ok((0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos()))
        .collect())
}

/// Squared-magnitude STFT. Frame `j` covers samples
/// `[j * hop, j * hop + window_len)`; a trailing partial frame is dropped.
pub fn stft_power(signal: &Signal, config: &StftConfig) -> Result<Spectrogram> {
    stft_power_samples(signal.samples(), config)
}

pub(crate) fn stft_power_samples(x: &[f64], config: &StftConfig) -> Result<Spectrogram> {
    config.validate()?;
    if x.len() < config.window_len {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than the {}-point STFT window",
            x.len(),
            config.window_len
        )));
    }
    let n = config.window_len;
    let window = hann(n, config.symmetric)?;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let frames = config.frames(x.len());
    let bins = config.freq_bins();
    let mut values = Array2::zeros((bins, frames));
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for j in 0..frames {
        let frame = &x[j * config.hop..j * config.hop + n];
        for ((b, v), w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, c) in buf[..bins].iter().enumerate() {
            values[[k, j]] = c.norm_sqr();
        }
    }
    Ok(Spectrogram {
        values,
        stage: Stage::RawPower,
    })
}

pub fn log_scale(spec: &Spectrogram) -> Result<Spectrogram> {
    if spec.stage != Stage::RawPower {
        return Err(Error::invalid(format!("log scaling expects raw power, got {:?}", spec.stage)));
    }
    if spec.values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid("raw power spectrogram has negative or NaN entries"));
    }
    Ok(Spectrogram {
        values: spec.values.mapv(f64::ln_1p),
        stage: Stage::LogScaled,
    })
}

/// Raw power followed by log scaling.
pub fn log_spectrogram(samples: &[f64], config: &StftConfig) -> Result<Spectrogram> {
    log_scale(&stft_power_samples(samples, config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// One mean and standard deviation over every element.
    #[default]
    Global,
    /// One mean and standard deviation per frequency bin.
    PerBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mode: NormMode,
    /// One entry for [`NormMode::Global`], one per bin otherwise.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: String,
}

/// Running mean and variance (Welford).
#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn std(&self) -> f64 {
        (self.m2 / self.n).sqrt()
    }
}

/// Fits standardisation statistics (population std) on training
/// spectrograms only.
pub fn fit_norm_stats(train: &[Spectrogram], mode: NormMode, fitted_on: &str) -> Result<NormStats> {
    let first = train
        .first()
        .ok_or_else(|| Error::invalid("cannot fit normalisation on an empty training set"))?;
    let bins = first.bins();
    let mut acc = vec![Moments::default(); if mode == NormMode::Global { 1 } else { bins }];
    for s in train {
        if s.stage != Stage::LogScaled {
            return Err(Error::invalid(format!("normalisation expects log-scaled input, got {:?}", s.stage)));
        }
        if s.bins() != bins {
            return Err(Error::shape(format!("{bins} bins"), format!("{} bins", s.bins())));
        }
        for ((k, _), &v) in s.values.indexed_iter() {
            let slot = if mode == NormMode::Global { 0 } else { k };
            acc[slot].push(v);
        }
    }
    let std: Vec<f64> = acc.iter().map(Moments::std).collect();
    if let Some(k) = std.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::invalid(format!(
            "degenerate training spectrograms: zero variance{}",
            if mode == NormMode::PerBin { format!(" in bin {k}") } else { String::new() }
        )));
    }
    Ok(NormStats {
        mode,
        mean: acc.iter().map(|m| m.mean).collect(),
        std,
        fitted_on: fitted_on.to_owned(),
    })
}

pub fn standardize(spec: &Spectrogram, stats: &NormStats) -> Result<Spectrogram> {
    if spec.stage != Stage::LogScaled {
        return Err(Error::invalid(format!("standardisation expects log-scaled input, got {:?}", spec.stage)));
    }
    if stats.mode == NormMode::PerBin && stats.mean.len() != spec.bins() {
        return Err(Error::shape(format!("{} bins", stats.mean.len()), format!("{} bins", spec.bins())));
    }
    let mut values = spec.values.clone();
    for ((k, _), v) in values.indexed_iter_mut() {
        let slot = if stats.mode == NormMode::Global { 0 } else { k };
        *v = (*v - stats.mean[slot]) / stats.std[slot];
    }
    Ok(Spectrogram {
        values,
        stage: Stage::Standardized,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    bins: usize,
    frames: usize,
    stage: Stage,
    stats_id: Option<String>,
}

/// Writes the matrix as row-major little-endian `f32` to `path` and a JSON
/// header to `path` with `.json` appended.
pub fn write_spectrogram_dump(spec: &Spectrogram, path: &Path, stats_id: Option<&str>) -> Result<()> {
    let mut bytes = Vec::with_capacity(spec.values.len() * 4);
    for row in spec.values.rows() {
        for &v in row {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    write_atomic(path, &bytes)?;
    let header = DumpHeader {
        bins: spec.bins(),
        frames: spec.frames(),
        stage: spec.stage,
        stats_id: stats_id.map(str::to_owned),
    };
    let mut header_path = path.as_os_str().to_owned();
    header_path.push(".json");
    write_atomic(Path::new(&header_path), &serde_json::to_vec_pretty(&header)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(x: Vec<f64>) -> Signal {
        Signal::new(x, 100).unwrap()
    }

    #[test]
    fn hann_shape() {
        let w = hann_window(128).unwrap();
        assert_eq!(w[0], 0.0);
        assert!(w[127].abs() < 1e-15);
        for (k, v) in w.iter().enumerate() {
            let direct = 0.5 * (1.0 - (2.0 * PI * k as f64 / 127.0).cos());
            assert!((v - direct).abs() <= 1e-15);
        }
        let odd = hann_window(9).unwrap();
        assert!((odd[4] - 1.0).abs() < 1e-15);
        assert!(hann_window(1).is_err());
        let periodic = hann(8, false).unwrap();
        assert!((periodic[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frame_arithmetic() {
        let s = stft_power(&sig(vec![0.0; 500]), &StftConfig::default()).unwrap();
        assert_eq!(s.shape(), (65, 6));
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(stft_power(&sig(vec![0.0; 127]), &StftConfig::default()).is_err());
        let bad = StftConfig { window_len: 128, hop: 32, symmetric: true };
        assert!(stft_power(&sig(vec![0.0; 500]), &bad).is_err());
    }

    #[test]
    fn log_scale_values() {
        let raw = Spectrogram {
            values: Array2::from_shape_vec((1, 3), vec![0.0, std::f64::consts::E - 1.0, 3.0]).unwrap(),
            stage: Stage::RawPower,
        };
        let l = log_scale(&raw).unwrap();
        assert_eq!(l.values[[0, 0]], 0.0);
        assert!((l.values[[0, 1]] - 1.0).abs() < 1e-15);
        assert!(log_scale(&l).is_err());
        let neg = Spectrogram { values: Array2::from_elem((1, 1), -1e-3), stage: Stage::RawPower };
        assert!(log_scale(&neg).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Array2::from_shape_fn((65, 6), |_| rng.gen_range(0.0..1e4));
        let l = log_scale(&Spectrogram { values: m.clone(), stage: Stage::RawPower }).unwrap();
        for (a, b) in l.values.iter().zip(m.iter()) {
            assert!((a - (1.0 + b).ln()).abs() <= 1e-12);
        }
    }

    fn random_logs(n: usize, seed: u64) -> Vec<Spectrogram> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Spectrogram {
                values: Array2::from_shape_fn((9, 4), |(k, _)| rng.gen_range(0.0..5.0) + k as f64),
                stage: Stage::LogScaled,
            })
            .collect()
    }

    #[test]
    fn global_stats_match_two_pass() {
        let specs = random_logs(100, 4);
        let stats = fit_norm_stats(&specs, NormMode::Global, "train").unwrap();
        let all: Vec<f64> = specs.iter().flat_map(|s| s.values.iter().copied()).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
        assert!((stats.mean[0] - mean).abs() < 1e-10);
        assert!((stats.std[0] - var.sqrt()).abs() < 1e-10);

        let z: Vec<f64> = specs
            .iter()
            .flat_map(|s| standardize(s, &stats).unwrap().values.into_iter())
            .collect();
        let zm = z.iter().sum::<f64>() / z.len() as f64;
        let zs = (z.iter().map(|v| (v - zm).powi(2)).sum::<f64>() / z.len() as f64).sqrt();
        assert!(zm.abs() < 1e-9 && (zs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn standardisation_is_location_invariant() {
        let specs = random_logs(10, 7);
        let shifted: Vec<Spectrogram> = specs
            .iter()
            .map(|s| Spectrogram { values: &s.values + 3.25, stage: Stage::LogScaled })
            .collect();
        let a = fit_norm_stats(&specs, NormMode::Global, "a").unwrap();
        let b = fit_norm_stats(&shifted, NormMode::Global, "b").unwrap();
        for (s, t) in specs.iter().zip(&shifted) {
            let x = standardize(s, &a).unwrap();
            let y = standardize(t, &b).unwrap();
            for (u, v) in x.values.iter().zip(y.values.iter()) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn per_bin_stats() {
        let specs = random_logs(30, 2);
        let stats = fit_norm_stats(&specs, NormMode::PerBin, "t").unwrap();
        assert_eq!(stats.mean.len(), 9);
        for k in 0..9 {
            let vals: Vec<f64> = specs.iter().flat_map(|s| s.values.row(k).to_vec()).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((stats.mean[k] - m).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_stats_rejected() {
        let flat = vec![Spectrogram { values: Array2::from_elem((3, 2), 1.5), stage: Stage::LogScaled }];
        assert!(fit_norm_stats(&flat, NormMode::Global, "x").is_err());
        assert!(fit_norm_stats(&[], NormMode::Global, "x").is_err());
    }

    #[test]
    fn dump_writes_header_and_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.f32");
        let spec = Spectrogram { values: Array2::from_elem((65, 6), 0.5), stage: Stage::LogScaled };
        write_spectrogram_dump(&spec, &path, Some("stats-1")).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 65 * 6 * 4);
        let header: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("s.f32.json")).unwrap()).unwrap();
        assert_eq!(header["bins"], 65);
        assert_eq!(header["stage"], "log_scaled");
    }
}

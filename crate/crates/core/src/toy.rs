//! Synthetic EEG/EMG recording with known sleep stages, for desk-scale
//! end-to-end runs.
//!
//! Epochs are laid out in contiguous same-class blocks cycling
//! WAKE → NREM → REM. NREM EEG is a unit 2 Hz sinusoid, REM EEG a unit 6 Hz
//! sinusoid, both plus white Gaussian noise of standard deviation
//! `noise_sigma`. WAKE EEG is broadband. EMG is white noise whose RMS is
//! three times higher during WAKE than during sleep.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ClassLabel, Signal};

pub const TOY_SAMPLE_RATE: u32 = 100;
pub const TOY_EPOCH_SECONDS: f64 = 5.0;
const EPOCH_SAMPLES: usize = 500;
const SLEEP_EMG_RMS: f64 = 0.2;
const WAKE_EMG_RMS: f64 = 3.0 * SLEEP_EMG_RMS;
const NREM_HZ: f64 = 2.0;
const REM_HZ: f64 = 6.0;
/// Components of the WAKE EEG: equal-amplitude tones spread over 12–30 Hz.
const WAKE_TONES_HZ: [f64; 4] = [12.5, 17.0, 23.5, 29.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub epochs_per_class: usize,
    pub noise_sigma: f64,
    /// Epochs per contiguous same-class block.
    pub block_epochs: usize,
    pub subject_id: String,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            epochs_per_class: 100,
            noise_sigma: 0.3,
            block_epochs: 10,
            subject_id: "toy-1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyRecording {
    pub eeg: Signal,
    pub emg: Signal,
    /// Stage of each 5 s epoch, in recording order.
    pub labels: Vec<ClassLabel>,
}

/// Block schedule: `(class, epochs)` in recording order.
fn schedule(epochs_per_class: usize, block: usize) -> Vec<(ClassLabel, usize)> {
    let mut left = [epochs_per_class; ClassLabel::COUNT];
    let mut out = Vec::new();
    while left.iter().any(|&n| n > 0) {
        for c in ClassLabel::ALL {
            let n = left[c.index()].min(block);
            if n > 0 {
                out.push((c, n));
                left[c.index()] -= n;
            }
        }
    }
    out
}

pub fn make_toy_dataset(epochs_per_class: usize, noise_sigma: f64, seed: u64) -> Result<ToyRecording> {
    make_toy_recording(&ToyConfig {
        epochs_per_class,
        noise_sigma,
        ..ToyConfig::default()
    }, seed)
}

pub fn make_toy_recording(config: &ToyConfig, seed: u64) -> Result<ToyRecording> {
    if config.epochs_per_class == 0 || config.block_epochs == 0 {
        return Err(Error::invalid("toy recording needs at least one epoch per class and block"));
    }
    if !(config.noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let rate = f64::from(TOY_SAMPLE_RATE);
    let total = 3 * config.epochs_per_class * EPOCH_SAMPLES;
    let mut eeg = Vec::with_capacity(total);
    let mut emg = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(3 * config.epochs_per_class);

    for (class, n_epochs) in schedule(config.epochs_per_class, config.block_epochs) {
        let n = n_epochs * EPOCH_SAMPLES;
        let tones: Vec<(f64, f64)> = match class {
            ClassLabel::Nrem => vec![(NREM_HZ, 1.0)],
            ClassLabel::Rem => vec![(REM_HZ, 1.0)],
            ClassLabel::Wake => WAKE_TONES_HZ.iter().map(|&f| (f, 0.5)).collect(),
        };
        let phases: Vec<f64> = tones.iter().map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let emg_rms = if class == ClassLabel::Wake { WAKE_EMG_RMS } else { SLEEP_EMG_RMS };
        for i in 0..n {
            let t = i as f64 / rate;
            let clean: f64 = tones
                .iter()
                .zip(&phases)
                .map(|(&(f, a), ph)| a * (2.0 * PI * f * t + ph).sin())
                .sum();
            eeg.push(clean + config.noise_sigma * unit.sample(&mut rng));
            emg.push(emg_rms * unit.sample(&mut rng));
        }
        labels.extend(std::iter::repeat(class).take(n_epochs));
    }
    Ok(ToyRecording {
        eeg: Signal::new(eeg, TOY_SAMPLE_RATE)?,
        emg: Signal::new(emg, TOY_SAMPLE_RATE)?,
        labels,
    })
}

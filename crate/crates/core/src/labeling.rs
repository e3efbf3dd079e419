//! Two-stage sleep staging: EMG amplitude separates WAKE from SLEEP, then the
//! EEG delta/theta balance separates NREM from REM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{segment_epochs, ClassLabel, Dataset, LabeledEpoch, Signal};
use crate::spectrum::{bin_frequency, one_sided_periodogram};

/// Frequency interval `[low, high)` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub low: f64,
    pub high: f64,
}

impl FrequencyBand {
    pub const DELTA: FrequencyBand = FrequencyBand { low: 0.5, high: 4.0 };
    pub const THETA: FrequencyBand = FrequencyBand { low: 4.0, high: 8.0 };

    pub fn new(low: f64, high: f64) -> Result<Self> {
        let band = FrequencyBand { low, high };
        band.validate(f64::INFINITY)?;
        Ok(band)
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    fn validate(&self, nyquist: f64) -> Result<()> {
        if !(self.low >= 0.0 && self.low < self.high && self.high <= nyquist) {
            return Err(Error::invalid(format!(
                "band [{}, {}) Hz is not inside [0, {nyquist}] Hz",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelingConfig {
    pub delta: FrequencyBand,
    pub theta: FrequencyBand,
    pub emg_threshold_factor: f64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            delta: FrequencyBand::DELTA,
            theta: FrequencyBand::THETA,
            emg_threshold_factor: 1.5,
        }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<()> {
        self.delta.validate(f64::INFINITY)?;
        self.theta.validate(f64::INFINITY)?;
        let overlap = self.delta.low.max(self.theta.low) < self.delta.high.min(self.theta.high);
        if overlap {
            return Err(Error::Config("delta and theta bands overlap".into()));
        }
        if !(self.emg_threshold_factor > 0.0 && self.emg_threshold_factor.is_finite()) {
            return Err(Error::Config("emg_threshold_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arousal {
    Wake,
    Sleep,
}

/// Periodogram power in `band`, in the signal's squared units.
///
/// A bin belongs to the band when its centre frequency lies in
/// `[low, high)`; a band whose upper edge is the Nyquist frequency also
/// includes the Nyquist bin so that a partition of `[0, Nyquist]` covers
/// every bin exactly once.
pub fn band_power(signal: &Signal, band: FrequencyBand) -> Result<f64> {
    let nyquist = signal.nyquist();
    band.validate(nyquist)?;
    let n = signal.len();
    let rate = f64::from(signal.sample_rate());
    let power = one_sided_periodogram(signal.samples())
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| {
            let f = bin_frequency(k, n, rate);
            (f >= band.low && f < band.high) || (band.high == nyquist && f == nyquist)
        })
        .map(|(_, p)| p)
        .sum();
    Ok(power)
}

/// Median of per-epoch RMS amplitudes.
pub fn compute_emg_baseline(emg_epochs: &[Signal]) -> Result<f64> {
    if emg_epochs.is_empty() {
        return Err(Error::invalid("EMG baseline needs at least one epoch"));
    }
    let mut rms: Vec<f64> = emg_epochs.iter().map(Signal::rms).collect();
    rms.sort_by(f64::total_cmp);
    let mid = rms.len() / 2;
    Ok(if rms.len() % 2 == 1 {
        rms[mid]
    } else {
        (rms[mid - 1] + rms[mid]) / 2.0
    })
}

pub fn classify_wake_sleep(emg_epoch: &Signal, baseline: f64, config: &LabelingConfig) -> Result<Arousal> {
    if !(baseline > 0.0) {
        return Err(Error::invalid(format!("EMG baseline must be positive, got {baseline}")));
    }
    // Strict: an epoch sitting exactly on the threshold is SLEEP.
    Ok(if emg_epoch.rms() > config.emg_threshold_factor * baseline {
        Arousal::Wake
    } else {
        Arousal::Sleep
    })
}

pub fn classify_nrem_rem(eeg_epoch: &Signal, config: &LabelingConfig) -> Result<ClassLabel> {
    if eeg_epoch.nyquist() < config.theta.high {
        return Err(Error::invalid(format!(
            "sample rate {} Hz too low to resolve the theta band",
            eeg_epoch.sample_rate()
        )));
    }
    let delta = band_power(eeg_epoch, config.delta)? / config.delta.width();
    let theta = band_power(eeg_epoch, config.theta)? / config.theta.width();
    Ok(if delta >= theta {
        ClassLabel::Nrem
    } else {
        ClassLabel::Rem
    })
}

/// Labels every epoch of a simultaneous EEG/EMG recording. The returned
/// dataset carries the EEG epochs only.
pub fn label_dataset(
    eeg: &Signal,
    emg: &Signal,
    epoch_seconds: f64,
    subject_id: &str,
    config: &LabelingConfig,
) -> Result<Dataset> {
    config.validate()?;
    if eeg.len() != emg.len() || eeg.sample_rate() != emg.sample_rate() {
        return Err(Error::invalid(format!(
            "EEG ({} samples @ {} Hz) and EMG ({} samples @ {} Hz) differ",
            eeg.len(),
            eeg.sample_rate(),
            emg.len(),
            emg.sample_rate()
        )));
    }
    let eeg_epochs = segment_epochs(eeg, epoch_seconds)?;
    let emg_epochs = segment_epochs(emg, epoch_seconds)?;
    if emg_epochs.is_empty() {
        return Ok(Dataset::empty());
    }
    let baseline = compute_emg_baseline(&emg_epochs)?;
    let epochs = eeg_epochs
        .into_iter()
        .zip(&emg_epochs)
        .enumerate()
        .map(|(i, (eeg_epoch, emg_epoch))| {
            let label = match classify_wake_sleep(emg_epoch, baseline, config)? {
                Arousal::Wake => ClassLabel::Wake,
                Arousal::Sleep => classify_nrem_rem(&eeg_epoch, config)?,
            };
            Ok(LabeledEpoch::original(eeg_epoch, label, subject_id, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(epochs)
}

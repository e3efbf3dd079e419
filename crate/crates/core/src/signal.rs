//! Signal containers, epochs and datasets, plus integer-ratio resampling and
//! fixed-length epoch segmentation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Taps in the anti-alias low-pass used by [`resample`].
pub const RESAMPLE_TAPS: usize = 64;
/// Low-pass cutoff as a fraction of the target Nyquist frequency.
pub const RESAMPLE_CUTOFF: f64 = 0.45;

/// A single-channel, uniformly sampled signal with finite samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal", into = "RawSignal")]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

#[derive(Serialize, Deserialize)]
struct RawSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl TryFrom<RawSignal> for Signal {
    type Error = Error;
    fn try_from(raw: RawSignal) -> Result<Self> {
        Signal::new(raw.samples, raw.sample_rate)
    }
}

impl From<Signal> for RawSignal {
    fn from(s: Signal) -> Self {
        RawSignal {
            samples: s.samples,
            sample_rate: s.sample_rate,
        }
    }
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal has no samples"));
        }
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Signal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nyquist(&self) -> f64 {
        f64::from(self.sample_rate) / 2.0
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Root-mean-square amplitude.
    pub fn rms(&self) -> f64 {
        let ms = self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64;
        ms.sqrt()
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Signal> {
        Signal::new(
            self.samples.iter().map(|v| v * factor).collect(),
            self.sample_rate,
        )
    }
}

/// Sleep stage. The declaration order is the canonical iteration order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClassLabel {
    Wake,
    Nrem,
    Rem,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Wake, ClassLabel::Nrem, ClassLabel::Rem];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Wake => "WAKE",
            ClassLabel::Nrem => "NREM",
            ClassLabel::Rem => "REM",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "WAKE" => Ok(ClassLabel::Wake),
            "NREM" => Ok(ClassLabel::Nrem),
            "REM" => Ok(ClassLabel::Rem),
            other => Err(Error::invalid(format!("unknown class label {other:?}"))),
        }
    }
}

/// Identity of an original epoch: its recording and position within it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EpochId {
    pub subject_id: String,
    pub epoch_index: u64,
}

impl fmt::Display for EpochId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.subject_id, self.epoch_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Synthetic {
        model_id: String,
        source_epoch: EpochId,
        seed: u64,
    },
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        matches!(self, Provenance::Original)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEpoch {
    pub signal: Signal,
    pub label: ClassLabel,
    pub subject_id: String,
    pub epoch_index: u64,
    pub provenance: Provenance,
}

impl LabeledEpoch {
    pub fn original(signal: Signal, label: ClassLabel, subject_id: &str, epoch_index: u64) -> Self {
        LabeledEpoch {
            signal,
            label,
            subject_id: subject_id.to_owned(),
            epoch_index,
            provenance: Provenance::Original,
        }
    }

    pub fn id(&self) -> EpochId {
        EpochId {
            subject_id: self.subject_id.clone(),
            epoch_index: self.epoch_index,
        }
    }
}

/// An ordered collection of labeled epochs sharing one sample rate.
///
/// Metadata (subjects, class histogram) is always derived from the epochs, so
/// it cannot drift out of sync with them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    epochs: Vec<LabeledEpoch>,
}

impl Dataset {
    pub fn new(epochs: Vec<LabeledEpoch>) -> Result<Self> {
        if let Some(first) = epochs.first() {
            let rate = first.signal.sample_rate();
            if let Some(bad) = epochs.iter().find(|e| e.signal.sample_rate() != rate) {
                return Err(Error::invalid(format!(
                    "mixed sample rates: {} Hz and {} Hz (epoch {})",
                    rate,
                    bad.signal.sample_rate(),
                    bad.id()
                )));
            }
        }
        let mut seen = HashSet::new();
        for e in epochs.iter().filter(|e| e.provenance.is_original()) {
            if !seen.insert((e.subject_id.as_str(), e.epoch_index)) {
                return Err(Error::invalid(format!("duplicate original epoch {}", e.id())));
            }
        }
        Ok(Dataset { epochs })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    pub fn epochs(&self) -> &[LabeledEpoch] {
        &self.epochs
    }

    pub fn into_epochs(self) -> Vec<LabeledEpoch> {
        self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn sample_rate(&self) -> Option<u32> {
        self.epochs.first().map(|e| e.signal.sample_rate())
    }

    pub fn subject_ids(&self) -> BTreeSet<String> {
        self.epochs.iter().map(|e| e.subject_id.clone()).collect()
    }

    /// Number of epochs per class, indexed by [`ClassLabel::index`].
    pub fn class_counts(&self) -> [usize; ClassLabel::COUNT] {
        let mut counts = [0; ClassLabel::COUNT];
        for e in &self.epochs {
            counts[e.label.index()] += 1;
        }
        counts
    }

    pub fn class_histogram(&self) -> BTreeMap<ClassLabel, usize> {
        let counts = self.class_counts();
        ClassLabel::ALL
            .iter()
            .filter(|c| counts[c.index()] > 0)
            .map(|&c| (c, counts[c.index()]))
            .collect()
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.epochs.iter().map(|e| e.label).collect()
    }

    pub fn ids(&self) -> BTreeSet<EpochId> {
        self.epochs.iter().map(LabeledEpoch::id).collect()
    }

    /// Content hash over identities, labels, provenance kind and sample bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.epochs {
            h.update(e.subject_id.as_bytes());
            h.update([0]);
            h.update(e.epoch_index.to_le_bytes());
            h.update([e.label.index() as u8, e.provenance.is_original() as u8]);
            h.update(e.signal.sample_rate().to_le_bytes());
            for v in e.signal.samples() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..12])
    }
}

/// Windowed-sinc low-pass (Hamming window), normalised to unit DC gain.
/// `cutoff` is in cycles per sample.
fn lowpass_taps(n_taps: usize, cutoff: f64) -> Vec<f64> {
    let centre = (n_taps - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|k| {
            let t = k as f64 - centre;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * k as f64 / (n_taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Decimates `signal` to `target_rate` after an anti-alias low-pass.
///
/// Only integer decimation ratios are supported. Edges are extended by
/// repeating the boundary sample, which keeps constant signals exact.
pub fn resample(signal: &Signal, target_rate: u32) -> Result<Signal> {
    let rate = signal.sample_rate();
    if target_rate == 0 || target_rate > rate || rate % target_rate != 0 {
        return Err(Error::invalid(format!(
            "cannot resample {rate} Hz to {target_rate} Hz: only integer decimation is supported"
        )));
    }
    let factor = (rate / target_rate) as usize;
    if factor == 1 {
        return Ok(signal.clone());
    }
    let cutoff = RESAMPLE_CUTOFF * (f64::from(target_rate) / 2.0) / f64::from(rate);
    let taps = lowpass_taps(RESAMPLE_TAPS, cutoff);
    let x = signal.samples();
    let last = x.len() as isize - 1;
    let half = (RESAMPLE_TAPS / 2) as isize;
    let out_len = x.len() / factor;
    let out = (0..out_len)
        .map(|j| {
            let centre = (j * factor) as isize;
            taps.iter()
                .enumerate()
                .map(|(k, h)| {
                    let idx = (centre + half - 1 - k as isize).clamp(0, last);
                    h * x[idx as usize]
                })
                .sum()
        })
        .collect();
    Signal::new(out, target_rate)
}

/// Samples per epoch for a given duration, if it is a positive whole number.
pub fn epoch_samples(epoch_seconds: f64, sample_rate: u32) -> Result<usize> {
    let exact = epoch_seconds * f64::from(sample_rate);
    let rounded = exact.round();
    if !(epoch_seconds > 0.0) || rounded < 1.0 || (exact - rounded).abs() > 1e-9 * rounded.max(1.0)
    {
        return Err(Error::invalid(format!(
            "epoch of {epoch_seconds} s at {sample_rate} Hz is not a positive whole number of samples"
        )));
    }
    Ok(rounded as usize)
}

/// Splits `signal` into consecutive, non-overlapping epochs. A trailing
/// partial epoch is dropped; a signal shorter than one epoch yields nothing.
pub fn segment_epochs(signal: &Signal, epoch_seconds: f64) -> Result<Vec<Signal>> {
    let n = epoch_samples(epoch_seconds, signal.sample_rate())?;
    signal
        .samples()
        .chunks_exact(n)
        .map(|chunk| Signal::new(chunk.to_vec(), signal.sample_rate()))
        .collect()
}

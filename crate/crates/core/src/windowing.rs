//! Supervised (context, target) pairs cut from contiguous same-class runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ClassLabel, Dataset, LabeledEpoch};

pub const DEFAULT_CONTEXT_SWEEP: [usize; 5] = [10, 25, 50, 100, 250];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub context_len: usize,
    pub horizon: usize,
    /// Offset between consecutive pairs within a run.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            context_len: 100,
            horizon: 500,
            stride: 1,
        }
    }
}

impl WindowConfig {
    pub fn new(context_len: usize, horizon: usize) -> Result<Self> {
        let cfg = WindowConfig {
            context_len,
            horizon,
            stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 || self.horizon == 0 || self.stride == 0 {
            return Err(Error::Config(
                "context length, horizon and stride must all be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Pairs a run of `run_len` samples yields.
    pub fn pair_count(&self, run_len: usize) -> usize {
        let span = self.context_len + self.horizon;
        if run_len < span {
            0
        } else {
            (run_len - span) / self.stride + 1
        }
    }
}

/// A maximal stretch of consecutive same-class epochs from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub subject_id: String,
    pub first_epoch: u64,
    pub epoch_count: usize,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStream {
    pub label: ClassLabel,
    pub runs: Vec<Run>,
}

impl ClassStream {
    pub fn total_samples(&self) -> usize {
        self.runs.iter().map(|r| r.samples.len()).sum()
    }
}

/// Borrowed training pair: `context` immediately precedes `target` in `run`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPair<'a> {
    pub context: &'a [f64],
    pub target: &'a [f64],
    pub run: usize,
    pub offset: usize,
}

/// Groups epochs into per-class runs. Epochs are ordered by (subject, index)
/// and neighbours are merged when they share a label and have consecutive
/// indices, so runs never cross a label change, a gap or a recording.
pub fn build_class_streams(dataset: &Dataset) -> BTreeMap<ClassLabel, ClassStream> {
    let mut epochs: Vec<&LabeledEpoch> = dataset.epochs().iter().collect();
    epochs.sort_by(|a, b| (&a.subject_id, a.epoch_index).cmp(&(&b.subject_id, b.epoch_index)));

    let mut streams: BTreeMap<ClassLabel, ClassStream> = BTreeMap::new();
    let mut prev: Option<&LabeledEpoch> = None;
    for e in epochs {
        let extends = prev.is_some_and(|p| {
            p.subject_id == e.subject_id && p.label == e.label && p.epoch_index + 1 == e.epoch_index
        });
        let stream = streams.entry(e.label).or_insert_with(|| ClassStream {
            label: e.label,
            runs: Vec::new(),
        });
        match stream.runs.last_mut() {
            Some(run) if extends => {
                run.samples.extend_from_slice(e.signal.samples());
                run.epoch_count += 1;
            }
            _ => stream.runs.push(Run {
                subject_id: e.subject_id.clone(),
                first_epoch: e.epoch_index,
                epoch_count: 1,
                samples: e.signal.samples().to_vec(),
            }),
        }
        prev = Some(e);
    }
    streams
}

/// Sliding-window pairs over every run of `stream`, ordered by run then offset.
pub fn build_pairs<'a>(stream: &'a ClassStream, config: &WindowConfig) -> Vec<WindowPair<'a>> {
    let (l, h) = (config.context_len, config.horizon);
    stream
        .runs
        .iter()
        .enumerate()
        .flat_map(|(r, run)| {
            (0..config.pair_count(run.samples.len())).map(move |i| {
                let t = i * config.stride;
                WindowPair {
                    context: &run.samples[t..t + l],
                    target: &run.samples[t + l..t + l + h],
                    run: r,
                    offset: t,
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Signal;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn epoch(label: ClassLabel, subject: &str, idx: u64, n: usize) -> LabeledEpoch {
        let samples = (0..n).map(|i| idx as f64 * 1000.0 + i as f64).collect();
        LabeledEpoch::original(Signal::new(samples, 100).unwrap(), label, subject, idx)
    }

    #[test]
    fn adjacent_same_label_epochs_merge() {
        use ClassLabel::*;
        let d = Dataset::new(
            [Nrem, Nrem, Rem, Nrem]
                .iter()
                .enumerate()
                .map(|(i, &l)| epoch(l, "a", i as u64, 500))
                .collect(),
        )
        .unwrap();
        let s = build_class_streams(&d);
        let lens: Vec<usize> = s[&Nrem].runs.iter().map(|r| r.samples.len()).collect();
        assert_eq!(lens, vec![1000, 500]);
        assert_eq!(s[&Rem].runs.len(), 1);
        assert_eq!(s[&Rem].runs[0].samples.len(), 500);
        assert!(!s.contains_key(&Wake));
    }

    #[test]
    fn gaps_and_subjects_split_runs() {
        use ClassLabel::*;
        let d = Dataset::new(vec![
            epoch(Rem, "b", 0, 10),
            epoch(Rem, "a", 0, 10),
            epoch(Rem, "a", 1, 10),
            epoch(Rem, "a", 3, 10),
            epoch(Rem, "b", 1, 10),
        ])
        .unwrap();
        let s = &build_class_streams(&d)[&Rem];
        let shape: Vec<(&str, u64, usize)> =
            s.runs.iter().map(|r| (r.subject_id.as_str(), r.first_epoch, r.epoch_count)).collect();
        assert_eq!(shape, vec![("a", 0, 2), ("a", 3, 1), ("b", 0, 2)]);
        assert_eq!(s.runs[0].samples[10], 1000.0);
    }

    #[test]
    fn single_epoch_single_run() {
        let d = Dataset::new(vec![epoch(ClassLabel::Wake, "a", 7, 500)]).unwrap();
        let s = build_class_streams(&d);
        assert_eq!(s[&ClassLabel::Wake].runs.len(), 1);
        assert_eq!(s[&ClassLabel::Wake].runs[0].first_epoch, 7);
    }

    #[test]
    fn run_lengths_match_run_length_encoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(1..60);
            let labels: Vec<ClassLabel> =
                (0..n).map(|_| ClassLabel::ALL[rng.gen_range(0..3)]).collect();
            let d = Dataset::new(
                labels.iter().enumerate().map(|(i, &l)| epoch(l, "s", i as u64, 4)).collect(),
            )
            .unwrap();
            // Brute-force run-length encoding.
            let mut rle: Vec<(ClassLabel, usize)> = Vec::new();
            for &l in &labels {
                match rle.last_mut() {
                    Some((pl, c)) if *pl == l => *c += 1,
                    _ => rle.push((l, 1)),
                }
            }
            let streams = build_class_streams(&d);
            for c in ClassLabel::ALL {
                let expect: Vec<usize> =
                    rle.iter().filter(|(l, _)| *l == c).map(|(_, k)| k * 4).collect();
                let got: Vec<usize> = streams
                    .get(&c)
                    .map(|s| s.runs.iter().map(|r| r.samples.len()).collect())
                    .unwrap_or_default();
                assert_eq!(got, expect);
                assert_eq!(got.iter().sum::<usize>(), d.class_counts()[c.index()] * 4);
            }
        }
    }

    fn stream_of(lens: &[usize]) -> ClassStream {
        ClassStream {
            label: ClassLabel::Nrem,
            runs: lens
                .iter()
                .enumerate()
                .map(|(r, &n)| Run {
                    subject_id: "s".into(),
                    first_epoch: r as u64 * 100,
                    epoch_count: 1,
                    samples: (0..n).map(|i| (r * 100_000 + i) as f64).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn pair_counts_closed_form() {
        let cfg = WindowConfig::new(100, 500).unwrap();
        assert_eq!(build_pairs(&stream_of(&[700]), &cfg).len(), 101);
        assert_eq!(build_pairs(&stream_of(&[500]), &cfg).len(), 0);
        assert_eq!(build_pairs(&stream_of(&[600]), &cfg).len(), 1);
        assert_eq!(build_pairs(&stream_of(&[700, 10, 601]), &cfg).len(), 103);
        assert!(WindowConfig::new(0, 5).is_err());
    }

    #[test]
    fn strided_pairs() {
        let cfg = WindowConfig { context_len: 3, horizon: 2, stride: 4 };
        let s = stream_of(&[14]);
        let offsets: Vec<usize> = build_pairs(&s, &cfg).iter().map(|p| p.offset).collect();
        assert_eq!(offsets, vec![0, 4, 8]);
    }

    proptest! {
        #[test]
        fn pairs_are_direct_slices(
            lens in proptest::collection::vec(0usize..200, 1..5),
            l in 1usize..40, h in 1usize..60,
        ) {
            let s = stream_of(&lens);
            let cfg = WindowConfig::new(l, h).unwrap();
            let pairs = build_pairs(&s, &cfg);
            let mut k = 0;
            for (r, run) in s.runs.iter().enumerate() {
                let mut t = 0;
                while t + l + h <= run.samples.len() {
                    let p = pairs[k];
                    prop_assert_eq!(p.run, r);
                    prop_assert_eq!(p.offset, t);
                    prop_assert_eq!(p.context, &run.samples[t..t + l]);
                    prop_assert_eq!(p.target, &run.samples[t + l..t + l + h]);
                    // Values encode their run, so a crossing pair would mix prefixes.
                    let tag = |v: f64| (v as usize) / 100_000;
                    prop_assert!(p.context.iter().chain(p.target).all(|&v| tag(v) == r));
                    k += 1;
                    t += 1;
                }
            }
            prop_assert_eq!(k, pairs.len());
        }
    }
}

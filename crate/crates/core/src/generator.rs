//! Recursive sliding-window synthesis: one synthetic epoch per source epoch,
//! generated by the forecaster of the source epoch's class.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forecast::ForecasterModel;
use crate::signal::{ClassLabel, Dataset, EpochId, LabeledEpoch, Provenance, Signal};

/// Repeatedly forecasts `horizon`-sized chunks, feeding the most recent
/// `context_len` values back as context, until `target_len` values exist.
/// The initial context is not part of the output.
///
/// `predict` is called once per chunk; a chunk with any non-finite value
/// aborts generation with [`Error::Divergence`] naming the 0-based step.
pub fn generate_with<F>(mut predict: F, initial_context: &[f64], target_len: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if target_len == 0 {
        return Err(Error::invalid("target length must be at least 1"));
    }
    let l = initial_context.len();
    let mut history = initial_context.to_vec();
    let mut step = 0;
    while history.len() - l < target_len {
        let chunk = predict(&history[history.len() - l..])?;
        if chunk.is_empty() {
            return Err(Error::invalid("forecaster returned an empty chunk"));
        }
        if chunk.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        history.extend_from_slice(&chunk);
        step += 1;
    }
    history.drain(..l);
    history.truncate(target_len);
    Ok(history)
}

pub fn generate_recursive(model: &ForecasterModel, initial_context: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if initial_context.len() != model.spec.context_len {
        return Err(Error::shape(
            format!("initial context of {}", model.spec.context_len),
            format!("initial context of {}", initial_context.len()),
        ));
    }
    generate_with(|ctx| model.predict(ctx), initial_context, target_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub source_dataset_id: String,
    /// Forecaster id per class.
    pub models: BTreeMap<ClassLabel, String>,
    pub generation_seed: u64,
    /// Source epochs too short to seed a context window.
    pub skipped: Vec<EpochId>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }
}

/// Synthesises `ŷ = generate_recursive(model[c], y[..L], target_len)` for
/// every source epoch `(y, c)`, keeping labels and recording provenance.
/// Generation is deterministic; `seed` is only recorded.
pub fn synthesize_dataset(
    models: &BTreeMap<ClassLabel, ForecasterModel>,
    source: &Dataset,
    target_len: usize,
    seed: u64,
) -> Result<SyntheticDataset> {
    for class in source.class_histogram().keys() {
        if !models.contains_key(class) {
            return Err(Error::InsufficientData {
                class: *class,
                reason: "no trained forecaster for this class".into(),
            });
        }
    }
    let rate = source.sample_rate().unwrap_or(1);
    let results: Vec<Result<Option<LabeledEpoch>>> = source
        .epochs()
        .par_iter()
        .map(|e| {
            let model = &models[&e.label];
            let l = model.spec.context_len;
            if e.signal.len() < l {
                return Ok(None);
            }
            let samples = generate_recursive(model, &e.signal.samples()[..l], target_len)?;
            Ok(Some(LabeledEpoch {
                signal: Signal::new(samples, rate)?,
                label: e.label,
                subject_id: e.subject_id.clone(),
                epoch_index: e.epoch_index,
                provenance: Provenance::Synthetic {
                    model_id: model.id(),
                    source_epoch: e.id(),
                    seed,
                },
            }))
        })
        .collect();

    let mut epochs = Vec::with_capacity(source.len());
    let mut skipped = Vec::new();
    for (e, r) in source.epochs().iter().zip(results) {
        match r? {
            Some(s) => epochs.push(s),
            None => {
                log::warn!("epoch {} is shorter than the context window; skipped", e.id());
                skipped.push(e.id());
            }
        }
    }
    Ok(SyntheticDataset {
        dataset: Dataset::new(epochs)?,
        source_dataset_id: source.fingerprint(),
        models: models.iter().map(|(c, m)| (*c, m.id())).collect(),
        generation_seed: seed,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{init_model, Architecture, ForecasterSpec};

    fn zero_model(class: ClassLabel, l: usize, h: usize) -> ForecasterModel {
        let mut m = init_model(ForecasterSpec::new(Architecture::LinearDms, l, h), class, 0);
        m.params.iter_mut().for_each(|p| *p = 0.0);
        m
    }

    fn counting(h: usize, target: usize) -> (usize, Vec<f64>) {
        let mut calls = 0;
        let out = generate_with(
            |ctx| {
                calls += 1;
                Ok(vec![ctx[ctx.len() - 1] + 1.0; h])
            },
            &[0.0; 4],
            target,
        )
        .unwrap();
        (calls, out)
    }

    #[test]
    fn call_counts_follow_ceiling() {
        assert_eq!(counting(500, 500).0, 1);
        let (calls, out) = counting(200, 500);
        assert_eq!(calls, 3);
        assert_eq!(out.len(), 500);
        // Third chunk continues from the second, then is cut to 100 values.
        assert_eq!(out[399], 2.0);
        assert_eq!(out[400], 3.0);
        assert_eq!(counting(100, 500).0, 5);
        assert_eq!(counting(700, 1).0, 1);
    }

    #[test]
    fn context_is_updated_from_generated_values() {
        let mut seen = vec![];
        generate_with(
            |ctx| {
                seen.push(ctx.to_vec());
                Ok(vec![ctx.iter().sum::<f64>(); 2])
            },
            &[1.0, 2.0, 3.0],
            5,
        )
        .unwrap();
        assert_eq!(seen, vec![vec![1.0, 2.0, 3.0], vec![3.0, 6.0, 6.0], vec![6.0, 15.0, 15.0]]);
    }

    #[test]
    fn divergence_names_step() {
        let mut k = 0;
        let err = generate_with(
            |_| {
                k += 1;
                Ok(if k == 2 { vec![f64::INFINITY] } else { vec![1.0] })
            },
            &[0.0],
            5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1 }));
    }

    #[test]
    fn zero_model_generates_flat_signal() {
        for h in [100, 200, 500] {
            let m = zero_model(ClassLabel::Nrem, 50, h);
            let out = generate_recursive(&m, &[-1.75; 50], 500).unwrap();
            assert_eq!(out, vec![-1.75; 500]);
        }
        let m = zero_model(ClassLabel::Nrem, 50, 100);
        assert!(generate_recursive(&m, &[0.0; 49], 500).is_err());
        assert!(generate_recursive(&m, &[0.0; 50], 0).is_err());
    }

    fn source(n_per_class: usize, len: usize) -> Dataset {
        let epochs = (0..3 * n_per_class)
            .map(|i| {
                let samples = (0..len).map(|k| ((i * 7 + k) as f64 * 0.2).sin()).collect();
                LabeledEpoch::original(Signal::new(samples, 100).unwrap(), ClassLabel::ALL[i % 3], "s", i as u64)
            })
            .collect();
        Dataset::new(epochs).unwrap()
    }

    fn models(l: usize, h: usize) -> BTreeMap<ClassLabel, ForecasterModel> {
        ClassLabel::ALL
            .iter()
            .map(|&c| (c, init_model(ForecasterSpec::new(Architecture::LinearDms, l, h), c, c.index() as u64)))
            .collect()
    }

    #[test]
    fn synthesis_pairs_labels_and_provenance() {
        let src = source(10, 500);
        let syn = synthesize_dataset(&models(20, 200), &src, 500, 4).unwrap();
        assert_eq!(syn.len(), 30);
        assert_eq!(syn.dataset.class_counts(), [10, 10, 10]);
        assert_eq!(syn.dataset.labels(), src.labels());
        for (s, o) in syn.dataset.epochs().iter().zip(src.epochs()) {
            assert_eq!(s.signal.len(), 500);
            match &s.provenance {
                Provenance::Synthetic { source_epoch, seed, model_id } => {
                    assert_eq!(source_epoch, &o.id());
                    assert_eq!(*seed, 4);
                    assert!(model_id.contains(o.label.as_str()));
                }
                p => panic!("unexpected provenance {p:?}"),
            }
        }
        assert!(syn.skipped.is_empty());
    }

    #[test]
    fn seed_only_enters_provenance() {
        let src = source(3, 300);
        let a = synthesize_dataset(&models(30, 100), &src, 500, 1).unwrap();
        let b = synthesize_dataset(&models(30, 100), &src, 500, 1).unwrap();
        let c = synthesize_dataset(&models(30, 100), &src, 500, 2).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.dataset.epochs().iter().zip(c.dataset.epochs()) {
            assert_eq!(x.signal, y.signal);
        }
    }

    #[test]
    fn missing_model_and_short_epochs() {
        let src = source(2, 40);
        let mut ms = models(30, 100);
        ms.remove(&ClassLabel::Rem);
        assert!(synthesize_dataset(&ms, &src, 100, 0).is_err());

        let syn = synthesize_dataset(&models(50, 100), &src, 100, 0).unwrap();
        assert_eq!(syn.len(), 0);
        assert_eq!(syn.skipped.len(), 6);
    }
}

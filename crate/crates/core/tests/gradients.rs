//! Central finite-difference checks of every analytic gradient.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use forecast_synth::classifier::{self, init_classifier_params, ClassifierSpec};
use forecast_synth::features::{Spectrogram, Stage};
use forecast_synth::forecast::{self, huber_gradient, huber_loss, init_params, Architecture, ForecasterSpec};
use forecast_synth::ClassLabel;

const EPS: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|)` over whole vectors, 0 when both vanish.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 { 0.0 } else { diff / scale }
}

fn central_diff(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + EPS;
            let up = f(&p);
            p[i] = orig - EPS;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * EPS)
        })
        .collect()
}

#[test]
fn huber_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let target: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let pred: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let delta = rng.gen_range(0.3..2.0);
        let analytic = huber_gradient(&pred, &target, delta).unwrap();
        let numeric = central_diff(|p| huber_loss(p, &target, delta).unwrap(), &pred);
        assert!(rel_err(&analytic, &numeric) < 1e-4);
    }
}

#[test]
fn forecaster_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for arch in Architecture::ALL {
        let spec = ForecasterSpec::new(arch, 10, 20).with_width(8);
        for instance in 0..20 {
            let params = init_params(&spec, instance);
            let data: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
                .map(|_| {
                    let c = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    let t = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    (c, t)
                })
                .collect();
            let pairs: Vec<(&[f64], &[f64])> = data.iter().map(|(c, t)| (c.as_slice(), t.as_slice())).collect();
            let (_, analytic) = forecast::loss_and_gradient(&spec, &params, &pairs, 1.0).unwrap();
            let numeric = central_diff(|p| forecast::loss_and_gradient(&spec, p, &pairs, 1.0).unwrap().0, &params);
            let err = rel_err(&analytic, &numeric);
            assert!(err < 1e-4, "{arch:?} instance {instance}: relative error {err:e}");
        }
    }
}

#[test]
fn classifier_gradient_matches_finite_differences() {
    let spec = ClassifierSpec::new(vec![2], 8, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for instance in 0..20 {
        let params = init_classifier_params(&spec, instance);
        let inputs: Vec<Spectrogram> = (0..3)
            .map(|_| Spectrogram {
                values: Array2::from_shape_fn((8, 6), |_| rng.gen_range(-2.0..2.0)),
                stage: Stage::Standardized,
            })
            .collect();
        let labels: Vec<ClassLabel> = (0..3).map(|_| ClassLabel::ALL[rng.gen_range(0..3)]).collect();
        let (_, analytic) = classifier::loss_and_gradient(&spec, &params, &inputs, &labels).unwrap();
        let numeric = central_diff(|p| classifier::loss_and_gradient(&spec, p, &inputs, &labels).unwrap().0, &params);
        let err = rel_err(&analytic, &numeric);
        assert!(err < 1e-3, "instance {instance}: relative error {err:e}");
    }
}

#[test]
fn two_block_classifier_gradient() {
    let spec = ClassifierSpec::new(vec![3, 4], 9, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let params = init_classifier_params(&spec, 1);
    let inputs: Vec<Spectrogram> = (0..2)
        .map(|_| Spectrogram {
            values: Array2::from_shape_fn((9, 6), |_| rng.gen_range(-2.0..2.0)),
            stage: Stage::Standardized,
        })
        .collect();
    let labels = [ClassLabel::Nrem, ClassLabel::Rem];
    let (_, analytic) = classifier::loss_and_gradient(&spec, &params, &inputs, &labels).unwrap();
    let numeric = central_diff(|p| classifier::loss_and_gradient(&spec, p, &inputs, &labels).unwrap().0, &params);
    assert!(rel_err(&analytic, &numeric) < 1e-3);
}

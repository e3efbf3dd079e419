//! Class-conditional forecasters trained from scratch on Huber loss.
//!
//! Every architecture is wrapped in per-window mean centring: the context
//! mean is subtracted before the network sees it and added back to the
//! output. An all-zero network therefore forecasts a flat continuation of
//! the context level.

mod adam;
mod huber;
mod nets;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use huber::{huber_gradient, huber_loss};
pub use nets::{Architecture, Layout, ParamBlock};

use crate::error::{Error, Result};
use crate::signal::ClassLabel;
use crate::windowing::WindowPair;
use nets::Net;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub architecture: Architecture,
    /// Hidden units (MLP, RNN) or channels (TCN); unused by the linear model.
    pub hidden_width: usize,
    pub context_len: usize,
    pub horizon: usize,
}

impl ForecasterSpec {
    pub fn new(architecture: Architecture, context_len: usize, horizon: usize) -> Self {
        ForecasterSpec {
            architecture,
            hidden_width: architecture.default_width(),
            context_len,
            horizon,
        }
    }

    pub fn with_width(mut self, hidden_width: usize) -> Self {
        self.hidden_width = hidden_width;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 || self.horizon == 0 {
            return Err(Error::Config("forecaster context and horizon must be positive".into()));
        }
        if self.architecture != Architecture::LinearDms && self.hidden_width == 0 {
            return Err(Error::Config(format!(
                "{} needs a positive hidden width",
                self.architecture.name()
            )));
        }
        Ok(())
    }

    fn net(&self) -> Net {
        Net {
            arch: self.architecture,
            width: self.hidden_width,
            input: self.context_len,
            output: self.horizon,
        }
    }

    pub fn layout(&self) -> Layout {
        self.net().layout()
    }

    pub fn param_count(&self) -> usize {
        self.layout().total()
    }

    /// Short identifier, e.g. `mlp-w256_L100_H500`.
    pub fn tag(&self) -> String {
        match self.architecture {
            Architecture::LinearDms => format!("{}_L{}_H{}", self.architecture.name(), self.context_len, self.horizon),
            a => format!("{}-w{}_L{}_H{}", a.name(), self.hidden_width, self.context_len, self.horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_steps: usize,
    pub learning_rate: f64,
    pub huber_delta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_steps: 1000,
            learning_rate: 1e-3,
            huber_delta: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_steps == 0 {
            return Err(Error::Config("batch_size and max_steps must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.huber_delta > 0.0) {
            return Err(Error::Config("learning rate and Huber delta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterModel {
    pub spec: ForecasterSpec,
    pub class: ClassLabel,
    pub train_seed: u64,
    pub params: Vec<f64>,
    /// Mini-batch loss after each optimisation step.
    pub loss_curve: Vec<f64>,
}

impl ForecasterModel {
    pub fn id(&self) -> String {
        format!("{}_{}_seed{}", self.spec.tag(), self.class, self.train_seed)
    }

    /// Named view of one parameter block.
    pub fn block(&self, name: &str) -> &[f64] {
        &self.params[self.spec.layout().block(name).range()]
    }

    pub fn predict(&self, context: &[f64]) -> Result<Vec<f64>> {
        predict(self, context)
    }
}

/// Fresh parameters: weights uniform in ±1/√fan_in, biases zero.
pub fn init_params(spec: &ForecasterSpec, seed: u64) -> Vec<f64> {
    init_from_layout(&spec.layout(), seed)
}

pub(crate) fn init_from_layout(layout: &Layout, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; layout.total()];
    for block in &layout.blocks {
        if let Some(fan_in) = block.fan_in {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[block.range()] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
    }
    params
}

pub fn init_model(spec: ForecasterSpec, class: ClassLabel, seed: u64) -> ForecasterModel {
    ForecasterModel {
        params: init_params(&spec, seed),
        spec,
        class,
        train_seed: seed,
        loss_curve: Vec::new(),
    }
}

/// Shifted by the first element, so a constant window yields that constant exactly.
fn mean(x: &[f64]) -> f64 {
    let x0 = x[0];
    x0 + x.iter().map(|v| v - x0).sum::<f64>() / x.len() as f64
}

/// Packs contexts and targets into centred matrices.
fn centred_batch(spec: &ForecasterSpec, pairs: &[(&[f64], &[f64])]) -> (Array2<f64>, Array2<f64>) {
    let (l, h) = (spec.context_len, spec.horizon);
    let mut x = Array2::zeros((pairs.len(), l));
    let mut y = Array2::zeros((pairs.len(), h));
    for (i, (ctx, tgt)) in pairs.iter().enumerate() {
        let m = mean(ctx);
        for (dst, v) in x.row_mut(i).iter_mut().zip(ctx.iter()) {
            *dst = v - m;
        }
        for (dst, v) in y.row_mut(i).iter_mut().zip(tgt.iter()) {
            *dst = v - m;
        }
    }
    (x, y)
}

fn batch_loss_grad(
    spec: &ForecasterSpec,
    params: &[f64],
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    delta: f64,
) -> (f64, Vec<f64>) {
    let net = spec.net();
    let out = net.forward(params, x);
    let n = out.len() as f64;
    let mut loss = 0.0;
    let mut dout = out;
    dout.zip_mut_with(&y, |o, &t| {
        let r = *o - t;
        loss += huber::rho(r, delta);
        *o = huber::rho_prime(r, delta) / n;
    });
    (loss / n, net.backward(params, x, dout.view()))
}

/// Mean Huber loss of a batch of (context, target) pairs and its gradient
/// with respect to `params`, including the centring wrapper.
pub fn loss_and_gradient(
    spec: &ForecasterSpec,
    params: &[f64],
    pairs: &[(&[f64], &[f64])],
    delta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_params(spec, params)?;
    check_pairs(spec, pairs.iter().map(|(c, t)| (c.len(), t.len())))?;
    if pairs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let (x, y) = centred_batch(spec, pairs);
    Ok(batch_loss_grad(spec, params, x.view(), y.view(), delta))
}

fn check_params(spec: &ForecasterSpec, params: &[f64]) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::shape(
            format!("{} parameters", spec.param_count()),
            format!("{} parameters", params.len()),
        ));
    }
    Ok(())
}

fn check_pairs(spec: &ForecasterSpec, lens: impl Iterator<Item = (usize, usize)>) -> Result<()> {
    for (c, t) in lens {
        if c != spec.context_len || t != spec.horizon {
            return Err(Error::shape(
                format!("pairs of ({}, {})", spec.context_len, spec.horizon),
                format!("pair of ({c}, {t})"),
            ));
        }
    }
    Ok(())
}

/// Mini-batch Adam on Huber loss for exactly `config.max_steps` steps.
///
/// Batches are drawn without replacement from a seeded permutation; when
/// fewer than a full batch remain, the pairs are reshuffled and drawing
/// restarts. With fewer pairs than `batch_size`, every step sees all pairs.
pub fn train_class_forecaster(
    pairs: &[WindowPair<'_>],
    spec: ForecasterSpec,
    class: ClassLabel,
    config: &TrainConfig,
) -> Result<ForecasterModel> {
    spec.validate()?;
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData {
            class,
            reason: format!(
                "no training windows of {} + {} samples; class runs are too short",
                spec.context_len, spec.horizon
            ),
        });
    }
    check_pairs(&spec, pairs.iter().map(|p| (p.context.len(), p.target.len())))?;

    let mut model = init_model(spec, class, config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut adam = Adam::new(model.params.len(), config.learning_rate);

    let batch = config.batch_size.min(pairs.len());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut shuffle_rng);
    let mut cursor = 0;
    model.loss_curve.reserve(config.max_steps);
    let mut picked: Vec<(&[f64], &[f64])> = Vec::with_capacity(batch);
    for _ in 0..config.max_steps {
        if cursor + batch > order.len() {
            order.shuffle(&mut shuffle_rng);
            cursor = 0;
        }
        picked.clear();
        picked.extend(order[cursor..cursor + batch].iter().map(|&i| (pairs[i].context, pairs[i].target)));
        cursor += batch;

        let (x, y) = centred_batch(&spec, &picked);
        let (loss, grad) = batch_loss_grad(&spec, &model.params, x.view(), y.view(), config.huber_delta);
        adam.step(&mut model.params, &grad);
        model.loss_curve.push(loss);
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("training of {} produced non-finite parameters", model.id())));
    }
    Ok(model)
}

/// Forecasts `horizon` samples following `context`.
pub fn predict(model: &ForecasterModel, context: &[f64]) -> Result<Vec<f64>> {
    let spec = &model.spec;
    if context.len() != spec.context_len {
        return Err(Error::shape(
            format!("context of {}", spec.context_len),
            format!("context of {}", context.len()),
        ));
    }
    if context.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("context contains non-finite values"));
    }
    let m = mean(context);
    let x = Array2::from_shape_fn((1, context.len()), |(_, j)| context[j] - m);
    let out = spec.net().forward(&model.params, x.view());
    Ok(out.iter().map(|v| v + m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::{build_pairs, ClassStream, Run, WindowConfig};

    fn stream(runs: Vec<Vec<f64>>) -> ClassStream {
        ClassStream {
            label: ClassLabel::Nrem,
            runs: runs
                .into_iter()
                .map(|samples| Run {
                    subject_id: "s".into(),
                    first_epoch: 0,
                    epoch_count: 1,
                    samples,
                })
                .collect(),
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(ForecasterSpec::new(Architecture::LinearDms, 100, 500).param_count(), 50_500);
        assert_eq!(
            ForecasterSpec::new(Architecture::Mlp, 100, 500).param_count(),
            100 * 256 + 256 + 256 * 500 + 500
        );
        assert_eq!(
            ForecasterSpec::new(Architecture::ElmanRnn, 10, 20).with_width(8).param_count(),
            8 + 64 + 8 + 160 + 20
        );
        assert_eq!(
            ForecasterSpec::new(Architecture::TcnLite, 10, 20).with_width(8).param_count(),
            24 + 8 + 192 + 8 + 20 * 80 + 20
        );
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let spec = ForecasterSpec::new(Architecture::LinearDms, 100, 500);
        let a = init_params(&spec, 1);
        assert_eq!(a, init_params(&spec, 1));
        let b = init_params(&spec, 2);
        let differ = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert!(differ as f64 >= 0.99 * a.len() as f64, "{differ} of {}", a.len());
        assert!(a[..50_000].iter().all(|w| w.abs() <= 0.1));
        assert!(a[50_000..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn zero_model_continues_context_level() {
        let spec = ForecasterSpec::new(Architecture::LinearDms, 10, 30);
        let model = ForecasterModel {
            params: vec![0.0; spec.param_count()],
            spec,
            class: ClassLabel::Wake,
            train_seed: 0,
            loss_curve: vec![],
        };
        let out = model.predict(&[2.5; 10]).unwrap();
        assert_eq!(out, vec![2.5; 30]);
        assert!(model.predict(&[2.5; 9]).is_err());
        assert!(model.predict(&[f64::NAN; 10]).is_err());
    }

    #[test]
    fn linear_prediction_is_shift_equivariant() {
        let spec = ForecasterSpec::new(Architecture::LinearDms, 16, 8);
        let model = init_model(spec, ClassLabel::Rem, 9);
        let ctx: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let base = model.predict(&ctx).unwrap();
        for a in [-100.0, -1.5, 0.25, 37.0] {
            let shifted: Vec<f64> = ctx.iter().map(|v| v + a).collect();
            let out = model.predict(&shifted).unwrap();
            for (o, b) in out.iter().zip(&base) {
                assert!((o - (b + a)).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn empty_pairs_name_the_class() {
        let spec = ForecasterSpec::new(Architecture::LinearDms, 4, 4);
        let err = train_class_forecaster(&[], spec, ClassLabel::Rem, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { class: ClassLabel::Rem, .. }));
        assert!(err.to_string().contains("REM"));
    }

    #[test]
    fn mismatched_pairs_rejected() {
        let s = stream(vec![vec![0.0; 40]]);
        let pairs = build_pairs(&s, &WindowConfig::new(5, 5).unwrap());
        let spec = ForecasterSpec::new(Architecture::LinearDms, 6, 5);
        assert!(train_class_forecaster(&pairs, spec, ClassLabel::Rem, &TrainConfig::default()).is_err());
    }

    #[test]
    fn constant_zero_targets_drive_loss_down() {
        // Context and targets sit on a shared level, so centred targets are zero.
        let runs: Vec<Vec<f64>> = (0..4).map(|r| vec![r as f64 - 1.5; 900]).collect();
        let mut runs = runs;
        // A little context variation keeps the inputs from being identically zero.
        for (r, run) in runs.iter_mut().enumerate() {
            for (i, v) in run.iter_mut().enumerate().take(100) {
                *v += 0.3 * ((i + r) as f64 * 0.9).sin();
            }
        }
        let s = stream(runs);
        let pairs = build_pairs(&s, &WindowConfig::new(100, 500).unwrap());
        let spec = ForecasterSpec::new(Architecture::LinearDms, 100, 500);
        let cfg = TrainConfig { seed: 3, ..Default::default() };
        let m = train_class_forecaster(&pairs, spec, ClassLabel::Nrem, &cfg).unwrap();
        assert_eq!(m.loss_curve.len(), 1000);
        let first = m.loss_curve[0];
        let last = *m.loss_curve.last().unwrap();
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn training_is_deterministic() {
        let run: Vec<f64> = (0..400).map(|i| (i as f64 * 0.3).sin() + 0.01 * i as f64).collect();
        let s = stream(vec![run]);
        let pairs = build_pairs(&s, &WindowConfig::new(20, 30).unwrap());
        for arch in Architecture::ALL {
            let spec = ForecasterSpec::new(arch, 20, 30).with_width(6);
            let cfg = TrainConfig { max_steps: 25, seed: 8, ..Default::default() };
            let a = train_class_forecaster(&pairs, spec, ClassLabel::Wake, &cfg).unwrap();
            let b = train_class_forecaster(&pairs, spec, ClassLabel::Wake, &cfg).unwrap();
            assert_eq!(a, b);
            let c = train_class_forecaster(&pairs, spec, ClassLabel::Wake, &TrainConfig { seed: 9, ..cfg }).unwrap();
            assert_ne!(a.params, c.params);
        }
    }
}

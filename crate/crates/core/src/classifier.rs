//! Small convolutional spectrogram classifier trained with plain SGD on
//! summed cross-entropy.
//!
//! Each block is a 3×3 "same" convolution, ReLU and 2×2 max-pool (floor);
//! a flatten and affine head produces one logit per class. Activations are
//! kept in NHWC layout (batch, frequency, time, channel) so every
//! convolution is a single im2col matrix product.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Spectrogram, Stage};
use crate::forecast::{init_from_layout, Layout, ParamBlock};
use crate::signal::ClassLabel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    /// Output channels of each conv block.
    pub conv_channels: Vec<usize>,
    pub input_bins: usize,
    pub input_frames: usize,
    pub classes: usize,
}

impl ClassifierSpec {
    pub fn new(conv_channels: Vec<usize>, input_bins: usize, input_frames: usize) -> Self {
        ClassifierSpec {
            conv_channels,
            input_bins,
            input_frames,
            classes: ClassLabel::COUNT,
        }
    }

    /// Spatial size entering each block, then after the last pool.
    fn spatial(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![(self.input_bins, self.input_frames)];
        for _ in &self.conv_channels {
            let (h, w) = *dims.last().expect("non-empty");
            dims.push((h / 2, w / 2));
        }
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) || self.classes < 2 {
            return Err(Error::Config("classifier needs at least one non-empty conv block and two classes".into()));
        }
        let (h, w) = *self.spatial().last().expect("non-empty");
        if h == 0 || w == 0 {
            return Err(Error::Config(format!(
                "{} pooling blocks shrink a {}x{} input to nothing",
                self.conv_channels.len(),
                self.input_bins,
                self.input_frames
            )));
        }
        Ok(())
    }

    fn flat_len(&self) -> usize {
        let (h, w) = *self.spatial().last().expect("non-empty");
        h * w * self.conv_channels.last().copied().unwrap_or(1)
    }

    pub fn layout(&self) -> Layout {
        let mut layout = Layout::default();
        let mut cin = 1;
        for (i, &cout) in self.conv_channels.iter().enumerate() {
            layout.push(format!("conv{i}.weight"), &[cout, 9 * cin], Some(9 * cin));
            layout.push(format!("conv{i}.bias"), &[cout], None);
            cin = cout;
        }
        let flat = self.flat_len();
        layout.push("head.weight", &[self.classes, flat], Some(flat));
        layout.push("head.bias", &[self.classes], None);
        layout
    }

    pub fn param_count(&self) -> usize {
        self.layout().total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierTrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        ClassifierTrainConfig {
            learning_rate: 1e-4,
            max_epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ClassifierTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "classifier learning rate, epochs and batch size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    pub params: Vec<f64>,
    pub train_seed: u64,
    /// Mean per-sample cross-entropy of each training epoch.
    pub loss_curve: Vec<f64>,
}

/// `-ln p[true_class]` for a probability vector. A zero probability gives a
/// large finite value rather than infinity.
pub fn cross_entropy(probabilities: &[f64], true_class: usize) -> Result<f64> {
    if true_class >= probabilities.len() {
        return Err(Error::invalid(format!("class {true_class} out of range")));
    }
    let sum: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("probabilities must be non-negative and sum to 1"));
    }
    // ln of the smallest positive normal caps the loss near 708.
    let logits: Vec<f64> = probabilities.iter().map(|&p| p.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(cross_entropy_from_logits(&logits, true_class))
}

/// `logsumexp(logits) - logits[true_class]`.
pub fn cross_entropy_from_logits(logits: &[f64], true_class: usize) -> f64 {
    log_sum_exp(logits) - logits[true_class]
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|v| (v - lse).exp()).collect()
}

struct BlockCache {
    /// im2col matrix, (B·H·W, 9·cin).
    cols: Array2<f64>,
    /// Post-ReLU activations, (B·H·W, cout).
    act: Array2<f64>,
    /// For every pooled output (B·H'·W'·cout, row-major), the flat index of
    /// its maximum inside `act`.
    argmax: Vec<usize>,
    h: usize,
    w: usize,
}

struct Forward {
    blocks: Vec<BlockCache>,
    flat: Array2<f64>,
    logits: Array2<f64>,
}

fn view<'a>(p: &'a [f64], b: &ParamBlock) -> ArrayView2<'a, f64> {
    let cols = if b.shape.len() == 2 { b.shape[1] } else { 1 };
    ArrayView2::from_shape((b.shape[0], cols), &p[b.range()]).expect("block shape")
}

/// NHWC input `x` (flat, `batch·h·w·c`) to im2col rows with 3×3 zero padding.
fn im2col(x: &[f64], batch: usize, h: usize, w: usize, c: usize) -> Array2<f64> {
    let mut cols = Array2::zeros((batch * h * w, 9 * c));
    let out = cols.as_slice_mut().expect("standard layout");
    let row_len = 9 * c;
    for b in 0..batch {
        for i in 0..h {
            for j in 0..w {
                let row = ((b * h + i) * w + j) * row_len;
                for di in 0..3 {
                    let ii = i as isize + di as isize - 1;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for dj in 0..3 {
                        let jj = j as isize + dj as isize - 1;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        let src = ((b * h + ii as usize) * w + jj as usize) * c;
                        let dst = row + (di * 3 + dj) * c;
                        out[dst..dst + c].copy_from_slice(&x[src..src + c]);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im(dcols: &Array2<f64>, batch: usize, h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut dx = vec![0.0; batch * h * w * c];
    let src = dcols.as_slice().expect("standard layout");
    let row_len = 9 * c;
    for b in 0..batch {
        for i in 0..h {
            for j in 0..w {
                let row = ((b * h + i) * w + j) * row_len;
                for di in 0..3 {
                    let ii = i as isize + di as isize - 1;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for dj in 0..3 {
                        let jj = j as isize + dj as isize - 1;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        let dst = ((b * h + ii as usize) * w + jj as usize) * c;
                        let s = row + (di * 3 + dj) * c;
                        for k in 0..c {
                            dx[dst + k] += src[s + k];
                        }
                    }
                }
            }
        }
    }
    dx
}

/// 2×2 stride-2 max-pool on NHWC activations; returns pooled values and the
/// argmax index of each.
fn max_pool(act: &[f64], batch: usize, h: usize, w: usize, c: usize) -> (Vec<f64>, Vec<usize>) {
    let (ph, pw) = (h / 2, w / 2);
    let mut pooled = Vec::with_capacity(batch * ph * pw * c);
    let mut argmax = Vec::with_capacity(batch * ph * pw * c);
    for b in 0..batch {
        for i in 0..ph {
            for j in 0..pw {
                for k in 0..c {
                    let mut best = usize::MAX;
                    let mut best_v = f64::NEG_INFINITY;
                    for di in 0..2 {
                        for dj in 0..2 {
                            let idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + k;
                            if act[idx] > best_v {
                                best_v = act[idx];
                                best = idx;
                            }
                        }
                    }
                    pooled.push(best_v);
                    argmax.push(best);
                }
            }
        }
    }
    (pooled, argmax)
}

fn forward(spec: &ClassifierSpec, layout: &Layout, p: &[f64], input: Vec<f64>, batch: usize) -> Forward {
    let mut x = input;
    let (mut h, mut w, mut cin) = (spec.input_bins, spec.input_frames, 1);
    let mut blocks = Vec::with_capacity(spec.conv_channels.len());
    for (i, &cout) in spec.conv_channels.iter().enumerate() {
        let cols = im2col(&x, batch, h, w, cin);
        let wt = view(p, layout.block(&format!("conv{i}.weight")));
        let bias = &p[layout.block(&format!("conv{i}.bias")).range()];
        let mut act = cols.dot(&wt.t());
        for mut row in act.rows_mut() {
            for (v, b) in row.iter_mut().zip(bias) {
                *v = (*v + b).max(0.0);
            }
        }
        let (pooled, argmax) = max_pool(act.as_slice().expect("standard layout"), batch, h, w, cout);
        blocks.push(BlockCache { cols, act, argmax, h, w });
        x = pooled;
        h /= 2;
        w /= 2;
        cin = cout;
    }
    let flat = Array2::from_shape_vec((batch, h * w * cin), x).expect("flatten");
    let head_w = view(p, layout.block("head.weight"));
    let head_b = &p[layout.block("head.bias").range()];
    let mut logits = flat.dot(&head_w.t());
    for mut row in logits.rows_mut() {
        for (v, b) in row.iter_mut().zip(head_b) {
            *v += b;
        }
    }
    Forward { blocks, flat, logits }
}

/// Summed cross-entropy over the batch and its gradient.
fn loss_grad(spec: &ClassifierSpec, layout: &Layout, p: &[f64], input: Vec<f64>, labels: &[usize]) -> (f64, Vec<f64>) {
    let batch = labels.len();
    let fwd = forward(spec, layout, p, input, batch);
    let mut grad = vec![0.0; layout.total()];

    let mut loss = 0.0;
    let mut dlogits = Array2::zeros(fwd.logits.dim());
    for (b, (row, &y)) in fwd.logits.rows().into_iter().zip(labels).enumerate() {
        let logits = row.to_vec();
        loss += cross_entropy_from_logits(&logits, y);
        for (k, pk) in softmax(&logits).into_iter().enumerate() {
            dlogits[[b, k]] = pk - if k == y { 1.0 } else { 0.0 };
        }
    }

    let hw = layout.block("head.weight");
    let dhw = dlogits.t().dot(&fwd.flat);
    grad[hw.range()].copy_from_slice(dhw.as_standard_layout().as_slice().expect("contiguous"));
    let dhb = dlogits.sum_axis(Axis(0));
    grad[layout.block("head.bias").range()].copy_from_slice(dhb.as_slice().expect("contiguous"));
    let dflat = dlogits.dot(&view(p, hw));
    let mut dpooled = dflat.into_raw_vec_and_offset().0;

    let mut cin_of = vec![1];
    cin_of.extend(spec.conv_channels.iter().copied());
    for (i, cache) in fwd.blocks.iter().enumerate().rev() {
        let cout = spec.conv_channels[i];
        let cin = cin_of[i];
        // Route pooled gradients back to the winning activations, then
        // through the ReLU.
        let mut dact = vec![0.0; cache.act.len()];
        for (g, &idx) in dpooled.iter().zip(&cache.argmax) {
            dact[idx] += g;
        }
        for (d, &a) in dact.iter_mut().zip(cache.act.iter()) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let dact = Array2::from_shape_vec((batch * cache.h * cache.w, cout), dact).expect("activation grad");
        let wb = layout.block(&format!("conv{i}.weight"));
        let dw = dact.t().dot(&cache.cols);
        grad[wb.range()].copy_from_slice(dw.as_standard_layout().as_slice().expect("contiguous"));
        let db = dact.sum_axis(Axis(0));
        grad[layout.block(&format!("conv{i}.bias")).range()].copy_from_slice(db.as_slice().expect("contiguous"));
        if i > 0 {
            let dcols = dact.dot(&view(p, wb));
            dpooled = col2im(&dcols, batch, cache.h, cache.w, cin);
        }
    }
    (loss, grad)
}

fn check_input(spec: &ClassifierSpec, s: &Spectrogram) -> Result<()> {
    if s.shape() != (spec.input_bins, spec.input_frames) {
        return Err(Error::shape(
            format!("{}x{} spectrogram", spec.input_bins, spec.input_frames),
            format!("{}x{} spectrogram", s.bins(), s.frames()),
        ));
    }
    Ok(())
}

/// Packs spectrograms (bins × frames) into a flat NHWC batch with one channel.
fn pack<'a>(items: impl Iterator<Item = &'a Spectrogram>) -> Vec<f64> {
    items.flat_map(|s| s.values.iter().copied()).collect()
}

/// Summed cross-entropy of a batch and its gradient at `params`.
pub fn loss_and_gradient(
    spec: &ClassifierSpec,
    params: &[f64],
    inputs: &[Spectrogram],
    labels: &[ClassLabel],
) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    let layout = spec.layout();
    if params.len() != layout.total() || inputs.len() != labels.len() || inputs.is_empty() {
        return Err(Error::invalid("parameter, input or label counts disagree"));
    }
    for s in inputs {
        check_input(spec, s)?;
    }
    let y: Vec<usize> = labels.iter().map(|c| c.index()).collect();
    Ok(loss_grad(spec, &layout, params, pack(inputs.iter()), &y))
}

pub fn init_classifier_params(spec: &ClassifierSpec, seed: u64) -> Vec<f64> {
    init_from_layout(&spec.layout(), seed)
}

/// Mini-batch SGD (no momentum) for exactly `max_epochs` passes over a
/// freshly shuffled order each epoch.
pub fn train_classifier(
    spectrograms: &[Spectrogram],
    labels: &[ClassLabel],
    spec: &ClassifierSpec,
    config: &ClassifierTrainConfig,
) -> Result<TrainedClassifier> {
    spec.validate()?;
    config.validate()?;
    if spectrograms.is_empty() {
        return Err(Error::invalid("classifier training set is empty"));
    }
    if spectrograms.len() != labels.len() {
        return Err(Error::shape(
            format!("{} labels", spectrograms.len()),
            format!("{} labels", labels.len()),
        ));
    }
    for s in spectrograms {
        check_input(spec, s)?;
        if s.stage != Stage::Standardized {
            return Err(Error::invalid(format!("classifier trains on standardized spectrograms, got {:?}", s.stage)));
        }
    }
    let layout = spec.layout();
    let mut params = init_from_layout(&layout, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..spectrograms.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.max_epochs);
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let input = pack(chunk.iter().map(|&i| &spectrograms[i]));
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i].index()).collect();
            let (loss, grad) = loss_grad(spec, &layout, &params, input, &y);
            epoch_loss += loss;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
        }
        loss_curve.push(epoch_loss / spectrograms.len() as f64);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("classifier training diverged"));
    }
    Ok(TrainedClassifier {
        spec: spec.clone(),
        params,
        train_seed: config.seed,
        loss_curve,
    })
}

impl TrainedClassifier {
    pub fn logits(&self, spectrogram: &Spectrogram) -> Result<Vec<f64>> {
        check_input(&self.spec, spectrogram)?;
        let layout = self.spec.layout();
        let fwd = forward(&self.spec, &layout, &self.params, pack(std::iter::once(spectrogram)), 1);
        Ok(fwd.logits.row(0).to_vec())
    }

    pub fn predict_proba(&self, spectrogram: &Spectrogram) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(spectrogram)?))
    }

    /// Most probable class for each input; ties go to the lower class index.
    pub fn predict(&self, spectrograms: &[Spectrogram]) -> Result<Vec<ClassLabel>> {
        for s in spectrograms {
            check_input(&self.spec, s)?;
        }
        let layout = self.spec.layout();
        let mut out = Vec::with_capacity(spectrograms.len());
        for chunk in spectrograms.chunks(64) {
            let fwd = forward(&self.spec, &layout, &self.params, pack(chunk.iter()), chunk.len());
            for row in fwd.logits.rows() {
                let best = row
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc })
                    .0;
                out.push(ClassLabel::from_index(best).expect("logit per class"));
            }
        }
        Ok(out)
    }
}

pub fn predict_proba(model: &TrainedClassifier, spectrogram: &Spectrogram) -> Result<Vec<f64>> {
    model.predict_proba(spectrogram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn spectro(values: Array2<f64>) -> Spectrogram {
        Spectrogram { values, stage: Stage::Standardized }
    }

    #[test]
    fn cross_entropy_values() {
        let u = [1.0 / 3.0; 3];
        assert!((cross_entropy(&u, 1).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1).unwrap(), 0.0);
        let big = cross_entropy(&[1.0, 0.0, 0.0], 2).unwrap();
        assert!(big.is_finite() && big > 700.0);
        assert!(cross_entropy(&[0.5, 0.6, 0.0], 0).is_err());
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let logits: Vec<f64> = (0..3).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let e: Vec<f64> = logits.iter().map(|v| v.exp()).collect();
            let z: f64 = e.iter().sum();
            let y = rng.gen_range(0..3);
            let naive = -(e[y] / z).ln();
            assert!((cross_entropy_from_logits(&logits, y) - naive).abs() < 1e-10);
            let probs: Vec<f64> = e.iter().map(|v| v / z).collect();
            assert!((cross_entropy(&probs, y).unwrap() - naive).abs() < 1e-10);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let l = [0.3, -2.0, 5.5];
        let a = softmax(&l);
        let b = softmax(&[l[0] + 123.0, l[1] + 123.0, l[2] + 123.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spec_arithmetic() {
        let spec = ClassifierSpec::new(vec![8, 16], 65, 6);
        spec.validate().unwrap();
        assert_eq!(spec.flat_len(), 16 * 16);
        assert_eq!(spec.param_count(), (8 * 9 + 8) + (16 * 72 + 16) + (3 * 256 + 3));
        assert!(ClassifierSpec::new(vec![8, 16, 32], 65, 6).validate().is_err());
        assert!(ClassifierSpec::new(vec![], 65, 6).validate().is_err());
    }

    #[test]
    fn zero_network_is_uniform() {
        let spec = ClassifierSpec::new(vec![2], 8, 6);
        let model = TrainedClassifier {
            params: vec![0.0; spec.param_count()],
            spec,
            train_seed: 0,
            loss_curve: vec![],
        };
        let p = model.predict_proba(&spectro(Array2::from_elem((8, 6), 0.7))).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(model.predict_proba(&spectro(Array2::zeros((8, 5)))).is_err());
    }

    #[test]
    fn im2col_adjoint() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (b, h, w, c) = (2, 5, 4, 3);
        let x: Vec<f64> = (0..b * h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = Array2::from_shape_fn((b * h * w, 9 * c), |_| rng.gen_range(-1.0..1.0));
        let lhs: f64 = im2col(&x, b, h, w, c).iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, b, h, w, c)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn argmax_matches_logits_and_probabilities() {
        let spec = ClassifierSpec::new(vec![4, 4], 16, 6);
        let model = TrainedClassifier {
            params: init_classifier_params(&spec, 5),
            spec,
            train_seed: 5,
            loss_curve: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inputs: Vec<Spectrogram> = (0..50)
            .map(|_| spectro(Array2::from_shape_fn((16, 6), |_| rng.gen_range(-3.0..3.0))))
            .collect();
        let predicted = model.predict(&inputs).unwrap();
        for (s, c) in inputs.iter().zip(predicted) {
            let p = model.predict_proba(s).unwrap();
            let l = model.logits(s).unwrap();
            let am = |v: &[f64]| (0..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b });
            assert_eq!(am(&p), am(&l));
            assert_eq!(am(&l), c.index());
        }
    }

    fn banded(class: usize, rng: &mut ChaCha8Rng) -> Spectrogram {
        spectro(Array2::from_shape_fn((16, 6), |(k, _)| {
            let on = k / 5 == class;
            (if on { 2.0 } else { -1.0 }) + rng.gen_range(-0.2..0.2)
        }))
    }

    #[test]
    fn learns_separable_bands_deterministically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs = vec![];
        let mut ys = vec![];
        for i in 0..60 {
            xs.push(banded(i % 3, &mut rng));
            ys.push(ClassLabel::ALL[i % 3]);
        }
        let spec = ClassifierSpec::new(vec![4, 8], 16, 6);
        let cfg = ClassifierTrainConfig { learning_rate: 1e-3, max_epochs: 50, batch_size: 8, seed: 3 };
        let m = train_classifier(&xs, &ys, &spec, &cfg).unwrap();
        assert_eq!(m.loss_curve.len(), 50);
        assert!(m.loss_curve.last().unwrap() <= &m.loss_curve[0]);
        let acc = m.predict(&xs).unwrap().iter().zip(&ys).filter(|(a, b)| a == b).count();
        assert_eq!(acc, 60);
        assert_eq!(m, train_classifier(&xs, &ys, &spec, &cfg).unwrap());
        let other = train_classifier(&xs, &ys, &spec, &ClassifierTrainConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(other.params, m.params);
    }

    #[test]
    fn training_input_errors() {
        let spec = ClassifierSpec::new(vec![2], 8, 6);
        let cfg = ClassifierTrainConfig::default();
        assert!(train_classifier(&[], &[], &spec, &cfg).is_err());
        let s = spectro(Array2::zeros((8, 6)));
        assert!(train_classifier(&[s.clone()], &[], &spec, &cfg).is_err());
        let bad = spectro(Array2::zeros((7, 6)));
        assert!(train_classifier(&[s, bad], &[ClassLabel::Wake, ClassLabel::Rem], &spec, &cfg).is_err());
    }
}

//! Forward and backward passes for the forecaster architectures.
//!
//! Parameters live in one flat vector; [`Layout`] names the per-layer
//! segments. Every pass works on a batch of already-centred contexts
//! (rows of `x`) and returns one row of `horizon` outputs per context.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Single affine map from context to horizon.
    LinearDms,
    /// One ReLU hidden layer.
    Mlp,
    /// Single-layer tanh recurrence with an affine readout of the last state.
    ElmanRnn,
    /// Two dilated causal convolutions (dilations 1, 2) and an affine readout.
    TcnLite,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::LinearDms,
        Architecture::Mlp,
        Architecture::ElmanRnn,
        Architecture::TcnLite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::LinearDms => "linear-dms",
            Architecture::Mlp => "mlp",
            Architecture::ElmanRnn => "elman-rnn",
            Architecture::TcnLite => "tcn-lite",
        }
    }

    pub fn from_name(name: &str) -> Option<Architecture> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn default_width(self) -> usize {
        match self {
            Architecture::LinearDms => 0,
            Architecture::Mlp => 256,
            Architecture::ElmanRnn => 64,
            Architecture::TcnLite => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    /// `None` marks a bias, which is zero-initialised.
    pub fan_in: Option<usize>,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub blocks: Vec<ParamBlock>,
}

impl Layout {
    pub(crate) fn push(&mut self, name: impl Into<String>, shape: &[usize], fan_in: Option<usize>) {
        let offset = self.total();
        self.blocks.push(ParamBlock {
            name: name.into(),
            shape: shape.to_vec(),
            fan_in,
            offset,
        });
    }

    pub fn total(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len())
    }

    pub fn block(&self, name: &str) -> &ParamBlock {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .unwrap_or_else(|| panic!("no parameter block {name}"))
    }
}

/// Shape-resolved network: architecture plus its dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Net {
    pub arch: Architecture,
    pub width: usize,
    pub input: usize,
    pub output: usize,
}

fn mat<'a>(p: &'a [f64], b: &ParamBlock) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((b.shape[0], b.shape[1]), &p[b.range()]).expect("block shape")
}

fn vec1<'a>(p: &'a [f64], b: &ParamBlock) -> ArrayView1<'a, f64> {
    ArrayView1::from(&p[b.range()])
}

fn mat_mut<'a>(g: &'a mut [f64], b: &ParamBlock) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape((b.shape[0], b.shape[1]), &mut g[b.range()]).expect("block shape")
}

fn vec_mut<'a>(g: &'a mut [f64], b: &ParamBlock) -> ArrayViewMut1<'a, f64> {
    ArrayViewMut1::from(&mut g[b.range()])
}

/// `x · wᵀ + b`, the affine map used by every readout.
fn affine(x: &ArrayView2<f64>, w: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
    let mut out = x.dot(&w.t());
    out += b;
    out
}

/// Accumulates the weight and bias gradients of [`affine`].
fn affine_grad(g: &mut [f64], wb: &ParamBlock, bb: &ParamBlock, x: &ArrayView2<f64>, dout: &ArrayView2<f64>) {
    mat_mut(g, wb).assign(&dout.t().dot(x));
    vec_mut(g, bb).assign(&dout.sum_axis(Axis(0)));
}

impl Net {
    pub fn layout(&self) -> Layout {
        let (l, h, w) = (self.input, self.output, self.width);
        let mut layout = Layout::default();
        match self.arch {
            Architecture::LinearDms => {
                layout.push("weight", &[h, l], Some(l));
                layout.push("bias", &[h], None);
            }
            Architecture::Mlp => {
                layout.push("hidden.weight", &[w, l], Some(l));
                layout.push("hidden.bias", &[w], None);
                layout.push("out.weight", &[h, w], Some(w));
                layout.push("out.bias", &[h], None);
            }
            Architecture::ElmanRnn => {
                // Input and recurrent weights feed the same pre-activation.
                layout.push("rnn.input_weight", &[w, 1], Some(w + 1));
                layout.push("rnn.recurrent_weight", &[w, w], Some(w + 1));
                layout.push("rnn.bias", &[w], None);
                layout.push("out.weight", &[h, w], Some(w));
                layout.push("out.bias", &[h], None);
            }
            Architecture::TcnLite => {
                layout.push("conv1.weight", &[w, 3], Some(3));
                layout.push("conv1.bias", &[w], None);
                layout.push("conv2.weight", &[w, w * 3], Some(3 * w));
                layout.push("conv2.bias", &[w], None);
                layout.push("out.weight", &[h, w * l], Some(w * l));
                layout.push("out.bias", &[h], None);
            }
        }
        layout
    }

    pub fn forward(&self, p: &[f64], x: ArrayView2<f64>) -> Array2<f64> {
        let layout = self.layout();
        match self.arch {
            Architecture::LinearDms => {
                affine(&x, &mat(p, layout.block("weight")), &vec1(p, layout.block("bias")))
            }
            Architecture::Mlp => {
                let hidden = self.mlp_hidden(p, &layout, &x);
                affine(
                    &hidden.view(),
                    &mat(p, layout.block("out.weight")),
                    &vec1(p, layout.block("out.bias")),
                )
            }
            Architecture::ElmanRnn => {
                let states = self.rnn_states(p, &layout, &x);
                let last = states.index_axis(Axis(0), self.input);
                affine(
                    &last,
                    &mat(p, layout.block("out.weight")),
                    &vec1(p, layout.block("out.bias")),
                )
            }
            Architecture::TcnLite => {
                let (_, y2) = self.tcn_features(p, &layout, &x);
                let flat = tcn_flatten(&y2);
                affine(
                    &flat.view(),
                    &mat(p, layout.block("out.weight")),
                    &vec1(p, layout.block("out.bias")),
                )
            }
        }
    }

    /// Gradient of `sum(dout ⊙ forward(p, x))` with respect to `p`.
    pub fn backward(&self, p: &[f64], x: ArrayView2<f64>, dout: ArrayView2<f64>) -> Vec<f64> {
        let layout = self.layout();
        let mut g = vec![0.0; layout.total()];
        match self.arch {
            Architecture::LinearDms => {
                affine_grad(&mut g, layout.block("weight"), layout.block("bias"), &x, &dout);
            }
            Architecture::Mlp => {
                let hidden = self.mlp_hidden(p, &layout, &x);
                affine_grad(
                    &mut g,
                    layout.block("out.weight"),
                    layout.block("out.bias"),
                    &hidden.view(),
                    &dout,
                );
                let mut dh = dout.dot(&mat(p, layout.block("out.weight")));
                dh.zip_mut_with(&hidden, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                affine_grad(
                    &mut g,
                    layout.block("hidden.weight"),
                    layout.block("hidden.bias"),
                    &x,
                    &dh.view(),
                );
            }
            Architecture::ElmanRnn => self.rnn_backward(p, &layout, &x, &dout, &mut g),
            Architecture::TcnLite => self.tcn_backward(p, &layout, &x, &dout, &mut g),
        }
        g
    }

    fn mlp_hidden(&self, p: &[f64], layout: &Layout, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = affine(
            x,
            &mat(p, layout.block("hidden.weight")),
            &vec1(p, layout.block("hidden.bias")),
        );
        z.mapv_inplace(|v| v.max(0.0));
        z
    }

    /// Hidden states `h_0 ..= h_L`, shape (L + 1, batch, width); `h_0 = 0`.
    fn rnn_states(&self, p: &[f64], layout: &Layout, x: &ArrayView2<f64>) -> Array3<f64> {
        let wx = vec1(p, layout.block("rnn.input_weight"));
        let wh = mat(p, layout.block("rnn.recurrent_weight"));
        let bh = vec1(p, layout.block("rnn.bias"));
        let batch = x.nrows();
        let mut states = Array3::zeros((self.input + 1, batch, self.width));
        for t in 0..self.input {
            let prev = states.index_axis(Axis(0), t);
            let mut pre = prev.dot(&wh.t());
            pre += &bh;
            for (b, mut row) in pre.outer_iter_mut().enumerate() {
                row.scaled_add(x[[b, t]], &wx);
            }
            pre.mapv_inplace(f64::tanh);
            states.index_axis_mut(Axis(0), t + 1).assign(&pre);
        }
        states
    }

    fn rnn_backward(
        &self,
        p: &[f64],
        layout: &Layout,
        x: &ArrayView2<f64>,
        dout: &ArrayView2<f64>,
        g: &mut [f64],
    ) {
        let states = self.rnn_states(p, layout, x);
        let last = states.index_axis(Axis(0), self.input);
        affine_grad(g, layout.block("out.weight"), layout.block("out.bias"), &last, dout);

        let wh = mat(p, layout.block("rnn.recurrent_weight"));
        let mut dwx = Array1::<f64>::zeros(self.width);
        let mut dwh = Array2::<f64>::zeros((self.width, self.width));
        let mut dbh = Array1::<f64>::zeros(self.width);
        let mut dh = dout.dot(&mat(p, layout.block("out.weight")));
        for t in (0..self.input).rev() {
            let h = states.index_axis(Axis(0), t + 1);
            let mut dpre = dh;
            dpre.zip_mut_with(&h, |d, &hv| *d *= 1.0 - hv * hv);
            let prev = states.index_axis(Axis(0), t);
            dwh += &dpre.t().dot(&prev);
            dbh += &dpre.sum_axis(Axis(0));
            dwx += &dpre.t().dot(&x.column(t));
            dh = dpre.dot(&wh);
        }
        vec_mut(g, layout.block("rnn.input_weight")).assign(&dwx);
        mat_mut(g, layout.block("rnn.recurrent_weight")).assign(&dwh);
        vec_mut(g, layout.block("rnn.bias")).assign(&dbh);
    }

    /// Post-ReLU activations of both conv layers, each (batch, width, L).
    fn tcn_features(&self, p: &[f64], layout: &Layout, x: &ArrayView2<f64>) -> (Array3<f64>, Array3<f64>) {
        let (batch, l, c) = (x.nrows(), self.input, self.width);
        let w1 = mat(p, layout.block("conv1.weight"));
        let b1 = vec1(p, layout.block("conv1.bias"));
        let w2 = mat(p, layout.block("conv2.weight"));
        let b2 = vec1(p, layout.block("conv2.bias"));

        let mut y1 = Array3::<f64>::zeros((batch, c, l));
        for b in 0..batch {
            for ch in 0..c {
                for t in 0..l {
                    let mut acc = b1[ch];
                    for k in 0..3 {
                        if t >= k {
                            acc += w1[[ch, k]] * x[[b, t - k]];
                        }
                    }
                    y1[[b, ch, t]] = acc.max(0.0);
                }
            }
        }
        let mut y2 = Array3::<f64>::zeros((batch, c, l));
        for b in 0..batch {
            for o in 0..c {
                for t in 0..l {
                    let mut acc = b2[o];
                    for i in 0..c {
                        for k in 0..3 {
                            if t >= 2 * k {
                                acc += w2[[o, i * 3 + k]] * y1[[b, i, t - 2 * k]];
                            }
                        }
                    }
                    y2[[b, o, t]] = acc.max(0.0);
                }
            }
        }
        (y1, y2)
    }

    fn tcn_backward(
        &self,
        p: &[f64],
        layout: &Layout,
        x: &ArrayView2<f64>,
        dout: &ArrayView2<f64>,
        g: &mut [f64],
    ) {
        let (batch, l, c) = (x.nrows(), self.input, self.width);
        let (y1, y2) = self.tcn_features(p, layout, x);
        let flat = tcn_flatten(&y2);
        affine_grad(g, layout.block("out.weight"), layout.block("out.bias"), &flat.view(), dout);

        let dflat = dout.dot(&mat(p, layout.block("out.weight")));
        let mut dy2 = dflat
            .into_shape_with_order((batch, c, l))
            .expect("flattened readout");
        dy2.zip_mut_with(&y2, |d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });

        let w2 = mat(p, layout.block("conv2.weight"));
        let mut dw2 = Array2::<f64>::zeros((c, 3 * c));
        let mut db2 = Array1::<f64>::zeros(c);
        let mut dy1 = Array3::<f64>::zeros((batch, c, l));
        for b in 0..batch {
            for o in 0..c {
                for t in 0..l {
                    let d = dy2[[b, o, t]];
                    if d == 0.0 {
                        continue;
                    }
                    db2[o] += d;
                    for i in 0..c {
                        for k in 0..3 {
                            if t >= 2 * k {
                                dw2[[o, i * 3 + k]] += d * y1[[b, i, t - 2 * k]];
                                dy1[[b, i, t - 2 * k]] += d * w2[[o, i * 3 + k]];
                            }
                        }
                    }
                }
            }
        }
        dy1.zip_mut_with(&y1, |d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });

        let mut dw1 = Array2::<f64>::zeros((c, 3));
        let mut db1 = Array1::<f64>::zeros(c);
        for b in 0..batch {
            for ch in 0..c {
                for t in 0..l {
                    let d = dy1[[b, ch, t]];
                    db1[ch] += d;
                    for k in 0..3 {
                        if t >= k {
                            dw1[[ch, k]] += d * x[[b, t - k]];
                        }
                    }
                }
            }
        }
        mat_mut(g, layout.block("conv1.weight")).assign(&dw1);
        vec_mut(g, layout.block("conv1.bias")).assign(&db1);
        mat_mut(g, layout.block("conv2.weight")).assign(&dw2);
        vec_mut(g, layout.block("conv2.bias")).assign(&db2);
    }
}

fn tcn_flatten(y2: &Array3<f64>) -> Array2<f64> {
    let (batch, c, l) = y2.dim();
    y2.as_standard_layout()
        .into_owned()
        .into_shape_with_order((batch, c * l))
        .expect("contiguous activations")
}

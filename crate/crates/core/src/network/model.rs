//! The dual-channel LSTM: per-channel two-layer stacks over `[I, Q]` and
//! `[A, P]`, concatenation of the last-step outputs, an optional 2-neuron
//! visualization layer and a linear output layer producing logits.

use std::fmt;
use std::str::FromStr;

use super::lstm::{lstm_layer_backward, lstm_layer_forward, LayerCache, LayerOutput, LstmLayer, LstmParams, Sequence};
use crate::error::{Error, Result};
use crate::numcore::{gemm_nn, gemm_tn, streams, xavier_init, Matrix, Rng};
use crate::represent::RepresentationPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Channel {
    Iq,
    Ap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelSet {
    Iq,
    Ap,
    Dual,
}

impl ChannelSet {
    pub fn channels(self) -> &'static [Channel] {
        match self {
            ChannelSet::Iq => &[Channel::Iq],
            ChannelSet::Ap => &[Channel::Ap],
            ChannelSet::Dual => &[Channel::Iq, Channel::Ap],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelSet::Iq => "iq",
            ChannelSet::Ap => "ap",
            ChannelSet::Dual => "dual",
        }
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iq" => Ok(ChannelSet::Iq),
            "ap" => Ok(ChannelSet::Ap),
            "dual" => Ok(ChannelSet::Dual),
            other => Err(Error::invalid(format!("unknown channel set `{other}`"))),
        }
    }
}

/// Shape of a model; everything needed to rebuild it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub channels: ChannelSet,
    pub bidirectional: bool,
    /// Cells of the first and second LSTM layer.
    pub cells: [usize; 2],
    pub input_dim: usize,
    pub classes: usize,
    /// Insert the 2-neuron layer between concatenation and output.
    pub visualization: bool,
}

impl Architecture {
    pub fn new(channels: ChannelSet, cells: usize, classes: usize) -> Self {
        Architecture {
            channels,
            bidirectional: false,
            cells: [cells, cells],
            input_dim: 2,
            classes,
            visualization: false,
        }
    }

    fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of the concatenation layer.
    pub fn concat_dim(&self) -> usize {
        self.channels.channels().len() * self.cells[1] * self.directions()
    }

    /// Width of the penultimate features fed to the output layer.
    pub fn feature_dim(&self) -> usize {
        if self.visualization {
            2
        } else {
            self.concat_dim()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.contains(&0) || self.input_dim == 0 || self.classes == 0 {
            return Err(Error::invalid(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }
}

fn lstm_count(d_in: usize, c: usize) -> usize {
    4 * (c * (d_in + c) + c)
}

/// Closed-form number of trainable scalars.
pub fn param_count(arch: &Architecture) -> usize {
    let dirs = arch.directions();
    let per_channel = dirs * lstm_count(arch.input_dim, arch.cells[0])
        + dirs * lstm_count(arch.cells[0] * dirs, arch.cells[1]);
    let stacks = arch.channels.channels().len() * per_channel;
    let concat = arch.concat_dim();
    let viz = if arch.visualization { concat * 2 + 2 } else { 0 };
    stacks + viz + arch.feature_dim() * arch.classes + arch.classes
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `in × out`.
    pub w: Matrix,
    pub b: Matrix,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            w: Matrix::zeros(input, output),
            b: Matrix::zeros(1, output),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let (b, d) = x.shape();
        let out = self.w.cols();
        let mut y = Matrix::zeros(b, out);
        gemm_nn(x.as_slice(), self.w.as_slice(), y.as_mut_slice(), b, d, out);
        for r in 0..b {
            for (v, bias) in y.row_mut(r).iter_mut().zip(self.b.as_slice()) {
                *v += bias;
            }
        }
        y
    }

    /// Accumulates parameter gradients and returns `dy · Wᵀ`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix, grads: &mut Dense) -> Matrix {
        let (b, d) = x.shape();
        let out = self.w.cols();
        gemm_tn(x.as_slice(), dy.as_slice(), grads.w.as_mut_slice(), b, d, out);
        for r in 0..b {
            for (g, v) in grads.b.as_mut_slice().iter_mut().zip(dy.row(r)) {
                *g += v;
            }
        }
        let mut dx = Matrix::zeros(b, d);
        gemm_nn(dy.as_slice(), self.w.transpose().as_slice(), dx.as_mut_slice(), b, out, d);
        dx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelStack {
    pub channel: Channel,
    /// Returns sequences.
    pub layer1: LstmLayer,
    /// Returns the last step only.
    pub layer2: LstmLayer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcLstmModel {
    pub arch: Architecture,
    pub stacks: Vec<ChannelStack>,
    pub visualization: Option<Dense>,
    pub head: Dense,
}

impl DcLstmModel {
    /// All-zero parameters; also the gradient buffer shape.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let dirs = arch.directions();
        let layer = |d_in: usize, c: usize| LstmLayer {
            forward: LstmParams::zeros(d_in, c),
            backward: arch.bidirectional.then(|| LstmParams::zeros(d_in, c)),
        };
        let stacks = arch
            .channels
            .channels()
            .iter()
            .map(|&channel| ChannelStack {
                channel,
                layer1: layer(arch.input_dim, arch.cells[0]),
                layer2: layer(arch.cells[0] * dirs, arch.cells[1]),
            })
            .collect();
        Ok(DcLstmModel {
            arch: arch.clone(),
            stacks,
            visualization: arch.visualization.then(|| Dense::zeros(arch.concat_dim(), 2)),
            head: Dense::zeros(arch.feature_dim(), arch.classes),
        })
    }

    /// Xavier-initialized model; tensor `k` in canonical order draws from
    /// stream `INIT + k` of `seed`.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        let mut model = DcLstmModel::zeros(arch)?;
        let mut k = 0u64;
        let mut next_rng = || {
            let r = Rng::new(seed, streams::INIT + k);
            k += 1;
            r
        };
        for stack in &mut model.stacks {
            for layer in [&mut stack.layer1, &mut stack.layer2] {
                let (d, c) = (layer.forward.input_dim(), layer.cells());
                layer.forward = LstmParams::init(d, c, &mut next_rng())?;
                if let Some(bp) = layer.backward.as_mut() {
                    *bp = LstmParams::init(d, c, &mut next_rng())?;
                }
            }
        }
        for dense in model.visualization.iter_mut().chain(std::iter::once(&mut model.head)) {
            let (i, o) = dense.w.shape();
            dense.w = xavier_init(i, o, &mut next_rng())?;
        }
        Ok(model)
    }

    pub fn zeros_like(&self) -> DcLstmModel {
        DcLstmModel::zeros(&self.arch).expect("architecture already validated")
    }

    /// Parameter tensors in canonical order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for s in &self.stacks {
            for layer in [&s.layer1, &s.layer2] {
                for p in std::iter::once(&layer.forward).chain(layer.backward.iter()) {
                    out.extend([&p.w, &p.u, &p.b]);
                }
            }
        }
        for d in self.visualization.iter().chain(std::iter::once(&self.head)) {
            out.extend([&d.w, &d.b]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for s in &mut self.stacks {
            for layer in [&mut s.layer1, &mut s.layer2] {
                for p in std::iter::once(&mut layer.forward).chain(layer.backward.iter_mut()) {
                    out.extend([&mut p.w, &mut p.u, &mut p.b]);
                }
            }
        }
        for d in self.visualization.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.extend([&mut d.w, &mut d.b]);
        }
        out
    }

    /// Number of stored parameter scalars.
    pub fn stored_param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.stored_param_count());
        for t in self.tensors() {
            v.extend_from_slice(t.as_slice());
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.stored_param_count() {
            return Err(Error::invalid("flat parameter vector has wrong length"));
        }
        let mut at = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        Ok(())
    }

    /// `self += other`, tensor by tensor.
    pub fn accumulate(&mut self, other: &DcLstmModel) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Network input for a batch: one time-major sequence per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct DcInput {
    pub iq: Sequence,
    pub ap: Sequence,
}

impl DcInput {
    /// Packs representations; values pass through 32-bit precision.
    pub fn from_pairs(pairs: &[&RepresentationPair]) -> Result<Self> {
        let b = pairs.len();
        if b == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let t = pairs[0].len();
        if pairs.iter().any(|p| p.len() != t || p.v1.cols() != 2 || p.v2.cols() != 2) {
            return Err(Error::invalid("representations in a batch must share shape T×2"));
        }
        let mut iq = Sequence::zeros(t, b, 2);
        let mut ap = Sequence::zeros(t, b, 2);
        for (r, p) in pairs.iter().enumerate() {
            for n in 0..t {
                for d in 0..2 {
                    iq.data[(n * b + r) * 2 + d] = p.v1.get(n, d) as f32 as f64;
                    ap.data[(n * b + r) * 2 + d] = p.v2.get(n, d) as f32 as f64;
                }
            }
        }
        Ok(DcInput { iq, ap })
    }

    pub fn batch(&self) -> usize {
        self.iq.batch
    }

    fn channel(&self, c: Channel) -> &Sequence {
        match c {
            Channel::Iq => &self.iq,
            Channel::Ap => &self.ap,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    /// `B × feature_dim` penultimate activations.
    pub features: Matrix,
    /// `B × classes`, pre-softmax.
    pub logits: Matrix,
}

#[derive(Clone, Debug)]
pub struct ForwardCache {
    layers: Vec<(LayerCache, LayerCache)>,
    concat: Matrix,
    features: Matrix,
}

pub fn dc_forward(input: &DcInput, model: &DcLstmModel) -> Result<(ForwardOutput, ForwardCache)> {
    let b = input.batch();
    if input.iq.dim != model.arch.input_dim || input.ap.dim != model.arch.input_dim {
        return Err(Error::invalid("representation width does not match model input"));
    }
    let concat_dim = model.arch.concat_dim();
    let mut concat = Matrix::zeros(b, concat_dim);
    let mut layers = Vec::with_capacity(model.stacks.len());
    let mut col = 0;
    for stack in &model.stacks {
        let (seq, c1) = lstm_layer_forward(input.channel(stack.channel), &stack.layer1, true)?;
        let seq = seq.as_sequence().expect("layer 1 returns sequences");
        let (last, c2) = lstm_layer_forward(seq, &stack.layer2, false)?;
        let last = last.as_last().expect("layer 2 returns last step");
        let w = last.cols();
        for r in 0..b {
            concat.row_mut(r)[col..col + w].copy_from_slice(last.row(r));
        }
        col += w;
        layers.push((c1, c2));
    }
    let features = match &model.visualization {
        Some(v) => v.forward(&concat),
        None => concat.clone(),
    };
    let logits = model.head.forward(&features);
    Ok((
        ForwardOutput {
            features: features.clone(),
            logits,
        },
        ForwardCache {
            layers,
            concat,
            features,
        },
    ))
}

/// Parameter gradients given upstream gradients on the logits and on the
/// penultimate features (the center-loss term enters through the latter).
pub fn dc_backward(
    model: &DcLstmModel,
    cache: &ForwardCache,
    d_logits: &Matrix,
    d_features: &Matrix,
) -> Result<DcLstmModel> {
    let b = cache.features.rows();
    if d_logits.shape() != (b, model.arch.classes) || d_features.shape() != cache.features.shape() {
        return Err(Error::invalid(format!(
            "upstream gradients {:?}/{:?} do not match cache batch {b}",
            d_logits.shape(),
            d_features.shape()
        )));
    }
    if cache.layers.len() != model.stacks.len() {
        return Err(Error::invalid("cache was produced by a different model"));
    }
    let mut grads = model.zeros_like();
    let mut d_feat = model.head.backward(&cache.features, d_logits, &mut grads.head);
    d_feat.add_assign(d_features);
    let d_concat = match (&model.visualization, grads.visualization.as_mut()) {
        (Some(v), Some(gv)) => v.backward(&cache.concat, &d_feat, gv),
        _ => d_feat,
    };

    let mut col = 0;
    for ((stack, gstack), (c1, c2)) in model.stacks.iter().zip(grads.stacks.iter_mut()).zip(&cache.layers) {
        let w = stack.layer2.output_dim();
        let mut d_last = Matrix::zeros(b, w);
        for r in 0..b {
            d_last.row_mut(r).copy_from_slice(&d_concat.row(r)[col..col + w]);
        }
        col += w;
        let d_seq = lstm_layer_backward(c2, &LayerOutput::Last(d_last), &stack.layer2, &mut gstack.layer2)?;
        lstm_layer_backward(c1, &LayerOutput::Sequence(d_seq), &stack.layer1, &mut gstack.layer1)?;
    }
    Ok(grads)
}

//! Central-difference checks of every hand-written backward pass on small
//! random models.

use dclstm::network::{
    dc_backward, dc_forward, lstm_cell_backward, lstm_cell_forward, lstm_layer_backward, lstm_layer_forward,
    Architecture, ChannelSet, DcInput, DcLstmModel, Dense, LayerOutput, LstmLayer, LstmParams, Sequence,
};
use dclstm::numcore::{finite_diff_check, GradCheckReport, Matrix, Rng};
use dclstm::training::combined_loss;

pub const TOLERANCE: f64 = 1e-5;
const STEP: f64 = 1e-3;

fn random(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn params_flat(p: &LstmParams) -> Vec<f64> {
    cat(&[p.w.as_slice(), p.u.as_slice(), p.b.as_slice()])
}

fn set_params(p: &mut LstmParams, v: &[f64]) {
    let (nw, nu) = (p.w.len(), p.u.len());
    p.w.as_mut_slice().copy_from_slice(&v[..nw]);
    p.u.as_mut_slice().copy_from_slice(&v[nw..nw + nu]);
    p.b.as_mut_slice().copy_from_slice(&v[nw + nu..]);
}

fn worst(reports: Vec<GradCheckReport>) -> GradCheckReport {
    reports
        .into_iter()
        .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
        .unwrap()
}

/// One cell step: gradients of a random projection of `(h, c)` with respect
/// to parameters, input and both previous states.
pub fn check_cell() -> GradCheckReport {
    let mut rng = Rng::new(101, 0);
    let (b, d, c) = (3, 4, 5);
    let mut params = LstmParams::init(d, c, &mut rng).unwrap();
    params.b = random(1, 4 * c, 0.5, &mut rng);
    let x = random(b, d, 1.0, &mut rng);
    let h0 = random(b, c, 0.5, &mut rng);
    let c0 = random(b, c, 0.5, &mut rng);
    let rh = random(b, c, 1.0, &mut rng);
    let rc = random(b, c, 1.0, &mut rng);

    let (_, _, cache) = lstm_cell_forward(&x, &h0, &c0, &params).unwrap();
    let mut grads = LstmParams::zeros(d, c);
    let (dx, dh0, dc0) = lstm_cell_backward(&rh, &rc, &x, &h0, &cache, &params, &mut grads).unwrap();

    let n_p = params_flat(&params).len();
    let (nx, nh) = (x.len(), h0.len());
    let point = cat(&[&params_flat(&params), x.as_slice(), h0.as_slice(), c0.as_slice()]);
    let analytic = cat(&[&params_flat(&grads), dx.as_slice(), dh0.as_slice(), dc0.as_slice()]);
    let f = |v: &[f64]| {
        let mut p = params.clone();
        set_params(&mut p, &v[..n_p]);
        let x = Matrix::from_vec(b, d, v[n_p..n_p + nx].to_vec()).unwrap();
        let h = Matrix::from_vec(b, c, v[n_p + nx..n_p + nx + nh].to_vec()).unwrap();
        let cp = Matrix::from_vec(b, c, v[n_p + nx + nh..].to_vec()).unwrap();
        let (h1, c1, _) = lstm_cell_forward(&x, &h, &cp, &p).unwrap();
        dot(h1.as_slice(), rh.as_slice()) + dot(c1.as_slice(), rc.as_slice())
    };
    finite_diff_check(f, &point, &analytic, STEP).unwrap()
}

/// A bidirectional sequence layer feeding a last-step layer, checked with
/// respect to all four directions' parameters and the input sequence.
pub fn check_stacked_layers() -> GradCheckReport {
    let mut rng = Rng::new(102, 0);
    let (t, b, d, c1, c2) = (6, 2, 2, 4, 3);
    let mut l1 = LstmLayer {
        forward: LstmParams::init(d, c1, &mut rng).unwrap(),
        backward: Some(LstmParams::init(d, c1, &mut rng).unwrap()),
    };
    let mut l2 = LstmLayer {
        forward: LstmParams::init(2 * c1, c2, &mut rng).unwrap(),
        backward: Some(LstmParams::init(2 * c1, c2, &mut rng).unwrap()),
    };
    for p in [&mut l1.forward, l1.backward.as_mut().unwrap(), &mut l2.forward, l2.backward.as_mut().unwrap()] {
        p.b = random(1, p.b.cols(), 0.3, &mut rng);
    }
    let x = Sequence::from_vec(t, b, d, (0..t * b * d).map(|_| rng.normal()).collect()).unwrap();
    let r = random(b, 2 * c2, 1.0, &mut rng);

    let layer_flat = |l: &LstmLayer| cat(&[&params_flat(&l.forward), &params_flat(l.backward.as_ref().unwrap())]);
    let set_layer = |l: &mut LstmLayer, v: &[f64]| {
        let n = params_flat(&l.forward).len();
        set_params(&mut l.forward, &v[..n]);
        set_params(l.backward.as_mut().unwrap(), &v[n..]);
    };
    let loss = |l1: &LstmLayer, l2: &LstmLayer, x: &Sequence| {
        let (o1, _) = lstm_layer_forward(x, l1, true).unwrap();
        let (o2, _) = lstm_layer_forward(o1.as_sequence().unwrap(), l2, false).unwrap();
        dot(o2.as_last().unwrap().as_slice(), r.as_slice())
    };

    let (o1, k1) = lstm_layer_forward(&x, &l1, true).unwrap();
    let (_, k2) = lstm_layer_forward(o1.as_sequence().unwrap(), &l2, false).unwrap();
    let mut g1 = l1.zeros_like();
    let mut g2 = l2.zeros_like();
    let d1 = lstm_layer_backward(&k2, &LayerOutput::Last(r.clone()), &l2, &mut g2).unwrap();
    let dx = lstm_layer_backward(&k1, &LayerOutput::Sequence(d1), &l1, &mut g1).unwrap();

    let (n1, n2) = (layer_flat(&l1).len(), layer_flat(&l2).len());
    let point = cat(&[&layer_flat(&l1), &layer_flat(&l2), &x.data]);
    let analytic = cat(&[&layer_flat(&g1), &layer_flat(&g2), &dx.data]);
    let f = |v: &[f64]| {
        let (mut a, mut bb) = (l1.clone(), l2.clone());
        set_layer(&mut a, &v[..n1]);
        set_layer(&mut bb, &v[n1..n1 + n2]);
        let xs = Sequence::from_vec(t, b, d, v[n1 + n2..].to_vec()).unwrap();
        loss(&a, &bb, &xs)
    };
    finite_diff_check(f, &point, &analytic, STEP).unwrap()
}

/// The affine output layer.
pub fn check_dense_head() -> GradCheckReport {
    let mut rng = Rng::new(103, 0);
    let (b, i, o) = (4, 5, 3);
    let dense = Dense {
        w: random(i, o, 1.0, &mut rng),
        b: random(1, o, 1.0, &mut rng),
    };
    let x = random(b, i, 1.0, &mut rng);
    let r = random(b, o, 1.0, &mut rng);
    let mut g = Dense::zeros(i, o);
    let dx = dense.backward(&x, &r, &mut g);
    let point = cat(&[dense.w.as_slice(), dense.b.as_slice(), x.as_slice()]);
    let analytic = cat(&[g.w.as_slice(), g.b.as_slice(), dx.as_slice()]);
    let f = |v: &[f64]| {
        let d = Dense {
            w: Matrix::from_vec(i, o, v[..i * o].to_vec()).unwrap(),
            b: Matrix::from_vec(1, o, v[i * o..i * o + o].to_vec()).unwrap(),
        };
        let x = Matrix::from_vec(b, i, v[i * o + o..].to_vec()).unwrap();
        dot(d.forward(&x).as_slice(), r.as_slice())
    };
    finite_diff_check(f, &point, &analytic, STEP).unwrap()
}

/// Mean cross-entropy with respect to the logits.
pub fn check_cross_entropy() -> GradCheckReport {
    let mut rng = Rng::new(104, 0);
    let (b, n, d) = (5, 4, 3);
    let labels = [0, 3, 1, 1, 2];
    let logits = random(b, n, 2.0, &mut rng);
    let feats = random(b, d, 1.0, &mut rng);
    let centers = random(n, d, 1.0, &mut rng);
    let out = combined_loss(&logits, &feats, &labels, &centers, 0.0).unwrap();
    let f = |v: &[f64]| {
        let l = Matrix::from_vec(b, n, v.to_vec()).unwrap();
        combined_loss(&l, &feats, &labels, &centers, 0.0).unwrap().total
    };
    finite_diff_check(f, logits.as_slice(), out.d_logits.as_slice(), STEP).unwrap()
}

/// Center-loss term with respect to the features.
pub fn check_center_loss() -> GradCheckReport {
    let mut rng = Rng::new(105, 0);
    let (b, n, d) = (6, 3, 4);
    let labels = [0, 1, 2, 2, 1, 0];
    let logits = random(b, n, 1.0, &mut rng);
    let feats = random(b, d, 1.0, &mut rng);
    let centers = random(n, d, 1.0, &mut rng);
    let lambda = 0.7;
    let out = combined_loss(&logits, &feats, &labels, &centers, lambda).unwrap();
    let f = |v: &[f64]| {
        let x = Matrix::from_vec(b, d, v.to_vec()).unwrap();
        combined_loss(&logits, &x, &labels, &centers, lambda).unwrap().total
    };
    finite_diff_check(f, feats.as_slice(), out.d_features.as_slice(), STEP).unwrap()
}

/// End to end: both channels, bidirectional stacks, the 2-neuron layer and
/// the joint loss, with respect to every parameter.
pub fn check_full_model() -> GradCheckReport {
    let mut rng = Rng::new(106, 0);
    let (t, b, classes) = (5, 3, 3);
    let arch = Architecture {
        bidirectional: true,
        visualization: true,
        ..Architecture::new(ChannelSet::Dual, 3, classes)
    };
    let mut model = DcLstmModel::init(&arch, 7).unwrap();
    for p in model.tensors_mut() {
        if p.rows() == 1 {
            p.as_mut_slice().iter_mut().for_each(|v| *v += 0.2 * rng.normal());
        }
    }
    let seq = |rng: &mut Rng| Sequence::from_vec(t, b, 2, (0..t * b * 2).map(|_| rng.normal()).collect()).unwrap();
    let input = DcInput {
        iq: seq(&mut rng),
        ap: seq(&mut rng),
    };
    let labels = [2, 0, 1];
    let centers = random(classes, 2, 0.5, &mut rng);
    let lambda = 0.3;

    let (out, cache) = dc_forward(&input, &model).unwrap();
    let loss = combined_loss(&out.logits, &out.features, &labels, &centers, lambda).unwrap();
    let grads = dc_backward(&model, &cache, &loss.d_logits, &loss.d_features).unwrap();
    let point = model.to_flat();
    let f = |v: &[f64]| {
        let mut m = model.clone();
        m.set_flat(v).unwrap();
        let (o, _) = dc_forward(&input, &m).unwrap();
        combined_loss(&o.logits, &o.features, &labels, &centers, lambda).unwrap().total
    };
    finite_diff_check(f, &point, &grads.to_flat(), STEP).unwrap()
}

pub fn all() -> Vec<(&'static str, GradCheckReport)> {
    vec![
        ("lstm cell", check_cell()),
        ("stacked bidirectional layers", check_stacked_layers()),
        ("dense head", check_dense_head()),
        ("softmax cross-entropy", check_cross_entropy()),
        ("center loss features", check_center_loss()),
        ("full dual-channel model", check_full_model()),
    ]
}

#[allow(dead_code)]
pub fn worst_of_all() -> GradCheckReport {
    worst(all().into_iter().map(|(_, r)| r).collect())
}

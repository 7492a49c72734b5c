//! LSTM cells and layers with backpropagation through time.
//!
//! Gate pre-activations are laid out `[i | f | g | o]`, each block `C`
//! wide: `z = x·W + h_prev·U + b` with `W: d_in × 4C`, `U: C × 4C`.

use crate::error::{Error, Result};
use crate::numcore::{fastmath, gemm_nn, gemm_tn, xavier_init, Matrix, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, cells: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(input_dim, 4 * cells),
            u: Matrix::zeros(cells, 4 * cells),
            b: Matrix::zeros(1, 4 * cells),
        }
    }

    /// Xavier-uniform `W` and `U`; zero biases except the forget gate,
    /// which starts at 1.
    pub fn init(input_dim: usize, cells: usize, rng: &mut Rng) -> Result<Self> {
        let w = xavier_init(input_dim, 4 * cells, rng)?;
        let u = xavier_init(cells, 4 * cells, rng)?;
        let mut b = Matrix::zeros(1, 4 * cells);
        b.as_mut_slice()[cells..2 * cells].fill(1.0);
        Ok(LstmParams { w, u, b })
    }

    pub fn cells(&self) -> usize {
        self.u.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }

    fn check(&self) -> Result<()> {
        let c = self.cells();
        if self.u.cols() != 4 * c || self.w.cols() != 4 * c || self.b.shape() != (1, 4 * c) {
            return Err(Error::invalid("inconsistent LSTM parameter shapes"));
        }
        Ok(())
    }
}

/// Time-major batch of sequences: element `(t, b, d)` lives at
/// `(t·batch + b)·dim + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub len: usize,
    pub batch: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Sequence {
    pub fn zeros(len: usize, batch: usize, dim: usize) -> Self {
        Sequence {
            len,
            batch,
            dim,
            data: vec![0.0; len * batch * dim],
        }
    }

    pub fn from_vec(len: usize, batch: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != len * batch * dim {
            return Err(Error::invalid("sequence data length mismatch"));
        }
        Ok(Sequence { len, batch, dim, data })
    }

    pub fn step(&self, t: usize) -> &[f64] {
        let n = self.batch * self.dim;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.batch * self.dim;
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, b: usize, d: usize) -> f64 {
        self.data[(t * self.batch + b) * self.dim + d]
    }

    /// Same sequences with the time axis reversed.
    pub fn reversed(&self) -> Sequence {
        let mut out = Sequence::zeros(self.len, self.batch, self.dim);
        for t in 0..self.len {
            out.step_mut(self.len - 1 - t).copy_from_slice(self.step(t));
        }
        out
    }
}


/// Applies the gate nonlinearities to one example's pre-activations in
/// place and advances the cell.
#[inline]
fn activate_row(z: &mut [f64], c_prev: &[f64], c: &mut [f64], h: &mut [f64], tanh_c: &mut [f64]) {
    let n = c.len();
    let (zif, rest) = z.split_at_mut(2 * n);
    let (zg, zo) = rest.split_at_mut(n);
    fastmath::sigmoid_in_place(zif);
    fastmath::tanh_in_place(zg);
    fastmath::sigmoid_in_place(zo);
    let (zi, zf) = zif.split_at(n);
    for j in 0..n {
        c[j] = zf[j] * c_prev[j] + zi[j] * zg[j];
    }
    tanh_c.copy_from_slice(c);
    fastmath::tanh_in_place(tanh_c);
    for j in 0..n {
        h[j] = zo[j] * tanh_c[j];
    }
}

/// Backpropagates one example through the gate equations. `dh` is the total
/// hidden-state gradient, `dc` the cell gradient arriving from step `t+1`;
/// on return `dc` holds the gradient for `c_prev` and `dz` the
/// pre-activation gradient.
#[inline]
fn gate_backward_row(
    gates: &[f64],
    c_prev: &[f64],
    tanh_c: &[f64],
    dh: &[f64],
    dc: &mut [f64],
    dz: &mut [f64],
) {
    let n = dh.len();
    for j in 0..n {
        let i = gates[j];
        let f = gates[n + j];
        let g = gates[2 * n + j];
        let o = gates[3 * n + j];
        let tc = tanh_c[j];
        let d_o = dh[j] * tc;
        let d_c = dc[j] + dh[j] * o * (1.0 - tc * tc);
        dz[j] = d_c * g * i * (1.0 - i);
        dz[n + j] = d_c * c_prev[j] * f * (1.0 - f);
        dz[2 * n + j] = d_c * i * (1.0 - g * g);
        dz[3 * n + j] = d_o * o * (1.0 - o);
        dc[j] = d_c * f;
    }
}

/// Per-step activations of a cell kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCache {
    /// `B × 4C` activated gates `[i | f | g | o]`.
    pub gates: Matrix,
    pub c_prev: Matrix,
    pub c: Matrix,
    pub tanh_c: Matrix,
}

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::numeric(format!("non-finite {what}"), Some(i))),
        None => Ok(()),
    }
}

/// One LSTM step for a batch: returns `(h_t, c_t, cache)`.
pub fn lstm_cell_forward(
    x: &Matrix,
    h_prev: &Matrix,
    c_prev: &Matrix,
    params: &LstmParams,
) -> Result<(Matrix, Matrix, GateCache)> {
    params.check()?;
    let b = x.rows();
    let c = params.cells();
    if x.cols() != params.input_dim() || h_prev.shape() != (b, c) || c_prev.shape() != (b, c) {
        return Err(Error::invalid("lstm_cell_forward: dimension mismatch"));
    }
    ensure_finite(x.as_slice(), "cell input")?;
    ensure_finite(h_prev.as_slice(), "hidden state")?;
    ensure_finite(c_prev.as_slice(), "cell state")?;

    let mut z = Matrix::zeros(b, 4 * c);
    gemm_nn(x.as_slice(), params.w.as_slice(), z.as_mut_slice(), b, x.cols(), 4 * c);
    gemm_nn(h_prev.as_slice(), params.u.as_slice(), z.as_mut_slice(), b, c, 4 * c);
    for r in 0..b {
        for (zv, bv) in z.row_mut(r).iter_mut().zip(params.b.as_slice()) {
            *zv += bv;
        }
    }
    let mut h = Matrix::zeros(b, c);
    let mut cell = Matrix::zeros(b, c);
    let mut tanh_c = Matrix::zeros(b, c);
    for r in 0..b {
        let zr = &mut z.as_mut_slice()[r * 4 * c..(r + 1) * 4 * c];
        activate_row(
            zr,
            c_prev.row(r),
            &mut cell.as_mut_slice()[r * c..(r + 1) * c],
            &mut h.as_mut_slice()[r * c..(r + 1) * c],
            &mut tanh_c.as_mut_slice()[r * c..(r + 1) * c],
        );
    }
    let cache = GateCache {
        gates: z,
        c_prev: c_prev.clone(),
        c: cell.clone(),
        tanh_c,
    };
    Ok((h, cell, cache))
}

/// Gradients of one step given `dh_t` and `dc_t`; parameter gradients are
/// accumulated into `grads`. Returns `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    dh: &Matrix,
    dc: &Matrix,
    x: &Matrix,
    h_prev: &Matrix,
    cache: &GateCache,
    params: &LstmParams,
    grads: &mut LstmParams,
) -> Result<(Matrix, Matrix, Matrix)> {
    let b = x.rows();
    let c = params.cells();
    let d = params.input_dim();
    if dh.shape() != (b, c) || dc.shape() != (b, c) || cache.gates.shape() != (b, 4 * c) {
        return Err(Error::invalid("lstm_cell_backward: cache/gradient mismatch"));
    }
    if grads.w.shape() != params.w.shape() || grads.u.shape() != params.u.shape() {
        return Err(Error::invalid("lstm_cell_backward: gradient buffer shape"));
    }
    let mut dz = Matrix::zeros(b, 4 * c);
    let mut dc_prev = dc.clone();
    for r in 0..b {
        gate_backward_row(
            cache.gates.row(r),
            cache.c_prev.row(r),
            cache.tanh_c.row(r),
            dh.row(r),
            &mut dc_prev.as_mut_slice()[r * c..(r + 1) * c],
            &mut dz.as_mut_slice()[r * 4 * c..(r + 1) * 4 * c],
        );
    }
    gemm_tn(x.as_slice(), dz.as_slice(), grads.w.as_mut_slice(), b, d, 4 * c);
    gemm_tn(h_prev.as_slice(), dz.as_slice(), grads.u.as_mut_slice(), b, c, 4 * c);
    for r in 0..b {
        for (g, v) in grads.b.as_mut_slice().iter_mut().zip(dz.row(r)) {
            *g += v;
        }
    }
    let mut dx = Matrix::zeros(b, d);
    gemm_nn(dz.as_slice(), params.w.transpose().as_slice(), dx.as_mut_slice(), b, 4 * c, d);
    let mut dh_prev = Matrix::zeros(b, c);
    gemm_nn(dz.as_slice(), params.u.transpose().as_slice(), dh_prev.as_mut_slice(), b, 4 * c, c);
    Ok((dx, dh_prev, dc_prev))
}

/// Everything one direction of a layer needs for BPTT, in processing order.
#[derive(Clone, Debug)]
pub(crate) struct DirCache {
    x: Sequence,
    /// `T·B·4C` activated gates.
    gates: Vec<f64>,
    /// `(T+1)·B·C`, block 0 is the zero initial state.
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
    cells: usize,
}

impl DirCache {
    /// Hidden state after processing step `s` (`B × C`).
    fn h_after(&self, s: usize) -> &[f64] {
        let n = self.x.batch * self.cells;
        &self.h[(s + 1) * n..(s + 2) * n]
    }
}

fn forward_dir(x: &Sequence, p: &LstmParams) -> DirCache {
    let (t_len, b, d) = (x.len, x.batch, x.dim);
    let c = p.cells();
    let g4 = 4 * c;
    let mut gates = vec![0.0; t_len * b * g4];
    gemm_nn(&x.data, p.w.as_slice(), &mut gates, t_len * b, d, g4);
    for row in gates.chunks_exact_mut(g4) {
        for (zv, bv) in row.iter_mut().zip(p.b.as_slice()) {
            *zv += bv;
        }
    }
    let n = b * c;
    let mut cs = vec![0.0; (t_len + 1) * n];
    let mut hs = vec![0.0; (t_len + 1) * n];
    let mut tanh_c = vec![0.0; t_len * n];
    for t in 0..t_len {
        let z_t = &mut gates[t * b * g4..(t + 1) * b * g4];
        let (h_done, h_rest) = hs.split_at_mut((t + 1) * n);
        let h_prev = &h_done[t * n..];
        gemm_nn(h_prev, p.u.as_slice(), z_t, b, c, g4);
        let (c_done, c_rest) = cs.split_at_mut((t + 1) * n);
        let c_prev = &c_done[t * n..];
        for r in 0..b {
            activate_row(
                &mut z_t[r * g4..(r + 1) * g4],
                &c_prev[r * c..(r + 1) * c],
                &mut c_rest[r * c..(r + 1) * c],
                &mut h_rest[r * c..(r + 1) * c],
                &mut tanh_c[t * n + r * c..t * n + (r + 1) * c],
            );
        }
    }
    DirCache {
        x: x.clone(),
        gates,
        c: cs,
        h: hs,
        tanh_c,
        cells: c,
    }
}

/// `dh_out` holds `T·B·C` gradients on the hidden outputs in processing
/// order. Accumulates into `grads` and returns the input gradient.
fn backward_dir(cache: &DirCache, dh_out: &[f64], p: &LstmParams, grads: &mut LstmParams) -> Sequence {
    let (t_len, b, d) = (cache.x.len, cache.x.batch, cache.x.dim);
    let c = cache.cells;
    let g4 = 4 * c;
    let n = b * c;
    let u_t = p.u.transpose();
    let mut dz = vec![0.0; t_len * b * g4];
    let mut dh = vec![0.0; n];
    let mut dh_next = vec![0.0; n];
    let mut dc = vec![0.0; n];
    for t in (0..t_len).rev() {
        for ((a, &o), &r) in dh.iter_mut().zip(&dh_out[t * n..(t + 1) * n]).zip(&dh_next) {
            *a = o + r;
        }
        let dz_t = &mut dz[t * b * g4..(t + 1) * b * g4];
        let c_prev = &cache.c[t * n..(t + 1) * n];
        for r in 0..b {
            gate_backward_row(
                &cache.gates[(t * b + r) * g4..(t * b + r + 1) * g4],
                &c_prev[r * c..(r + 1) * c],
                &cache.tanh_c[t * n + r * c..t * n + (r + 1) * c],
                &dh[r * c..(r + 1) * c],
                &mut dc[r * c..(r + 1) * c],
                &mut dz_t[r * g4..(r + 1) * g4],
            );
        }
        if t > 0 {
            dh_next.fill(0.0);
            gemm_nn(dz_t, u_t.as_slice(), &mut dh_next, b, g4, c);
        }
    }
    gemm_tn(&cache.x.data, &dz, grads.w.as_mut_slice(), t_len * b, d, g4);
    gemm_tn(&cache.h[..t_len * n], &dz, grads.u.as_mut_slice(), t_len * b, c, g4);
    let db = grads.b.as_mut_slice();
    for row in dz.chunks_exact(g4) {
        for (g, v) in db.iter_mut().zip(row) {
            *g += v;
        }
    }
    let mut dx = Sequence::zeros(t_len, b, d);
    gemm_nn(&dz, p.w.transpose().as_slice(), &mut dx.data, t_len * b, g4, d);
    dx
}

/// One LSTM layer, optionally bidirectional.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
}

impl LstmLayer {
    pub fn is_bidirectional(&self) -> bool {
        self.backward.is_some()
    }

    pub fn cells(&self) -> usize {
        self.forward.cells()
    }

    pub fn output_dim(&self) -> usize {
        self.cells() * if self.is_bidirectional() { 2 } else { 1 }
    }

    pub fn zeros_like(&self) -> LstmLayer {
        let z = |p: &LstmParams| LstmParams::zeros(p.input_dim(), p.cells());
        LstmLayer {
            forward: z(&self.forward),
            backward: self.backward.as_ref().map(z),
        }
    }
}

/// Layer output: the full sequence or only the final step.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerOutput {
    Sequence(Sequence),
    Last(Matrix),
}

impl LayerOutput {
    pub fn as_sequence(&self) -> Option<&Sequence> {
        match self {
            LayerOutput::Sequence(s) => Some(s),
            LayerOutput::Last(_) => None,
        }
    }

    pub fn as_last(&self) -> Option<&Matrix> {
        match self {
            LayerOutput::Last(m) => Some(m),
            LayerOutput::Sequence(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerCache {
    fwd: DirCache,
    bwd: Option<DirCache>,
    return_sequences: bool,
}

/// Runs a layer over `seq` from zero initial states. The backward
/// direction reads the sequence in reverse; its outputs are re-aligned
/// with input time, so with `return_sequences` step `t` holds
/// `[h_fwd(t), h_bwd(t)]` and without it the final states of both passes.
pub fn lstm_layer_forward(
    seq: &Sequence,
    layer: &LstmLayer,
    return_sequences: bool,
) -> Result<(LayerOutput, LayerCache)> {
    if seq.len == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    layer.forward.check()?;
    if seq.dim != layer.forward.input_dim() {
        return Err(Error::invalid(format!(
            "layer expects input width {}, got {}",
            layer.forward.input_dim(),
            seq.dim
        )));
    }
    if let Some(bp) = &layer.backward {
        bp.check()?;
        if bp.input_dim() != seq.dim || bp.cells() != layer.cells() {
            return Err(Error::invalid("backward direction shape differs from forward"));
        }
    }
    ensure_finite(&seq.data, "layer input")?;

    let fwd = forward_dir(seq, &layer.forward);
    let bwd = layer.backward.as_ref().map(|p| forward_dir(&seq.reversed(), p));
    let (t_len, b, c) = (seq.len, seq.batch, layer.cells());
    let width = layer.output_dim();

    let out = if return_sequences {
        let mut out = Sequence::zeros(t_len, b, width);
        for t in 0..t_len {
            let hf = fwd.h_after(t);
            let hb = bwd.as_ref().map(|d| d.h_after(t_len - 1 - t));
            let dst = out.step_mut(t);
            for r in 0..b {
                dst[r * width..r * width + c].copy_from_slice(&hf[r * c..(r + 1) * c]);
                if let Some(hb) = hb {
                    dst[r * width + c..(r + 1) * width].copy_from_slice(&hb[r * c..(r + 1) * c]);
                }
            }
        }
        LayerOutput::Sequence(out)
    } else {
        let mut out = Matrix::zeros(b, width);
        let hf = fwd.h_after(t_len - 1);
        let hb = bwd.as_ref().map(|d| d.h_after(t_len - 1));
        for r in 0..b {
            let row = out.row_mut(r);
            row[..c].copy_from_slice(&hf[r * c..(r + 1) * c]);
            if let Some(hb) = hb {
                row[c..].copy_from_slice(&hb[r * c..(r + 1) * c]);
            }
        }
        LayerOutput::Last(out)
    };
    Ok((
        out,
        LayerCache {
            fwd,
            bwd,
            return_sequences,
        },
    ))
}

/// Backpropagates a layer. `d_out` must have the shape of the forward
/// output; parameter gradients accumulate into `grads`.
pub fn lstm_layer_backward(
    cache: &LayerCache,
    d_out: &LayerOutput,
    layer: &LstmLayer,
    grads: &mut LstmLayer,
) -> Result<Sequence> {
    let (t_len, b) = (cache.fwd.x.len, cache.fwd.x.batch);
    let c = layer.cells();
    let width = layer.output_dim();
    let n = b * c;
    let mut dh_f = vec![0.0; t_len * n];
    let mut dh_b = cache.bwd.as_ref().map(|_| vec![0.0; t_len * n]);
    match (d_out, cache.return_sequences) {
        (LayerOutput::Sequence(s), true) => {
            if (s.len, s.batch, s.dim) != (t_len, b, width) {
                return Err(Error::invalid("layer output gradient shape mismatch"));
            }
            for t in 0..t_len {
                let src = s.step(t);
                for r in 0..b {
                    dh_f[t * n + r * c..t * n + (r + 1) * c]
                        .copy_from_slice(&src[r * width..r * width + c]);
                    if let Some(db) = dh_b.as_mut() {
                        let s_idx = t_len - 1 - t;
                        db[s_idx * n + r * c..s_idx * n + (r + 1) * c]
                            .copy_from_slice(&src[r * width + c..(r + 1) * width]);
                    }
                }
            }
        }
        (LayerOutput::Last(m), false) => {
            if m.shape() != (b, width) {
                return Err(Error::invalid("layer output gradient shape mismatch"));
            }
            let last = (t_len - 1) * n;
            for r in 0..b {
                dh_f[last + r * c..last + (r + 1) * c].copy_from_slice(&m.row(r)[..c]);
                if let Some(db) = dh_b.as_mut() {
                    db[last + r * c..last + (r + 1) * c].copy_from_slice(&m.row(r)[c..]);
                }
            }
        }
        _ => return Err(Error::invalid("layer output gradient kind does not match cache")),
    }

    let mut dx = backward_dir(&cache.fwd, &dh_f, &layer.forward, &mut grads.forward);
    if let (Some(bc), Some(db)) = (&cache.bwd, &dh_b) {
        let bp = layer.backward.as_ref().expect("cache has a backward pass");
        let bg = grads
            .backward
            .as_mut()
            .ok_or_else(|| Error::invalid("gradient buffer lacks backward direction"))?;
        let dx_rev = backward_dir(bc, db, bp, bg);
        for t in 0..t_len {
            for (a, v) in dx.step_mut(t).iter_mut().zip(dx_rev.step(t_len - 1 - t)) {
                *a += v;
            }
        }
    }
    Ok(dx)
}

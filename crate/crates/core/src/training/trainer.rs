use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::centers::ClassCenters;
use super::loss::loss_sums;
use crate::dataio::FrameFile;
use crate::error::{Error, Result};
use crate::network::{dc_backward, dc_forward, DcInput, DcLstmModel};
use crate::numcore::{adam_step, streams, AdamConfig, AdamState, Matrix, Rng};
use crate::represent::{normalize_frame, RepresentOptions, RepresentationPair};
use crate::siggen::ModulationType;

/// Examples per forward/backward unit inside a mini-batch. Chunk gradients
/// are summed in chunk order, so results do not depend on thread count.
pub const TRAIN_CHUNK: usize = 32;

/// Loss above which training is considered diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossMode {
    SoftmaxOnly,
    SoftmaxCenter,
}

impl LossMode {
    pub fn name(self) -> &'static str {
        match self {
            LossMode::SoftmaxOnly => "softmax",
            LossMode::SoftmaxCenter => "center",
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softmax" | "softmax-only" => Ok(LossMode::SoftmaxOnly),
            "center" | "softmax+center" => Ok(LossMode::SoftmaxCenter),
            other => Err(Error::invalid(format!("unknown loss mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub adam: AdamConfig,
    pub represent: RepresentOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 256,
            lambda: 0.1,
            alpha: 0.5,
            epochs: 70,
            seed: 0,
            loss_mode: LossMode::SoftmaxCenter,
            adam: AdamConfig::default(),
            represent: RepresentOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be a finite non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha must lie in [0, 1]"));
        }
        if !(self.adam.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    /// λ actually applied to the loss.
    pub fn effective_lambda(&self) -> f64 {
        match self.loss_mode {
            LossMode::SoftmaxOnly => 0.0,
            LossMode::SoftmaxCenter => self.lambda,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub softmax_loss: f64,
    pub center_loss: f64,
    /// Mean squared feature-to-center distance, tracked in both loss modes.
    pub center_distance: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// Deterministic columns only; wall-clock time is in [`Self::timing_csv`].
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,softmax_loss,center_loss,center_distance,accuracy\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.9},{:.9},{:.9},{:.6}\n",
                r.epoch, r.softmax_loss, r.center_loss, r.center_distance, r.accuracy
            ));
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("epoch,seconds\n");
        for r in &self.records {
            s.push_str(&format!("{},{:.3}\n", r.epoch, r.seconds));
        }
        s
    }
}

/// Everything that evolves during training; enough to resume.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub model: DcLstmModel,
    pub centers: ClassCenters,
    pub classes: Vec<ModulationType>,
    pub loss_mode: LossMode,
    pub adam: Vec<AdamState>,
    pub epochs_done: usize,
    pub log: TrainLog,
}

impl TrainState {
    pub fn fresh(model: DcLstmModel, classes: Vec<ModulationType>, config: &TrainConfig) -> Result<Self> {
        if model.arch.classes != classes.len() {
            return Err(Error::invalid(format!(
                "model has {} outputs but {} classes were given",
                model.arch.classes,
                classes.len()
            )));
        }
        let centers = ClassCenters::new(classes.len(), model.arch.feature_dim(), config.alpha)?;
        let adam = model.tensors().iter().map(|t| AdamState::for_matrix(t)).collect();
        Ok(TrainState {
            model,
            centers,
            classes,
            loss_mode: config.loss_mode,
            adam,
            epochs_done: 0,
            log: TrainLog::default(),
        })
    }
}

/// Normalizes every frame; labels index into `classes`.
pub fn prepare(
    file: &FrameFile,
    classes: &[ModulationType],
    opts: RepresentOptions,
) -> Result<(Vec<RepresentationPair>, Vec<usize>)> {
    let labels = file
        .frames
        .iter()
        .map(|f| {
            classes.iter().position(|&c| c == f.label).ok_or_else(|| {
                Error::invalid(format!("training frame of class {} unknown to the model", f.label))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = file
        .frames
        .par_iter()
        .map(|f| normalize_frame(f, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok((reps, labels))
}

struct ChunkResult {
    grads: DcLstmModel,
    features: Matrix,
    softmax: f64,
    center: f64,
    correct: usize,
}

/// One optimizer-free pass over a mini-batch: summed gradients (already
/// divided by the batch size) plus the batch features.
fn batch_gradients(
    model: &DcLstmModel,
    centers: &Matrix,
    reps: &[RepresentationPair],
    labels: &[usize],
    batch: &[usize],
    lambda: f64,
) -> Result<ChunkResult> {
    let m = batch.len() as f64;
    let parts: Vec<ChunkResult> = batch
        .par_chunks(TRAIN_CHUNK)
        .map(|idx| {
            let pairs: Vec<&RepresentationPair> = idx.iter().map(|&i| &reps[i]).collect();
            let ys: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let input = DcInput::from_pairs(&pairs)?;
            let (out, cache) = dc_forward(&input, model)?;
            let s = loss_sums(&out.logits, &out.features, &ys, centers, lambda, m)?;
            let grads = dc_backward(model, &cache, &s.d_logits, &s.d_features)?;
            Ok(ChunkResult {
                grads,
                features: out.features,
                softmax: s.softmax,
                center: s.center,
                correct: s.correct,
            })
        })
        .collect::<Result<_>>()?;

    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("batch is non-empty");
    let mut feats = acc.features.into_vec();
    for p in iter {
        acc.grads.accumulate(&p.grads);
        feats.extend_from_slice(p.features.as_slice());
        acc.softmax += p.softmax;
        acc.center += p.center;
        acc.correct += p.correct;
    }
    acc.features = Matrix::from_vec(batch.len(), model.arch.feature_dim(), feats)?;
    Ok(acc)
}

/// Runs epochs `state.epochs_done .. config.epochs`. Epoch `e` visits a
/// permutation drawn from stream `SHUFFLE + e` of the run seed, so a run
/// resumed from a checkpoint replays the same schedule. `on_epoch` sees the
/// state after every completed epoch.
pub fn train<F>(
    file: &FrameFile,
    config: &TrainConfig,
    mut state: TrainState,
    mut on_epoch: F,
) -> Result<TrainState>
where
    F: FnMut(&TrainState) -> Result<()>,
{
    config.validate()?;
    if state.loss_mode != config.loss_mode {
        return Err(Error::invalid("checkpoint loss mode differs from configuration"));
    }
    for c in &file.classes {
        if !state.classes.contains(c) && file.count_of(*c) > 0 {
            return Err(Error::invalid(format!("training class {c} absent from model class table")));
        }
    }
    let (reps, labels) = prepare(file, &state.classes, config.represent)?;
    if reps.is_empty() {
        return Err(Error::invalid("training file has no frames"));
    }
    let lambda = config.effective_lambda();
    state.centers.alpha = config.alpha;
    let n = reps.len();

    for epoch in state.epochs_done..config.epochs {
        let started = Instant::now();
        let order = Rng::new(config.seed, streams::SHUFFLE + epoch as u64).permutation(n);
        let (mut ls, mut lc, mut correct) = (0.0, 0.0, 0usize);
        for batch in order.chunks(config.batch) {
            let r = batch_gradients(&state.model, &state.centers.centers, &reps, &labels, batch, lambda)?;
            let m = batch.len() as f64;
            let loss = (r.softmax + lambda * r.center) / m;
            if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
                return Err(Error::numeric(
                    format!(
                        "training diverged in epoch {} (loss {loss}); last good state is epoch {}",
                        epoch + 1,
                        state.epochs_done
                    ),
                    None,
                ));
            }
            for ((p, g), s) in state
                .model
                .tensors_mut()
                .into_iter()
                .zip(r.grads.tensors())
                .zip(state.adam.iter_mut())
            {
                adam_step(p, g, s, &config.adam)?;
            }
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            state.centers.update(&r.features, &ys)?;
            ls += r.softmax;
            lc += r.center;
            correct += r.correct;
        }
        state.epochs_done = epoch + 1;
        state.log.records.push(EpochRecord {
            epoch: epoch + 1,
            softmax_loss: ls / n as f64,
            center_loss: match config.loss_mode {
                LossMode::SoftmaxOnly => 0.0,
                LossMode::SoftmaxCenter => lc / n as f64,
            },
            center_distance: 2.0 * lc / n as f64,
            accuracy: correct as f64 / n as f64,
            seconds: started.elapsed().as_secs_f64(),
        });
        on_epoch(&state)?;
    }
    Ok(state)
}

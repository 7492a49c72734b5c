use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Value and upstream gradients of `L = L_s + λ·L_c` for a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub total: f64,
    /// Mean cross-entropy.
    pub softmax: f64,
    /// `½ · mean ‖x_i − c_{y_i}‖²`.
    pub center: f64,
    pub d_logits: Matrix,
    pub d_features: Matrix,
    /// Examples whose arg-max logit equals the label.
    pub correct: usize,
}

/// Unnormalized sums over a slice of a batch; gradients are already divided
/// by `denom`, the size of the full batch.
pub(crate) struct LossSums {
    pub softmax: f64,
    pub center: f64,
    pub d_logits: Matrix,
    pub d_features: Matrix,
    pub correct: usize,
}

pub(crate) fn loss_sums(
    logits: &Matrix,
    features: &Matrix,
    labels: &[usize],
    centers: &Matrix,
    lambda: f64,
    denom: f64,
) -> Result<LossSums> {
    let (b, n) = logits.shape();
    let d = features.cols();
    if labels.len() != b || features.rows() != b {
        return Err(Error::invalid("loss: batch sizes disagree"));
    }
    if centers.shape() != (n, d) {
        return Err(Error::invalid(format!(
            "loss: centers {:?} do not match {n} classes × {d} features",
            centers.shape()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
        return Err(Error::invalid(format!("label {bad} out of range for {n} classes")));
    }
    let mut d_logits = Matrix::zeros(b, n);
    let mut d_features = Matrix::zeros(b, d);
    let mut softmax = 0.0;
    let mut center = 0.0;
    let mut correct = 0;
    for (r, &y) in labels.iter().enumerate() {
        let z = logits.row(r);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_norm = max + sum.ln();
        softmax += log_norm - z[y];
        let argmax = z
            .iter()
            .enumerate()
            .fold(0, |best, (j, &v)| if v > z[best] { j } else { best });
        if argmax == y {
            correct += 1;
        }
        for (j, g) in d_logits.row_mut(r).iter_mut().enumerate() {
            let p = (z[j] - log_norm).exp();
            *g = (p - if j == y { 1.0 } else { 0.0 }) / denom;
        }

        let x = features.row(r);
        let c = centers.row(y);
        let mut dist = 0.0;
        for (k, g) in d_features.row_mut(r).iter_mut().enumerate() {
            let diff = x[k] - c[k];
            dist += diff * diff;
            *g = lambda * diff / denom;
        }
        center += 0.5 * dist;
    }
    Ok(LossSums {
        softmax,
        center,
        d_logits,
        d_features,
        correct,
    })
}

/// Cross-entropy plus center loss averaged over the batch.
pub fn combined_loss(
    logits: &Matrix,
    features: &Matrix,
    labels: &[usize],
    centers: &Matrix,
    lambda: f64,
) -> Result<LossOutput> {
    if labels.is_empty() {
        return Err(Error::invalid("loss: empty batch"));
    }
    let m = labels.len() as f64;
    let s = loss_sums(logits, features, labels, centers, lambda, m)?;
    let softmax = s.softmax / m;
    let center = s.center / m;
    Ok(LossOutput {
        total: softmax + lambda * center,
        softmax,
        center,
        d_logits: s.d_logits,
        d_features: s.d_features,
        correct: s.correct,
    })
}

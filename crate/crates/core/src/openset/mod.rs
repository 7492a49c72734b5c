//! Weibull modelling of feature-to-center distances and the recalibration
//! of logits into `N + 1` open-set probabilities.

mod weibull;

use std::fmt::Write as _;
use std::path::Path;

pub use weibull::{fit_weibull, weibull_cdf, weibull_invf, WeibullFit, MIN_FIT_SAMPLES};

use crate::error::{Error, Result};
use crate::numcore::Matrix;
use crate::siggen::ModulationType;

/// Default number of farthest correct examples per class.
pub const DEFAULT_TAIL_SIZE: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct WeibullTail {
    pub class: ModulationType,
    pub a: f64,
    pub b: f64,
    pub m_used: usize,
    /// Fewer correct examples than the requested tail size were available.
    pub saturated: bool,
    pub loglik: f64,
    pub iterations: usize,
}

impl WeibullTail {
    pub fn survival(&self, d: f64) -> f64 {
        weibull_invf(d, self.a, self.b).expect("tail parameters validated at construction")
    }
}

/// Largest distances of one class, descending.
#[derive(Clone, Debug, PartialEq)]
pub struct TailSample {
    pub distances: Vec<f64>,
    pub saturated: bool,
}

fn squared_distance(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_rows(features: &Matrix, labels: &[usize], preds: &[usize]) -> Result<()> {
    if labels.len() != features.rows() || preds.len() != features.rows() {
        return Err(Error::invalid("features, labels and predictions differ in length"));
    }
    Ok(())
}

/// Mean feature of the correctly classified examples of each class.
pub fn correct_centers(features: &Matrix, labels: &[usize], preds: &[usize], classes: usize) -> Result<Matrix> {
    check_rows(features, labels, preds)?;
    let d = features.cols();
    let mut sums = Matrix::zeros(classes, d);
    let mut counts = vec![0usize; classes];
    for (r, (&y, &p)) in labels.iter().zip(preds).enumerate() {
        if y >= classes {
            return Err(Error::invalid(format!("label {y} out of range for {classes} classes")));
        }
        if y != p {
            continue;
        }
        counts[y] += 1;
        for (s, &x) in sums.row_mut(y).iter_mut().zip(features.row(r)) {
            *s += x;
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(Error::Fit(format!("class {j} has no correctly classified example")));
        }
        sums.row_mut(j).iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(sums)
}

/// Per class, the `m` largest squared distances of correctly classified
/// examples to their class center, descending.
pub fn tail_distances(
    features: &Matrix,
    labels: &[usize],
    preds: &[usize],
    centers: &Matrix,
    m: usize,
) -> Result<Vec<TailSample>> {
    check_rows(features, labels, preds)?;
    if m < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!("tail size must be at least {MIN_FIT_SAMPLES}")));
    }
    if centers.cols() != features.cols() {
        return Err(Error::invalid("centers and features differ in width"));
    }
    let n = centers.rows();
    let mut per_class = vec![Vec::new(); n];
    for (r, (&y, &p)) in labels.iter().zip(preds).enumerate() {
        if y >= n {
            return Err(Error::invalid(format!("label {y} out of range for {n} classes")));
        }
        if y == p {
            per_class[y].push(squared_distance(features.row(r), centers.row(y)));
        }
    }
    per_class
        .into_iter()
        .enumerate()
        .map(|(j, d)| {
            if d.len() < MIN_FIT_SAMPLES {
                return Err(Error::Fit(format!(
                    "class {j} has {} correctly classified examples, need {MIN_FIT_SAMPLES}",
                    d.len()
                )));
            }
            Ok(largest_distances(d, m))
        })
        .collect()
}

/// The `m` largest values, descending; saturated when no more than `m`
/// were available.
pub fn largest_distances(mut d: Vec<f64>, m: usize) -> TailSample {
    d.sort_by(|a, b| b.total_cmp(a));
    let saturated = d.len() <= m;
    d.truncate(m);
    TailSample {
        distances: d,
        saturated,
    }
}

/// Fits one Weibull per class to its tail.
pub fn fit_tails(samples: &[TailSample], classes: &[ModulationType]) -> Result<Vec<WeibullTail>> {
    if samples.len() != classes.len() {
        return Err(Error::invalid("one tail sample per class required"));
    }
    samples
        .iter()
        .zip(classes)
        .map(|(s, &class)| {
            let fit = fit_weibull(&s.distances).map_err(|e| match e {
                Error::Fit(msg) | Error::InvalidArgument(msg) => Error::Fit(format!("class {class}: {msg}")),
                other => other,
            })?;
            Ok(WeibullTail {
                class,
                a: fit.a,
                b: fit.b,
                m_used: s.distances.len(),
                saturated: s.saturated,
                loglik: fit.loglik,
                iterations: fit.iterations,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpenSetPrediction {
    /// `N + 1` recalibrated activations, unknown last.
    pub activations: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Zero-based; `N` is the unknown class.
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpenLabel {
    Known(usize),
    Unknown,
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (j, &x)| if x > v[best] { j } else { best })
}

/// Recalibration given the survival probability of each class's distance.
pub fn recalibrate_with_survival(logits: &[f64], survival: &[f64]) -> Result<OpenSetPrediction> {
    if logits.len() != survival.len() || logits.is_empty() {
        return Err(Error::invalid("one survival probability per logit required"));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite logit", Some(i)));
    }
    let mut act: Vec<f64> = logits
        .iter()
        .zip(survival)
        .map(|(&v, &w)| if v > 0.0 { w * v } else { v })
        .collect();
    let removed: f64 = logits.iter().zip(&act).map(|(v, h)| v - h).sum();
    act.push(removed);
    let max = act.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = act.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probabilities: Vec<f64> = exps.iter().map(|e| e / z).collect();
    let index = argmax(&probabilities);
    Ok(OpenSetPrediction {
        activations: act,
        probabilities,
        index,
    })
}

/// Damps each positive logit by the survival probability of the squared
/// distance to its class center and routes the removed mass to an extra
/// unknown activation.
pub fn recalibrate(logits: &[f64], features: &[f64], centers: &Matrix, tails: &[WeibullTail]) -> Result<OpenSetPrediction> {
    let n = logits.len();
    if tails.len() != n {
        return Err(Error::invalid(format!("{n} logits but {} Weibull tails", tails.len())));
    }
    if centers.rows() != n || centers.cols() != features.len() {
        return Err(Error::invalid("centers do not match logits and features"));
    }
    let survival: Vec<f64> = (0..n)
        .map(|i| tails[i].survival(squared_distance(features, centers.row(i))))
        .collect();
    recalibrate_with_survival(logits, &survival)
}

pub fn predict_open(pred: &OpenSetPrediction) -> OpenLabel {
    if pred.index + 1 == pred.probabilities.len() {
        OpenLabel::Unknown
    } else {
        OpenLabel::Known(pred.index)
    }
}

const TAILS_HEADER: &str = "class,a,b,M_used,loglik";

pub fn tails_to_csv(tails: &[WeibullTail]) -> String {
    let mut s = format!("{TAILS_HEADER}\n");
    for t in tails {
        let _ = writeln!(s, "{},{:e},{:e},{},{:e}", t.class, t.a, t.b, t.m_used, t.loglik);
    }
    s
}

/// Parses tails written by [`tails_to_csv`]. Only the CSV columns survive a
/// round trip; `saturated` and `iterations` read back as defaults.
pub fn tails_from_csv(text: &str) -> Result<Vec<WeibullTail>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TAILS_HEADER => {}
        _ => return Err(Error::format(format!("tails file must start with `{TAILS_HEADER}`"), Some(0))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| Error::format(format!("tails line {}: {what}", i + 2), None);
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let class = f[0].parse::<ModulationType>().map_err(|_| bad("unknown class"))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            let (a, b) = (num(f[1])?, num(f[2])?);
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(bad("parameters must be positive"));
            }
            Ok(WeibullTail {
                class,
                a,
                b,
                m_used: f[3].parse().map_err(|_| bad("bad M_used"))?,
                saturated: false,
                loglik: num(f[4])?,
                iterations: 0,
            })
        })
        .collect()
}

pub fn centers_to_csv(classes: &[ModulationType], centers: &Matrix) -> String {
    let mut s = String::from("class");
    for k in 0..centers.cols() {
        let _ = write!(s, ",c{k}");
    }
    s.push('\n');
    for (j, c) in classes.iter().enumerate() {
        s.push_str(c.name());
        for v in centers.row(j) {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

pub fn centers_from_csv(text: &str) -> Result<(Vec<ModulationType>, Matrix)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::format("empty centers file", Some(0)))?;
    let d = header.split(',').count().saturating_sub(1);
    if d == 0 || !header.starts_with("class") {
        return Err(Error::format("bad centers header", Some(0)));
    }
    let mut classes = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |what: &str| Error::format(format!("centers line {}: {what}", i + 2), None);
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != d + 1 {
            return Err(bad("wrong field count"));
        }
        classes.push(f[0].parse::<ModulationType>().map_err(|_| bad("unknown class"))?);
        for v in &f[1..] {
            data.push(v.parse::<f64>().map_err(|_| bad("bad number"))?);
        }
    }
    let m = Matrix::from_vec(classes.len(), d, data)?;
    Ok((classes, m))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

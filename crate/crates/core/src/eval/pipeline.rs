use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use super::metrics::EvalReport;
use crate::dataio::FrameFile;
use crate::error::{Error, Result};
use crate::network::{infer, DcLstmModel, ForwardOutput};
use crate::numcore::Matrix;
use crate::openset::{correct_centers, fit_tails, recalibrate, tail_distances, WeibullTail};
use crate::represent::{normalize_frame, RepresentOptions, RepresentationPair};
use crate::siggen::ModulationType;

pub const UNKNOWN_NAME: &str = "unknown";

/// Open-set decision rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpenMode {
    /// Softmax-trained model, plain arg-max over the known classes.
    SoftmaxOnly,
    /// Softmax-trained model with Weibull recalibration.
    SoftmaxWeibull,
    /// Center-loss-trained model with Weibull recalibration.
    CenterWeibull,
}

impl OpenMode {
    pub fn name(self) -> &'static str {
        match self {
            OpenMode::SoftmaxOnly => "slo",
            OpenMode::SoftmaxWeibull => "slwf",
            OpenMode::CenterWeibull => "clwf",
        }
    }

    pub fn uses_weibull(self) -> bool {
        self != OpenMode::SoftmaxOnly
    }
}

impl fmt::Display for OpenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "").as_str() {
            "slo" => Ok(OpenMode::SoftmaxOnly),
            "slwf" => Ok(OpenMode::SoftmaxWeibull),
            "clwf" => Ok(OpenMode::CenterWeibull),
            other => Err(Error::invalid(format!("unknown open-set mode `{other}` (slo, slwf, clwf)"))),
        }
    }
}

/// Scored predictions ready for [`EvalReport::build`].
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub preds: Vec<usize>,
    pub labels: Vec<usize>,
    pub snrs: Vec<f32>,
    pub names: Vec<String>,
    pub open: bool,
}

impl Predictions {
    pub fn report(&self) -> Result<EvalReport> {
        EvalReport::build(&self.preds, &self.labels, &self.snrs, self.names.clone(), self.open)
    }
}

fn representations(file: &FrameFile, opts: RepresentOptions) -> Result<Vec<RepresentationPair>> {
    file.frames.par_iter().map(|f| normalize_frame(f, opts)).collect()
}

fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows()).map(|r| crate::openset::argmax(logits.row(r))).collect()
}

fn check_model(model: &DcLstmModel, classes: &[ModulationType]) -> Result<()> {
    if model.arch.classes != classes.len() {
        return Err(Error::invalid(format!(
            "model has {} outputs but {} classes were given",
            model.arch.classes,
            classes.len()
        )));
    }
    Ok(())
}

/// Runs the network over a whole file.
pub fn forward_file(model: &DcLstmModel, file: &FrameFile, opts: RepresentOptions) -> Result<ForwardOutput> {
    infer(model, &representations(file, opts)?)
}

/// Close-set evaluation: every test class must be among `classes`.
pub fn evaluate_close(
    model: &DcLstmModel,
    classes: &[ModulationType],
    file: &FrameFile,
    opts: RepresentOptions,
) -> Result<Predictions> {
    check_model(model, classes)?;
    let labels = file
        .frames
        .iter()
        .map(|f| {
            classes
                .iter()
                .position(|&c| c == f.label)
                .ok_or_else(|| Error::invalid(format!("test class {} unknown to a close-set model", f.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = forward_file(model, file, opts)?;
    Ok(Predictions {
        preds: argmax_rows(&out.logits),
        labels,
        snrs: file.frames.iter().map(|f| f.snr_db).collect(),
        names: classes.iter().map(|c| c.name().to_string()).collect(),
        open: false,
    })
}

/// Per-class centers and Weibull tails from the correctly classified
/// training examples.
pub fn fit_open_set(
    model: &DcLstmModel,
    classes: &[ModulationType],
    train: &FrameFile,
    opts: RepresentOptions,
    tail_size: usize,
) -> Result<(Matrix, Vec<WeibullTail>)> {
    check_model(model, classes)?;
    let labels = train
        .frames
        .iter()
        .map(|f| {
            classes
                .iter()
                .position(|&c| c == f.label)
                .ok_or_else(|| Error::invalid(format!("training class {} unknown to the model", f.label)))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = forward_file(model, train, opts)?;
    let preds = argmax_rows(&out.logits);
    let centers = correct_centers(&out.features, &labels, &preds, classes.len())?;
    let samples = tail_distances(&out.features, &labels, &preds, &centers, tail_size)?;
    let tails = fit_tails(&samples, classes)?;
    Ok((centers, tails))
}

/// Open-set evaluation over `known`; test frames of any other class carry
/// the unknown label (index `N`).
pub fn evaluate_open(
    model: &DcLstmModel,
    known: &[ModulationType],
    file: &FrameFile,
    opts: RepresentOptions,
    mode: OpenMode,
    weibull: Option<(&Matrix, &[WeibullTail])>,
) -> Result<Predictions> {
    check_model(model, known)?;
    let n = known.len();
    let labels: Vec<usize> = file
        .frames
        .iter()
        .map(|f| known.iter().position(|&c| c == f.label).unwrap_or(n))
        .collect();
    let out = forward_file(model, file, opts)?;
    let preds = if mode.uses_weibull() {
        let (centers, tails) =
            weibull.ok_or_else(|| Error::invalid(format!("mode {mode} needs centers and Weibull tails")))?;
        for (t, &k) in tails.iter().zip(known) {
            if t.class != k {
                return Err(Error::invalid(format!("tail for {} where {} was expected", t.class, k)));
            }
        }
        (0..out.logits.rows())
            .map(|r| recalibrate(out.logits.row(r), out.features.row(r), centers, tails).map(|p| p.index))
            .collect::<Result<Vec<_>>>()?
    } else {
        argmax_rows(&out.logits)
    };
    let mut names: Vec<String> = known.iter().map(|c| c.name().to_string()).collect();
    names.push(UNKNOWN_NAME.to_string());
    Ok(Predictions {
        preds,
        labels,
        snrs: file.frames.iter().map(|f| f.snr_db).collect(),
        names,
        open: true,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    /// Class of the frame (may lie outside the model's classes).
    pub truth: ModulationType,
    /// Index into the model's classes.
    pub pred: usize,
}

/// Two-dimensional features of every frame; the model must have the
/// visualization layer.
pub fn export_features(
    model: &DcLstmModel,
    classes: &[ModulationType],
    file: &FrameFile,
    opts: RepresentOptions,
) -> Result<Vec<FeaturePoint>> {
    check_model(model, classes)?;
    if !model.arch.visualization {
        return Err(Error::invalid("model has no 2-neuron visualization layer"));
    }
    let out = forward_file(model, file, opts)?;
    let preds = argmax_rows(&out.logits);
    Ok(file
        .frames
        .iter()
        .enumerate()
        .map(|(r, f)| FeaturePoint {
            x: out.features.get(r, 0),
            y: out.features.get(r, 1),
            truth: f.label,
            pred: preds[r],
        })
        .collect())
}

pub fn features_to_csv(points: &[FeaturePoint], classes: &[ModulationType]) -> String {
    let mut s = String::from("x,y,true,pred\n");
    for p in points {
        let _ = writeln!(s, "{:e},{:e},{},{}", p.x, p.y, p.truth, classes[p.pred]);
    }
    s
}

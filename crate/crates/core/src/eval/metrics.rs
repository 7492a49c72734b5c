use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::siggen::snr_key;

fn check(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    Ok(())
}

/// Fraction of exact matches. Open-set callers encode every class outside
/// the known set, and the unknown prediction, as the same extra index.
pub fn mean_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean over classes present in `labels` of per-class accuracy.
pub fn macro_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check(preds, labels)?;
    let n = labels.iter().max().map_or(0, |m| m + 1);
    let mut hits = vec![0usize; n];
    let mut counts = vec![0usize; n];
    for (&p, &l) in preds.iter().zip(labels) {
        counts[l] += 1;
        hits[l] += usize::from(p == l);
    }
    let present: Vec<f64> = hits
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&h, &c)| h as f64 / c as f64)
        .collect();
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnrRow {
    pub snr_db: f64,
    pub correct: usize,
    pub count: usize,
}

impl SnrRow {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.count as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnrTable {
    /// One row per distinct SNR tag, ascending.
    pub rows: Vec<SnrRow>,
}

impl SnrTable {
    /// Accuracy pooled over bins at or above 0 dB; `None` without such bins.
    pub fn nonnegative_accuracy(&self) -> Option<f64> {
        let (c, n) = self
            .rows
            .iter()
            .filter(|r| r.snr_db >= 0.0)
            .fold((0, 0), |(c, n), r| (c + r.correct, n + r.count));
        (n > 0).then(|| c as f64 / n as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("snr_db,accuracy,count\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{}", r.snr_db, r.accuracy(), r.count);
        }
        s
    }
}

/// Accuracy per SNR tag.
pub fn accuracy_per_snr(preds: &[usize], labels: &[usize], snrs: &[f32]) -> Result<SnrTable> {
    check(preds, labels)?;
    if snrs.len() != preds.len() {
        return Err(Error::invalid("one SNR tag per prediction required"));
    }
    let mut bins: std::collections::BTreeMap<i64, SnrRow> = Default::default();
    for ((&p, &l), &s) in preds.iter().zip(labels).zip(snrs) {
        let row = bins.entry(snr_key(s as f64)).or_insert(SnrRow {
            snr_db: s as f64,
            correct: 0,
            count: 0,
        });
        row.count += 1;
        row.correct += usize::from(p == l);
    }
    Ok(SnrTable {
        rows: bins.into_values().collect(),
    })
}

/// Square count matrix, rows are true labels and columns predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Confusion {
    pub size: usize,
    pub counts: Vec<usize>,
}

impl Confusion {
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.counts[row * self.size + col]
    }

    pub fn trace(&self) -> usize {
        (0..self.size).map(|i| self.get(i, i)).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.counts[row * self.size..(row + 1) * self.size].iter().sum()
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut s = String::from("row,col,count\n");
        for r in 0..self.size {
            for c in 0..self.size {
                let _ = writeln!(s, "{},{},{}", names[r], names[c], self.get(r, c));
            }
        }
        s
    }
}

/// `size` is `N` for close-set and `N + 1` (unknown last) for open-set use.
pub fn confusion(preds: &[usize], labels: &[usize], size: usize) -> Result<Confusion> {
    check(preds, labels)?;
    let mut counts = vec![0usize; size * size];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= size || l >= size {
            return Err(Error::invalid(format!("label {} or prediction {} outside {size} classes", l, p)));
        }
        counts[l * size + p] += 1;
    }
    Ok(Confusion { size, counts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassRow {
    pub name: String,
    pub correct: usize,
    pub count: usize,
}

/// Everything reported for one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    pub macro_accuracy: f64,
    pub per_class: Vec<ClassRow>,
    pub per_snr: SnrTable,
    pub confusion: Confusion,
    /// Row/column names of the confusion matrix.
    pub names: Vec<String>,
    /// Recall of the unknown row, open-set only.
    pub unknown_recall: Option<f64>,
}

impl EvalReport {
    /// `names` has one entry per confusion row; in open-set mode the last
    /// one is the unknown class.
    pub fn build(preds: &[usize], labels: &[usize], snrs: &[f32], names: Vec<String>, open: bool) -> Result<Self> {
        let size = names.len();
        let confusion = confusion(preds, labels, size)?;
        let per_class = (0..size)
            .map(|i| ClassRow {
                name: names[i].clone(),
                correct: confusion.get(i, i),
                count: confusion.row_sum(i),
            })
            .collect::<Vec<_>>();
        let unknown_recall = if open {
            let u = &per_class[size - 1];
            (u.count > 0).then(|| u.correct as f64 / u.count as f64)
        } else {
            None
        };
        Ok(EvalReport {
            mean_accuracy: mean_accuracy(preds, labels)?,
            macro_accuracy: macro_accuracy(preds, labels)?,
            per_class,
            per_snr: accuracy_per_snr(preds, labels, snrs)?,
            confusion,
            names,
            unknown_recall,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "mean_accuracy,{:.6}", self.mean_accuracy);
        let _ = writeln!(s, "macro_accuracy,{:.6}", self.macro_accuracy);
        if let Some(a) = self.per_snr.nonnegative_accuracy() {
            let _ = writeln!(s, "accuracy_snr_ge_0db,{a:.6}");
        }
        if let Some(u) = self.unknown_recall {
            let _ = writeln!(s, "unknown_recall,{u:.6}");
        }
        let _ = writeln!(s, "examples,{}", self.confusion.total());
        for c in &self.per_class {
            if c.count > 0 {
                let _ = writeln!(s, "accuracy_{},{:.6}", c.name, c.correct as f64 / c.count as f64);
            }
        }
        s
    }
}

use crate::error::{Error, Result};

/// Outcome of a central-difference gradient comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |analytic_i − numeric_i| / max(|analytic_i|, |numeric_i|, 1e-12)`.
    pub max_rel_error: f64,
    /// Coordinate attaining the maximum.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Compares `analytic` against fourth-order central differences of `f`
/// around `point`.
pub fn finite_diff_check<F>(
    f: F,
    point: &[f64],
    analytic: &[f64],
    step: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> f64,
{
    if point.len() != analytic.len() {
        return Err(Error::invalid(format!(
            "gradient check: {} coordinates but {} analytic entries",
            point.len(),
            analytic.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::invalid("gradient check step must be positive"));
    }
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..x.len() {
        let orig = x[i];
        let mut eval = |delta: f64| {
            x[i] = orig + delta;
            let v = f(&x);
            x[i] = orig;
            v
        };
        let (p2, p1, m1, m2) = (eval(2.0 * step), eval(step), eval(-step), eval(-2.0 * step));
        if ![p2, p1, m1, m2].iter().all(|v| v.is_finite()) {
            return Err(Error::numeric("gradient check: non-finite f", Some(i)));
        }
        let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-12);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: i,
                analytic: a,
                numeric,
            };
        }
    }
    Ok(report)
}

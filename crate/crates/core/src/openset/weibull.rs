use crate::error::{Error, Result};

fn check_params(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("Weibull parameters must be positive and finite (a={a}, b={b})")));
    }
    Ok(())
}

/// `P(X ≤ x)` for scale `a`, shape `b`.
pub fn weibull_cdf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_params(a, b)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(-(-(x / a).powf(b)).exp_m1())
}

/// Survival function `P(X > x)`.
pub fn weibull_invf(x: f64, a: f64, b: f64) -> Result<f64> {
    check_params(a, b)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok((-(x / a).powf(b)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeibullFit {
    pub a: f64,
    pub b: f64,
    pub loglik: f64,
    pub iterations: usize,
}

pub const MIN_FIT_SAMPLES: usize = 10;
const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;

/// Profile-likelihood score for the shape on data scaled into `(0, 1]`,
/// with its derivative.
fn shape_score(y: &[f64], ln_y: &[f64], mean_ln: f64, b: f64) -> (f64, f64) {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&v, &l) in y.iter().zip(ln_y) {
        let w = v.powf(b);
        s0 += w;
        s1 += w * l;
        s2 += w * l * l;
    }
    let r = s1 / s0;
    let g = r - 1.0 / b - mean_ln;
    let dg = s2 / s0 - r * r + 1.0 / (b * b);
    (g, dg)
}

/// Maximum-likelihood `(a, b)` by Newton iteration on the shape, started
/// from a moment estimate.
pub fn fit_weibull(samples: &[f64]) -> Result<WeibullFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(i) = samples.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::invalid(format!("sample {i} ({}) is not positive and finite", samples[i])));
    }
    let max = samples.iter().cloned().fold(0.0, f64::max);
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == max {
        return Err(Error::Fit(format!(
            "all {} samples equal {max}; the shape is unbounded",
            samples.len()
        )));
    }
    let n = samples.len() as f64;
    let y: Vec<f64> = samples.iter().map(|&x| x / max).collect();
    let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean_ln = ln_y.iter().sum::<f64>() / n;

    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let cv = var.sqrt() / mean;
    let mut b = cv.powf(-1.086).clamp(1e-3, 1e3);

    let mut iterations = 0;
    let mut converged = false;
    let mut last_step = f64::NAN;
    while iterations < MAX_ITER {
        iterations += 1;
        let (g, dg) = shape_score(&y, &ln_y, mean_ln, b);
        if !(g.is_finite() && dg.is_finite() && dg > 0.0) {
            return Err(Error::Fit(format!(
                "Newton iteration broke down at b={b} (score {g}, slope {dg}) after {iterations} iterations"
            )));
        }
        let mut next = b - g / dg;
        // The score is increasing in b; halve toward zero rather than step
        // past it.
        if next <= 0.0 {
            next = b / 2.0;
        }
        last_step = (next - b).abs();
        b = next;
        if last_step < TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "shape did not converge in {MAX_ITER} iterations (b={b}, last step {last_step:e})"
        )));
    }
    let scaled_a = (y.iter().map(|v| v.powf(b)).sum::<f64>() / n).powf(1.0 / b);
    let a = scaled_a * max;
    let loglik = samples
        .iter()
        .map(|&x| {
            let z = x / a;
            b.ln() - a.ln() + (b - 1.0) * z.ln() - z.powf(b)
        })
        .sum();
    Ok(WeibullFit {
        a,
        b,
        loglik,
        iterations,
    })
}

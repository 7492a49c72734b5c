use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn for_matrix(m: &Matrix) -> Self {
        AdamState::new(m.len())
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Nothing is modified when an error is returned.
pub fn adam_step(
    params: &mut Matrix,
    grads: &Matrix,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.shape() != grads.shape() {
        return Err(Error::invalid(format!(
            "adam: parameter shape {:?} vs gradient shape {:?}",
            params.shape(),
            grads.shape()
        )));
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::invalid(format!(
            "adam: state holds {} moments for {} parameters",
            state.m.len(),
            params.len()
        )));
    }
    if let Some(i) = grads.as_slice().iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric("adam: non-finite gradient", Some(i)));
    }

    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    let p = params.as_mut_slice();
    for (i, pi) in p.iter_mut().enumerate() {
        let g = grads.as_slice()[i];
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        *pi -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = Matrix::from_vec(1, 3, vec![1.0, -2.0, 3.5]).unwrap();
        let g = Matrix::zeros(1, 3);
        let mut s = AdamState::for_matrix(&p);
        s.t = 17;
        adam_step(&mut p, &g, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p.as_slice(), &[1.0, -2.0, 3.5]);
        assert!(s.m.iter().chain(&s.v).all(|&x| x == 0.0));
        assert_eq!(s.t, 18);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(1);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &scalar(5.0), &mut s, &cfg).unwrap();
        // m̂ = g and v̂ = g² after bias correction.
        let expected = -0.01 * 5.0 / (5.0 + cfg.eps);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.get(0, 0).abs() - 0.01).abs() < 1e-9);
    }

    #[test]
    fn two_constant_steps_match_unrolled_recursion() {
        let cfg = AdamConfig::default();
        let mut p = scalar(0.5);
        let mut s = AdamState::new(1);
        adam_step(&mut p, &scalar(1.0), &mut s, &cfg).unwrap();
        adam_step(&mut p, &scalar(1.0), &mut s, &cfg).unwrap();

        // Hand-unrolled: m1 = 0.1, v1 = 0.001, m2 = 0.19, v2 = 0.001999.
        let m1: f64 = 0.1;
        let v1: f64 = 0.001;
        let p1 = 0.5 - 0.01 * (m1 / 0.1) / ((v1 / 0.001).sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 0.1;
        let v2 = 0.999 * v1 + 0.001;
        let p2 = p1
            - 0.01 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64 * 0.999)).sqrt() + 1e-8);
        assert!((p.get(0, 0) - p2).abs() < 1e-15, "{} vs {p2}", p.get(0, 0));
        assert!((p2 - (0.5 - 0.02 / (1.0 + 1e-8))).abs() < 1e-12);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn shape_mismatch_and_non_finite_rejected() {
        let mut p = Matrix::zeros(2, 2);
        let mut s = AdamState::for_matrix(&p);
        let cfg = AdamConfig::default();
        assert!(matches!(
            adam_step(&mut p, &Matrix::zeros(1, 4), &mut s, &cfg),
            Err(Error::InvalidArgument(_))
        ));
        let g = Matrix::from_raw(2, 2, vec![0.0, 0.0, f64::INFINITY, 0.0]);
        match adam_step(&mut p, &g, &mut s, &cfg) {
            Err(Error::Numeric { index, .. }) => assert_eq!(index, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(s.t, 0);
    }
}

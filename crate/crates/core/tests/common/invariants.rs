//! Checks shared by the property tests and the acceptance runner.

use dclstm::numcore::Rng;
use dclstm::openset::recalibrate_with_survival;
use dclstm::represent::{normalize_frame, RepresentOptions};
use dclstm::siggen::SignalFrame;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, Default)]
pub struct RepresentationErrors {
    /// |mean(I² + Q²) − 1|
    pub rms: f64,
    /// Largest |P| found; must not exceed 1.
    pub max_phase: f64,
    /// Largest |A − hypot(I, Q)|.
    pub amplitude: f64,
    /// Largest elementwise change after scaling the frame by `k > 0`.
    pub scale: f64,
}

impl RepresentationErrors {
    pub fn worst(self, other: Self) -> Self {
        RepresentationErrors {
            rms: self.rms.max(other.rms),
            max_phase: self.max_phase.max(other.max_phase),
            amplitude: self.amplitude.max(other.amplitude),
            scale: self.scale.max(other.scale),
        }
    }
}

pub fn representation_errors(frame: &SignalFrame, k: f64) -> RepresentationErrors {
    let opts = RepresentOptions::default();
    let rep = normalize_frame(frame, opts).unwrap();
    let t = rep.len();
    let mut power = 0.0;
    let mut max_phase: f64 = 0.0;
    let mut amplitude: f64 = 0.0;
    for r in 0..t {
        let (i, q) = (rep.v1.get(r, 0), rep.v1.get(r, 1));
        power += i * i + q * q;
        amplitude = amplitude.max((rep.v2.get(r, 0) - i.hypot(q)).abs());
        max_phase = max_phase.max(rep.v2.get(r, 1).abs());
    }
    let scaled = SignalFrame {
        samples: frame.samples.iter().map(|z| z * k).collect(),
        ..frame.clone()
    };
    let rep_k = normalize_frame(&scaled, opts).unwrap();
    let diff = |a: &dclstm::numcore::Matrix, b: &dclstm::numcore::Matrix| {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    RepresentationErrors {
        rms: (power / t as f64 - 1.0).abs(),
        max_phase,
        amplitude,
        scale: diff(&rep.v1, &rep_k.v1).max(diff(&rep.v2, &rep_k.v2)),
    }
}

/// Random logits and per-class survival values for N known classes.
pub fn recalibration_fixture(rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let n = 2 + rng.below(9) as usize;
    let logits = (0..n).map(|_| rng.uniform_range(-20.0, 20.0)).collect();
    let survival = (0..n).map(|_| rng.uniform()).collect();
    (logits, survival)
}

/// (|Σv̂ − Σv|, |ΣP̂ − 1|) for one fixture.
pub fn conservation_errors(logits: &[f64], survival: &[f64]) -> (f64, f64) {
    let p = recalibrate_with_survival(logits, survival).unwrap();
    assert_eq!(p.activations.len(), logits.len() + 1);
    let before: f64 = logits.iter().sum();
    let after: f64 = p.activations.iter().sum();
    let total: f64 = p.probabilities.iter().sum();
    ((after - before).abs(), (total - 1.0).abs())
}

/// Two known classes with logits (2, -1) and survival (0.5, 0.9). The
/// positive logit halves, the negative one is untouched and the unknown
/// activation receives the removed 1, giving v̂ = (1, -1, 1).
///
/// Returns (expected probabilities, produced probabilities).
pub fn two_class_case() -> ([f64; 3], Vec<f64>) {
    let e = 1.0f64.exp();
    let z = 2.0 * e + (-1.0f64).exp();
    let expected = [e / z, (-1.0f64).exp() / z, e / z];
    let p = recalibrate_with_survival(&[2.0, -1.0], &[0.5, 0.9]).unwrap();
    (expected, p.probabilities)
}

pub fn random_frame(rng: &mut Rng, t: usize) -> SignalFrame {
    SignalFrame {
        id: 0,
        label: dclstm::siggen::ModulationType::Bpsk,
        snr_db: 0.0,
        samples: (0..t).map(|_| Complex64::new(rng.normal(), rng.normal())).collect(),
    }
}

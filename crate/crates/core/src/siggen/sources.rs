//! Noise-free baseband synthesis per modulation class.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::shaping::{convolve, filter_same, gaussian, hilbert, lowpass, root_raised_cosine};
use super::ModulationType;
use crate::numcore::Rng;

pub(crate) const RRC_ROLLOFF: f64 = 0.35;
pub(crate) const RRC_SPAN: usize = 8;
pub(crate) const GFSK_BT: f64 = 0.3;
pub(crate) const GFSK_SPAN: usize = 4;
pub(crate) const FSK_INDEX: f64 = 0.5;
pub(crate) const MESSAGE_CUTOFF: f64 = 0.125;
pub(crate) const MESSAGE_TAPS: usize = 65;
pub(crate) const AM_DEPTH: f64 = 0.5;
pub(crate) const FM_DEVIATION: f64 = 0.25;
const HILBERT_TAPS: usize = 65;

/// `len` baseband samples for `modulation` (unnormalized power).
pub(crate) fn baseband(modulation: ModulationType, len: usize, sps: usize, rng: &mut Rng) -> Vec<Complex64> {
    match modulation {
        ModulationType::Gfsk => fsk(len, sps, Some(GFSK_BT), rng),
        ModulationType::Cpfsk => fsk(len, sps, None, rng),
        ModulationType::AmDsb => {
            let m = message(len, rng);
            m.iter().map(|&v| Complex64::new(1.0 + AM_DEPTH * v, 0.0)).collect()
        }
        ModulationType::AmSsb => {
            // Upper sideband: m + j·H{m}, computed on a padded record.
            let pad = HILBERT_TAPS;
            let m = message(len + 2 * pad, rng);
            let h = filter_same(&m, &hilbert(HILBERT_TAPS));
            (pad..pad + len).map(|n| Complex64::new(m[n], h[n])).collect()
        }
        ModulationType::Wbfm => {
            let m = message(len, rng);
            let mut phase = rng.uniform_range(0.0, 2.0 * PI);
            m.iter()
                .map(|&v| {
                    phase += 2.0 * PI * FM_DEVIATION * v;
                    Complex64::from_polar(1.0, phase)
                })
                .collect()
        }
        linear => {
            let points = linear
                .constellation()
                .expect("every non-FSK digital class has a constellation");
            linear_modulated(&points, len, sps, rng)
        }
    }
}

fn linear_modulated(points: &[Complex64], len: usize, sps: usize, rng: &mut Rng) -> Vec<Complex64> {
    let taps = root_raised_cosine(RRC_ROLLOFF, sps, RRC_SPAN);
    let n_sym = len.div_ceil(sps) + 2 * RRC_SPAN + 2;
    let mut up = vec![Complex64::new(0.0, 0.0); n_sym * sps];
    for k in 0..n_sym {
        up[k * sps] = points[rng.below(points.len() as u64) as usize];
    }
    let shaped = convolve(&up, &taps);
    let start = RRC_SPAN * sps + rng.below(sps as u64) as usize;
    shaped[start..start + len].to_vec()
}

/// Binary continuous-phase FSK; `bt` selects a Gaussian frequency pulse.
fn fsk(len: usize, sps: usize, bt: Option<f64>, rng: &mut Rng) -> Vec<Complex64> {
    let settle = GFSK_SPAN * sps;
    let n_sym = (len + 2 * settle).div_ceil(sps) + 1;
    let mut freq = Vec::with_capacity(n_sym * sps);
    for _ in 0..n_sym {
        let bit = if rng.below(2) == 0 { -1.0 } else { 1.0 };
        freq.extend(std::iter::repeat_n(bit, sps));
    }
    if let Some(bt) = bt {
        freq = filter_same(&freq, &gaussian(bt, sps, GFSK_SPAN));
    }
    let offset = settle + rng.below(sps as u64) as usize;
    let step = PI * FSK_INDEX / sps as f64;
    let mut phase = rng.uniform_range(0.0, 2.0 * PI);
    freq[offset..offset + len]
        .iter()
        .map(|&f| {
            phase += step * f;
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// Band-limited Gaussian message scaled to unit peak.
fn message(len: usize, rng: &mut Rng) -> Vec<f64> {
    let pad = MESSAGE_TAPS;
    let raw: Vec<f64> = (0..len + 2 * pad).map(|_| rng.normal()).collect();
    let filtered = filter_same(&raw, &lowpass(MESSAGE_CUTOFF, MESSAGE_TAPS));
    let m = &filtered[pad..pad + len];
    let peak = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        m.iter().map(|v| v / peak).collect()
    } else {
        m.to_vec()
    }
}

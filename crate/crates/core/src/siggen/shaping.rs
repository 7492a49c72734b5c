//! FIR filters used by the generator.

use std::f64::consts::PI;

/// Root-raised-cosine taps (unit energy), `span` symbols long.
pub fn root_raised_cosine(rolloff: f64, sps: usize, span: usize) -> Vec<f64> {
    let n = span * sps + 1;
    let mid = (n / 2) as f64;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - mid) / sps as f64;
            rrc_value(t, rolloff)
        })
        .collect();
    let energy = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= energy);
    taps
}

fn rrc_value(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-12 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Gaussian frequency-pulse filter with bandwidth-time product `bt`,
/// normalized to unit DC gain.
pub fn gaussian(bt: f64, sps: usize, span: usize) -> Vec<f64> {
    let n = span * sps + 1;
    let mid = (n / 2) as f64;
    let ln2 = 2f64.ln();
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - mid) / sps as f64;
            (-2.0 * PI * PI * bt * bt * t * t / ln2).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

/// Hamming-windowed sinc low-pass with `cutoff` in cycles/sample, unit DC gain.
pub fn lowpass(cutoff: f64, taps: usize) -> Vec<f64> {
    let mid = (taps / 2) as f64;
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let k = i as f64 - mid;
            let sinc = if k == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * k).sin() / (PI * k)
            };
            sinc * hamming(i, taps)
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Odd-length Hamming-windowed Hilbert transformer.
pub fn hilbert(taps: usize) -> Vec<f64> {
    let mid = (taps / 2) as isize;
    (0..taps)
        .map(|i| {
            let k = i as isize - mid;
            if k % 2 == 0 {
                0.0
            } else {
                2.0 / (PI * k as f64) * hamming(i, taps)
            }
        })
        .collect()
}

fn hamming(i: usize, n: usize) -> f64 {
    0.54 - 0.46 * (2.0 * PI * i as f64 / (n as f64 - 1.0)).cos()
}

/// Full linear convolution, length `x.len() + h.len() - 1`.
pub fn convolve<T>(x: &[T], h: &[f64]) -> Vec<T>
where
    T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
{
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![T::default(); x.len() + h.len() - 1];
    for (i, &xv) in x.iter().enumerate() {
        for (j, &hv) in h.iter().enumerate() {
            y[i + j] += xv * hv;
        }
    }
    y
}

/// "Same"-length convolution centred on the filter midpoint.
pub fn filter_same<T>(x: &[T], h: &[f64]) -> Vec<T>
where
    T: Copy + Default + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
{
    let full = convolve(x, h);
    let delay = h.len() / 2;
    full[delay..delay + x.len()].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rrc_is_symmetric_unit_energy() {
        let h = root_raised_cosine(0.35, 4, 8);
        assert_eq!(h.len(), 33);
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-12);
        }
        let e: f64 = h.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rrc_squared_is_nyquist() {
        // RRC ⊛ RRC ≈ raised cosine: near-zero at non-zero symbol instants.
        let h = root_raised_cosine(0.35, 4, 8);
        let rc = convolve(&h, &h);
        let mid = rc.len() / 2;
        for k in 1..4 {
            assert!(rc[mid + 4 * k].abs() < 0.02 * rc[mid], "lag {k}: {}", rc[mid + 4 * k]);
        }
    }

    #[test]
    fn gaussian_and_lowpass_have_unit_gain() {
        assert!((gaussian(0.3, 4, 4).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((lowpass(0.125, 65).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hilbert_is_antisymmetric() {
        let h = hilbert(31);
        for i in 0..31 {
            assert!((h[i] + h[30 - i]).abs() < 1e-12);
        }
    }
}

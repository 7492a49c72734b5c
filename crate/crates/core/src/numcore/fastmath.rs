//! Branch-free `exp`, logistic and `tanh` over slices. Written so the
//! compiler can vectorize the loops; accuracy is within a few ulp of libm.

use std::f64::consts::LOG2_E;

const ROUND: f64 = 6755399441055744.0; // 1.5 · 2^52
#[allow(clippy::excessive_precision)]
const LN2_HI: f64 = 6.93147180369123816490e-01;
#[allow(clippy::excessive_precision)]
const LN2_LO: f64 = 1.90821492927058770002e-10;

/// `e^x` for `x` clamped to `[-708, 709]`.
#[inline(always)]
pub fn exp(x: f64) -> f64 {
    let x = x.clamp(-708.0, 709.0);
    let t = x * LOG2_E + ROUND;
    let n = t - ROUND;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // Taylor series to degree 13 on |r| <= ln2/2.
    let mut p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let k = (t.to_bits() as i64).wrapping_sub(ROUND.to_bits() as i64);
    p * f64::from_bits(((k + 1023) << 52) as u64)
}

#[inline(always)]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

/// `tanh(x) = 2σ(2x) − 1`; absolute error stays near `1e-16`.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    2.0 / (1.0 + exp(-2.0 * x)) - 1.0
}

macro_rules! slice_kernel {
    ($name:ident, $wide:ident, $f:ident) => {
        pub fn $name(xs: &mut [f64]) {
            #[cfg(target_arch = "x86_64")]
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports AVX2.
                return unsafe { $wide(xs) };
            }
            xs.iter_mut().for_each(|v| *v = $f(*v));
        }

        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn $wide(xs: &mut [f64]) {
            xs.iter_mut().for_each(|v| *v = $f(*v));
        }
    };
}

slice_kernel!(sigmoid_in_place, sigmoid_avx2, sigmoid);
slice_kernel!(tanh_in_place, tanh_avx2, tanh);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_libm() {
        let mut worst: f64 = 0.0;
        for i in -69_000..=69_000 {
            let x = i as f64 * 0.01013;
            let rel = (exp(x) - x.exp()).abs() / x.exp();
            worst = worst.max(rel);
        }
        assert!(worst < 1e-15, "{worst}");
    }

    #[test]
    fn exp_saturates_without_nan() {
        assert!(exp(1e4).is_finite());
        assert!(exp(-1e4) >= 0.0 && exp(-1e4) < 1e-300);
        assert_eq!(exp(0.0), 1.0);
    }

    #[test]
    fn activations_match_libm() {
        for i in -4000..=4000 {
            let x = i as f64 * 0.01;
            assert!((tanh(x) - x.tanh()).abs() < 1e-15, "tanh {x}");
            let s = 1.0 / (1.0 + (-x).exp());
            assert!((sigmoid(x) - s).abs() < 1e-15, "sigmoid {x}");
        }
        assert_eq!(tanh(1e6), 1.0);
        assert_eq!(tanh(-1e6), -1.0);
        assert!(sigmoid(-1e6) < 1e-300);
    }
}

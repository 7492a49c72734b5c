use super::{Matrix, Rng};
use crate::error::{Error, Result};

/// Glorot/Xavier uniform initialization: entries drawn from `[-L, L]` with
/// `L = sqrt(6 / (rows + cols))`.
pub fn xavier_init(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "xavier_init needs non-zero dimensions, got {rows}x{cols}"
        )));
    }
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform_range(-limit, limit))
        .collect();
    Ok(Matrix::from_raw(rows, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_three_is_bounded_by_one() {
        let m = xavier_init(3, 3, &mut Rng::new(11, 0)).unwrap();
        assert!(m.as_slice().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn deterministic_for_seed_and_stream() {
        let a = xavier_init(5, 7, &mut Rng::new(5, 2)).unwrap();
        let b = xavier_init(5, 7, &mut Rng::new(5, 2)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            xavier_init(0, 4, &mut Rng::new(0, 0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mean_within_standard_error_bound() {
        // Uniform on [-L, L] has variance L²/3; 10 draws of 4096 entries.
        let limit = (6.0f64 / 128.0).sqrt();
        let mut rng = Rng::new(2024, 0);
        for _ in 0..10 {
            let m = xavier_init(64, 64, &mut rng).unwrap();
            let mean = m.as_slice().iter().sum::<f64>() / 4096.0;
            let bound = 3.0 * limit / (3.0f64 * 4096.0).sqrt();
            assert!(mean.abs() < bound, "mean {mean} outside {bound}");
            assert!(m.as_slice().iter().all(|v| v.abs() <= limit));
        }
    }
}

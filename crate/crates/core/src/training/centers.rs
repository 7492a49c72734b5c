use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// One feature-space center per class, moved toward the batch features
/// after every mini-batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCenters {
    pub centers: Matrix,
    pub alpha: f64,
}

impl ClassCenters {
    /// Zero-initialized centers.
    pub fn new(classes: usize, dim: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("center update rate {alpha} outside [0, 1]")));
        }
        Ok(ClassCenters {
            centers: Matrix::zeros(classes, dim),
            alpha,
        })
    }

    pub fn classes(&self) -> usize {
        self.centers.rows()
    }

    pub fn dim(&self) -> usize {
        self.centers.cols()
    }

    /// `Δc_j = Σ_{y_i = j} (c_j − x_i) / (1 + n_j)`, `c_j ← c_j − α·Δc_j`.
    /// Classes absent from the batch are left untouched.
    pub fn update(&mut self, features: &Matrix, labels: &[usize]) -> Result<()> {
        if features.rows() != labels.len() || features.cols() != self.dim() {
            return Err(Error::invalid("center update: feature/label shape mismatch"));
        }
        let (n, d) = self.centers.shape();
        if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
            return Err(Error::invalid(format!("label {bad} out of range for {n} centers")));
        }
        let mut delta = Matrix::zeros(n, d);
        let mut counts = vec![0usize; n];
        for (r, &y) in labels.iter().enumerate() {
            counts[y] += 1;
            let c = self.centers.row(y).to_vec();
            for (k, dv) in delta.row_mut(y).iter_mut().enumerate() {
                *dv += c[k] - features.get(r, k);
            }
        }
        for j in (0..n).filter(|&j| counts[j] > 0) {
            let denom = 1.0 + counts[j] as f64;
            let alpha = self.alpha;
            let dj = delta.row(j).to_vec();
            for (cv, dv) in self.centers.row_mut(j).iter_mut().zip(dj) {
                *cv -= alpha * dv / denom;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity() {
        let mut c = ClassCenters::new(2, 2, 0.0).unwrap();
        c.centers = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let before = c.clone();
        c.update(&Matrix::from_vec(1, 2, vec![9.0, 9.0]).unwrap(), &[1]).unwrap();
        assert_eq!(c, before);
    }

    #[test]
    fn single_example_moves_to_quarter() {
        let mut c = ClassCenters::new(3, 2, 0.5).unwrap();
        c.update(&Matrix::from_vec(1, 2, vec![4.0, -8.0]).unwrap(), &[1]).unwrap();
        assert_eq!(c.centers.row(1), &[1.0, -2.0]);
    }

    #[test]
    fn absent_class_bitwise_unchanged() {
        let mut c = ClassCenters::new(3, 1, 0.5).unwrap();
        c.centers = Matrix::from_vec(3, 1, vec![0.1, 0.2, 0.3]).unwrap();
        c.update(&Matrix::from_vec(2, 1, vec![5.0, 6.0]).unwrap(), &[0, 1]).unwrap();
        assert_eq!(c.centers.get(2, 0).to_bits(), 0.3f64.to_bits());
    }

    #[test]
    fn rate_outside_unit_interval_rejected() {
        assert!(ClassCenters::new(2, 2, 1.5).is_err());
    }
}

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite matrix entry", Some(i)));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Same as [`Matrix::from_vec`] without the finiteness scan; used on hot
    /// paths where the data is produced by finite arithmetic.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn zeros_like(&self) -> Self {
        Matrix::zeros(self.rows, self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul shape mismatch {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_nn(&self.data, &other.data, &mut out.data, self.rows, self.cols, other.cols);
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

const MR: usize = 4;
const NR: usize = 8;

/// Accumulates `R` rows of `c += a·b`: `packed[p][r]` is the coefficient
/// of row `p` of `b` for output row `r`. An `R × NR` tile of `c` stays in
/// registers across the whole reduction.
#[inline(always)]
fn tile_rows<const R: usize>(packed: &[[f64; R]], b: &[f64], c_rows: &mut [f64], n: usize) {
    let mut j = 0;
    while j + NR <= n {
        let mut acc = [[0.0; NR]; R];
        for (r, row) in acc.iter_mut().enumerate() {
            row.copy_from_slice(&c_rows[r * n + j..r * n + j + NR]);
        }
        for (ap, b_row) in packed.iter().zip(b.chunks_exact(n)) {
            let bv: &[f64; NR] = b_row[j..j + NR].try_into().unwrap();
            for (row, &av) in acc.iter_mut().zip(ap) {
                for (x, &y) in row.iter_mut().zip(bv) {
                    *x += av * y;
                }
            }
        }
        for (r, row) in acc.iter().enumerate() {
            c_rows[r * n + j..r * n + j + NR].copy_from_slice(row);
        }
        j += NR;
    }
    if j < n {
        for (ap, b_row) in packed.iter().zip(b.chunks_exact(n)) {
            for (r, &av) in ap.iter().enumerate() {
                for (x, &y) in c_rows[r * n + j..(r + 1) * n].iter_mut().zip(&b_row[j..]) {
                    *x += av * y;
                }
            }
        }
    }
}

/// `c[m×n] += a[m×k] · b[k×n]`, all row-major.
///
/// Every output element accumulates over `k` in ascending order regardless
/// of `m`, so a row's result does not depend on which other rows share the
/// call.
pub fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { gemm_nn_avx2(a, b, c, m, k, n) };
    }
    gemm_nn_impl(a, b, c, m, k, n)
}

// The wide variants differ only in instruction selection; without fused
// multiply-add the arithmetic, and hence every result bit, is unchanged.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_nn_avx2(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_nn_impl(a, b, c, m, k, n)
}

#[inline(always)]
fn gemm_nn_impl(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let mut packed = Vec::with_capacity(k);
    let mut i = 0;
    while i + MR <= m {
        packed.clear();
        packed.resize(k, [0.0; MR]);
        for (r, a_row) in a[i * k..(i + MR) * k].chunks_exact(k).enumerate() {
            for (dst, &v) in packed.iter_mut().zip(a_row) {
                dst[r] = v;
            }
        }
        tile_rows::<MR>(&packed, b, &mut c[i * n..(i + MR) * n], n);
        i += MR;
    }
    let mut single = Vec::with_capacity(k);
    for i in i..m {
        single.clear();
        single.extend(a[i * k..(i + 1) * k].iter().map(|&v| [v]));
        tile_rows::<1>(&single, b, &mut c[i * n..(i + 1) * n], n);
    }
}

/// `c[k×n] += a[m×k]ᵀ · b[m×n]`, all row-major. Accumulation runs over
/// `m` in ascending order.
pub fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), m * n);
    assert_eq!(c.len(), k * n);
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { gemm_tn_avx2(a, b, c, m, k, n) };
    }
    gemm_tn_impl(a, b, c, m, k, n)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_tn_avx2(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_tn_impl(a, b, c, m, k, n)
}

#[inline(always)]
fn gemm_tn_impl(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let mut packed = Vec::with_capacity(m);
    let mut p = 0;
    while p + MR <= k {
        packed.clear();
        packed.extend(a.chunks_exact(k).map(|row| std::array::from_fn::<f64, MR, _>(|r| row[p + r])));
        tile_rows::<MR>(&packed, b, &mut c[p * n..(p + MR) * n], n);
        p += MR;
    }
    let mut single = Vec::with_capacity(m);
    for p in p..k {
        single.clear();
        single.extend(a.chunks_exact(k).map(|row| [row[p]]));
        tile_rows::<1>(&single, b, &mut c[p * n..(p + 1) * n], n);
    }
}

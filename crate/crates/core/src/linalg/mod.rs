//! Sparse storage and a banded direct solver.
//!
//! Finite-element matrices on structured and masked-grid meshes have a
//! bandwidth of roughly one grid row, so an unpivoted banded LU is both
//! simple and fast. Skipping pivoting is safe for matrices whose symmetric
//! part is positive definite; a non-positive pivot signals a form that is
//! not coercive.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("non-positive pivot {value:e} at row {index}")]
    NonPositivePivot { index: usize, value: f64 },
    #[error("matrix is numerically singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < rows && j < cols);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix::from_triplets(rows, cols, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row i as (col, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.rows).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    /// Largest |aᵢⱼ − aⱼᵢ|.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rows and columns selected by index maps (`usize::MAX` drops an index).
    pub fn submatrix(&self, row_map: &[usize], col_map: &[usize], rows: usize, cols: usize) -> Self {
        let mut t = Vec::new();
        for (i, &ri) in row_map.iter().enumerate().take(self.rows) {
            if ri == usize::MAX {
                continue;
            }
            for (j, v) in self.row(i) {
                let cj = col_map[j];
                if cj != usize::MAX {
                    t.push((ri, cj, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows, cols, t)
    }

    /// Largest |i − j| below and above the diagonal over stored entries.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut lo, mut hi) = (0, 0);
        for i in 0..self.rows {
            for (j, _) in self.row(i) {
                if j < i {
                    lo = lo.max(i - j);
                } else {
                    hi = hi.max(j - i);
                }
            }
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// In-place LU factors of a banded matrix, without row exchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row-major band storage: entry (i, j) at i·width + (j + lower − i).
    band: Vec<f64>,
    source: CsrMatrix,
}

impl BandedLu {
    /// Factors a square matrix. Pivots must be positive.
    pub fn factor(a: &CsrMatrix) -> Result<Self, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: a.rows,
                actual: a.cols,
            });
        }
        let n = a.rows;
        let (lower, upper) = a.bandwidths();
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * width + j + lower - i] = v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let pivot = band[k * width + lower];
            if !pivot.is_finite() {
                return Err(LinalgError::Singular);
            }
            if pivot <= 1e-14 * scale {
                return Err(LinalgError::NonPositivePivot { index: k, value: pivot });
            }
            let last_row = (k + lower).min(n - 1);
            let last_col = (k + upper).min(n - 1);
            for i in k + 1..=last_row {
                let ik = i * width + k + lower - i;
                let factor = band[ik] / pivot;
                if factor == 0.0 {
                    continue;
                }
                band[ik] = factor;
                for j in k + 1..=last_col {
                    band[i * width + j + lower - i] -= factor * band[k * width + j + lower - k];
                }
            }
        }
        Ok(BandedLu {
            n,
            lower,
            upper,
            band,
            source: a.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn substitute(&self, b: &mut [f64]) {
        let (n, lo, up) = (self.n, self.lower, self.upper);
        let width = lo + up + 1;
        for i in 0..n {
            let first = i.saturating_sub(lo);
            let mut s = b[i];
            for j in first..i {
                s -= self.band[i * width + j + lo - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let last = (i + up).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=last {
                s -= self.band[i * width + j + lo - i] * b[j];
            }
            b[i] = s / self.band[i * width + lo];
        }
    }

    /// Solves A x = b with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                actual: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.substitute(&mut x);
        let ax = self.source.matvec(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        self.substitute(&mut r);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular);
        }
        Ok(x)
    }
}

/// Euclidean norm.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Least-squares line through (x, y); returns (slope, intercept, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(n: usize, lo: f64, d: f64, up: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.max_asymmetry(), 2.0);
    }

    #[test]
    fn banded_solve_matches_dense() {
        let m = tridiagonal(40, -1.3, 4.0, -0.7);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = BandedLu::factor(&m).unwrap().solve(&b).unwrap();
        let dense = m.to_dense().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..40 {
            assert!((x[i] - dense[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = tridiagonal(5, 1.0, -2.0, 1.0);
        assert!(matches!(BandedLu::factor(&m), Err(LinalgError::NonPositivePivot { index: 0, .. })));
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (s, c, r) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14 && r < 1e-14);
    }
}

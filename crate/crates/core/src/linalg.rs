//! Minimal dense linear algebra for the GP layer.
//!
//! A row-major `f64` matrix plus the handful of symmetric positive-definite
//! routines the Gaussian process needs: Cholesky factorization with adaptive
//! diagonal jitter, triangular solves, and the explicit inverse from a
//! factor. Sizes here top out in the few hundreds, so simple loops are fast
//! enough and keep the crate `no_std`-clean.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn take_row(&self, i: usize) -> Vec<f64> {
        self.row(i).to_vec()
    }

    /// Rows of `self` with index `skip` removed (used by leave-one-out).
    pub fn without_row(&self, skip: usize) -> Mat {
        let mut data = Vec::with_capacity((self.rows - 1) * self.cols);
        for i in 0..self.rows {
            if i != skip {
                data.extend_from_slice(self.row(i));
            }
        }
        Mat::from_vec(self.rows - 1, self.cols, data)
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * v` for a length-`cols` vector.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = dot(self.row(i), v);
        }
        out
    }

    /// `self^T * v` for a length-`rows` vector.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline(always)]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline(always)]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline(always)]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: Mat,
    /// Diagonal jitter that had to be added before factorization succeeded.
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotPositiveDefinite;

impl core::fmt::Display for NotPositiveDefinite {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "matrix is not positive definite even after jitter escalation")
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NotPositiveDefinite {}

fn cholesky_in_place(a: &mut Mat) -> bool {
    let n = a.rows();
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            let v = a[(j, k)];
            d -= v * v;
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let dsq = math::sqrt(d);
        a[(j, j)] = dsq;
        let inv = 1.0 / dsq;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            // rows i and j are disjoint slices; index into raw data
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                s -= a.data[ri + k] * a.data[rj + k];
            }
            a.data[ri + j] = s * inv;
        }
    }
    // zero the strict upper triangle so the factor is exactly L
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = 0.0;
        }
    }
    true
}

impl CholeskyFactor {
    /// Factor `a` directly, failing without any jitter retry.
    pub fn new(a: &Mat) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.rows(), a.cols());
        let mut l = a.clone();
        if cholesky_in_place(&mut l) {
            Ok(CholeskyFactor { l, jitter: 0.0 })
        } else {
            Err(NotPositiveDefinite)
        }
    }

    /// Factor `a`, escalating diagonal jitter from `1e-8 * mean(diag)` by
    /// factors of 10 up to `1e-2 * mean(diag)` before giving up.
    pub fn new_with_jitter(a: &Mat) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.rows(), a.cols());
        let n = a.rows();
        if n == 0 {
            return Ok(CholeskyFactor { l: Mat::zeros(0, 0), jitter: 0.0 });
        }
        let mut l = a.clone();
        if cholesky_in_place(&mut l) {
            return Ok(CholeskyFactor { l, jitter: 0.0 });
        }
        let mut mean_diag = 0.0;
        for i in 0..n {
            mean_diag += a[(i, i)];
        }
        mean_diag /= n as f64;
        if !(mean_diag > 0.0) {
            mean_diag = 1.0;
        }
        let mut jitter = 1e-8 * mean_diag;
        let max_jitter = 1e-2 * mean_diag;
        while jitter <= max_jitter * (1.0 + 1e-12) {
            let mut l = a.clone();
            for i in 0..n {
                l[(i, i)] += jitter;
            }
            if cholesky_in_place(&mut l) {
                return Ok(CholeskyFactor { l, jitter });
            }
            jitter *= 10.0;
        }
        Err(NotPositiveDefinite)
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn l(&self) -> &Mat {
        &self.l
    }

    /// `log det A = 2 * sum(log L_ii)`.
    pub fn log_det(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.l.rows() {
            s += math::ln(self.l[(i, i)]);
        }
        2.0 * s
    }

    /// Solve `L x = b` (forward substitution).
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solve `L^T x = b` (back substitution).
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solve `A x = b` via the factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lower_transpose(&self.solve_lower(b))
    }

    /// Solve `A X = B` column-wise where `B` is given by rows (`n x m`).
    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.dim();
        assert_eq!(b.rows(), n);
        let m = b.cols();
        let mut out = Mat::zeros(n, m);
        let mut col = vec![0.0; n];
        for j in 0..m {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col);
            for i in 0..n {
                out[(i, j)] = x[i];
            }
        }
        out
    }

    /// The full inverse `A^{-1} = L^{-T} L^{-1}`.
    pub fn inverse(&self) -> Mat {
        let n = self.dim();
        // invert L in place (lower-triangular inverse)
        let mut li = Mat::zeros(n, n);
        for i in 0..n {
            li[(i, i)] = 1.0 / self.l[(i, i)];
            for j in 0..i {
                let mut s = 0.0;
                for k in j..i {
                    s += self.l[(i, k)] * li[(k, j)];
                }
                li[(i, j)] = -s / self.l[(i, i)];
            }
        }
        // A^{-1} = L^{-T} L^{-1}; result is symmetric
        let mut inv = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in i..n {
                    s += li[(k, i)] * li[(k, j)];
                }
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        inv
    }
}

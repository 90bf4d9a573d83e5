//! Minimal dense linear algebra shared by every other module: vectors,
//! row-major matrices, Kronecker products, ridge-regularized least squares,
//! and rank-one inverse updates.
//!
//! Dictionary dimensions in this crate stay small (tens to a few hundred),
//! so direct normal-equation solves (Cholesky, pivoted-LU fallback) are the
//! right tool; no eigendecomposition or sparse storage is needed.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot floor below which a zero-ridge solve is declared singular.
pub const SINGULAR_PIVOT_REL: f64 = 1e-12;

/// Dense vector of `f64` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Vector { data: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        Vector::new(self.data.iter().map(|x| alpha * x).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector::new(
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector::new(
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// In-place `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Vector) {
        debug_assert_eq!(self.dim(), x.dim());
        for (s, v) in self.data.iter_mut().zip(x.data.iter()) {
            *s += alpha * v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector::new(data)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Dense matrix stored row-major: `data[r * cols + c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    /// n x n diagonal matrix with constant value `d`.
    pub fn diagonal(n: usize, d: f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
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

    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.cols, x.dim());
        let mut out = Vector::zeros(self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.as_slice()) {
                acc += a * b;
            }
            out[r] = acc;
        }
        out
    }

    /// `A^T x` without forming the transpose.
    pub fn matvec_transpose(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.rows, x.dim());
        let mut out = Vector::zeros(self.cols);
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (o, a) in out.as_mut_slice().iter_mut().zip(self.row(r)) {
                *o += xr * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let crow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (c, o) in crow.iter_mut().zip(orow) {
                    *c += aik * o;
                }
            }
        }
        out
    }

    /// `A * B^T`; both operands row-major so the inner loop is two row scans.
    pub fn matmul_transpose_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_transpose_b shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..other.rows {
                let brow = other.row(j);
                let mut acc = 0.0;
                for (a, b) in arow.iter().zip(brow) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        out
    }

    /// `A^T * B` without forming the transpose.
    pub fn matmul_transpose_a(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_transpose_a shape mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let brow = other.row(r);
            for (i, &a) in arow.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let crow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (c, b) in crow.iter_mut().zip(brow) {
                    *c += a * b;
                }
            }
        }
        out
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

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix::new(
            self.rows,
            self.cols,
            self.data.iter().map(|x| alpha * x).collect(),
        )
    }

    /// In-place `self += alpha * other`.
    pub fn add_assign_scaled(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (s, o) in self.data.iter_mut().zip(other.data.iter()) {
            *s += alpha * o;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Averages `self` with its transpose in place (square matrices only).
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rows, self.cols);
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                let avg = 0.5 * (self.data[r * self.cols + c] + self.data[c * self.cols + r]);
                self.data[r * self.cols + c] = avg;
                self.data[c * self.cols + r] = avg;
            }
        }
    }

    /// Solves `self * X = rhs` for square `self` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        assert_eq!(self.rows, self.cols, "solve requires a square matrix");
        assert_eq!(self.rows, rhs.rows, "solve rhs row mismatch");
        let max_diag = (0..self.rows)
            .map(|i| self.data[i * self.cols + i].abs())
            .fold(0.0f64, f64::max)
            .max(1.0);
        lu_solve(self.clone(), rhs.clone(), SINGULAR_PIVOT_REL * max_diag)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Kronecker product of two vectors: `result[i*dim(b)+j] = a[i] * b[j]`.
pub fn kron(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vec::with_capacity(a.dim() * b.dim());
    for i in 0..a.dim() {
        let ai = a[i];
        for j in 0..b.dim() {
            out.push(ai * b[j]);
        }
    }
    Vector::new(out)
}

/// Kronecker product written into a caller-provided slice, avoiding allocation
/// in hot loops. `out.len()` must equal `a.dim() * b.dim()`.
pub fn kron_into(a: &Vector, b: &Vector, out: &mut [f64]) {
    debug_assert_eq!(out.len(), a.dim() * b.dim());
    let bd = b.dim();
    for i in 0..a.dim() {
        let ai = a[i];
        let chunk = &mut out[i * bd..(i + 1) * bd];
        for (o, bj) in chunk.iter_mut().zip(b.as_slice()) {
            *o = ai * bj;
        }
    }
}

/// Outer product `a * b^T`.
pub fn outer(a: &Vector, b: &Vector) -> Matrix {
    let mut m = Matrix::zeros(a.dim(), b.dim());
    for i in 0..a.dim() {
        let ai = a[i];
        for j in 0..b.dim() {
            m[(i, j)] = ai * b[j];
        }
    }
    m
}

/// Ridge-regularized least squares: returns `W` minimizing
/// `||X W - Y||_F^2 + ridge * ||W||_F^2` via the normal equations
/// `(X^T X + ridge I) W = X^T Y`, solved by Cholesky with a pivoted-LU
/// fallback.
///
/// With `ridge = 0` the Gram matrix must be numerically nonsingular
/// (pivots above `1e-12` relative to its largest diagonal entry), otherwise
/// `Error::SingularSystem` is returned.
pub fn lstsq(x: &Matrix, y: &Matrix, ridge: f64) -> Result<Matrix> {
    assert!(ridge >= 0.0, "ridge must be nonnegative");
    assert_eq!(x.rows(), y.rows(), "sample count mismatch between X and Y");
    let mut gram = x.matmul_transpose_a(x);
    for i in 0..gram.rows() {
        gram[(i, i)] += ridge;
    }
    let rhs = x.matmul_transpose_a(y);
    solve_spd(&gram, &rhs)
}

/// Solves `G W = B` for symmetric positive (semi)definite `G`: Cholesky
/// first, pivoted LU as fallback, `SingularSystem` when pivots collapse.
pub fn solve_spd(gram: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    let n = gram.rows();
    assert_eq!(gram.cols(), n);
    let max_diag = (0..n)
        .map(|i| gram[(i, i)].abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    if let Some(w) = cholesky_solve(gram, rhs, max_diag) {
        return Ok(w);
    }
    lu_solve(gram.clone(), rhs.clone(), SINGULAR_PIVOT_REL * max_diag)
}

/// Cholesky factorization and solve; returns None when the matrix is not
/// numerically positive definite.
fn cholesky_solve(gram: &Matrix, rhs: &Matrix, max_diag: f64) -> Option<Matrix> {
    let n = gram.rows();
    let floor = SINGULAR_PIVOT_REL * max_diag;
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = gram[(i, j)];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= floor {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // forward then backward substitution per rhs column
    let m = rhs.cols();
    let mut w = rhs.clone();
    for c in 0..m {
        for i in 0..n {
            let mut sum = w[(i, c)];
            for k in 0..i {
                sum -= l[i * n + k] * w[(k, c)];
            }
            w[(i, c)] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = w[(i, c)];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * w[(k, c)];
            }
            w[(i, c)] = sum / l[i * n + i];
        }
    }
    Some(w)
}

/// LU with partial pivoting; consumes its arguments as working storage.
fn lu_solve(mut a: Matrix, mut b: Matrix, pivot_floor: f64) -> Result<Matrix> {
    let n = a.rows();
    let m = b.cols();
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[(col, col)].abs();
        for r in (col + 1)..n {
            let v = a[(r, col)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < pivot_floor || pivot_val == 0.0 {
            return Err(Error::SingularSystem);
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = a[(col, c)];
                a[(col, c)] = a[(pivot_row, c)];
                a[(pivot_row, c)] = tmp;
            }
            for c in 0..m {
                let tmp = b[(col, c)];
                b[(col, c)] = b[(pivot_row, c)];
                b[(pivot_row, c)] = tmp;
            }
        }
        let inv_pivot = 1.0 / a[(col, col)];
        for r in (col + 1)..n {
            let factor = a[(r, col)] * inv_pivot;
            if factor == 0.0 {
                continue;
            }
            a[(r, col)] = 0.0;
            for c in (col + 1)..n {
                let v = a[(col, c)];
                a[(r, c)] -= factor * v;
            }
            for c in 0..m {
                let v = b[(col, c)];
                b[(r, c)] -= factor * v;
            }
        }
    }
    for c in 0..m {
        for i in (0..n).rev() {
            let mut sum = b[(i, c)];
            for k in (i + 1)..n {
                sum -= a[(i, k)] * b[(k, c)];
            }
            b[(i, c)] = sum / a[(i, i)];
        }
    }
    Ok(b)
}

/// Whether a symmetric matrix is numerically positive definite (Cholesky
/// succeeds with all pivots strictly positive).
pub fn is_positive_definite(m: &Matrix) -> bool {
    if m.rows() != m.cols() {
        return false;
    }
    let n = m.rows();
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[(i, j)];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    true
}

/// Rank-one inverse update: given `inv = G^{-1}` for SPD `G`, returns
/// `(G + v v^T)^{-1} = inv - (inv v)(v^T inv) / (1 + v^T inv v)`.
pub fn sherman_morrison_update(inv: &Matrix, v: &Vector) -> Matrix {
    debug_assert_eq!(inv.rows(), v.dim());
    let u = inv.matvec(v);
    let w = inv.matvec_transpose(v);
    let denom = 1.0 + v.dot(&u);
    let scale = 1.0 / denom;
    let mut out = inv.clone();
    for i in 0..out.rows() {
        let ui = u[i] * scale;
        if ui == 0.0 {
            continue;
        }
        let row = out.row_mut(i);
        for (o, wj) in row.iter_mut().zip(w.as_slice()) {
            *o -= ui * wj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn kron_identity_factor() {
        let a = Vector::new(vec![1.0]);
        let b = Vector::new(vec![1.0, 3.0]);
        assert_eq!(kron(&a, &b).as_slice(), &[1.0, 3.0]);
    }

    #[test]
    fn kron_hand_expansion() {
        let a = Vector::new(vec![1.0, 2.0]);
        let b = Vector::new(vec![1.0, 3.0]);
        assert_eq!(kron(&a, &b).as_slice(), &[1.0, 3.0, 2.0, 6.0]);
    }

    #[test]
    fn kron_basis_vectors() {
        for i in 0..3 {
            for j in 0..4 {
                let mut a = Vector::zeros(3);
                a[i] = 1.0;
                let mut b = Vector::zeros(4);
                b[j] = 1.0;
                let k = kron(&a, &b);
                let nonzero: Vec<usize> = (0..k.dim()).filter(|&z| k[z] != 0.0).collect();
                assert_eq!(nonzero, vec![i * 4 + j]);
                assert_eq!(k[i * 4 + j], 1.0);
            }
        }
    }

    #[test]
    fn kron_into_matches_kron() {
        let a = Vector::new(vec![0.5, -2.0, 3.0]);
        let b = Vector::new(vec![1.0, 4.0]);
        let mut buf = vec![0.0; 6];
        kron_into(&a, &b, &mut buf);
        assert_eq!(buf.as_slice(), kron(&a, &b).as_slice());
    }

    #[test]
    fn lstsq_exact_line() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let y = Matrix::from_rows(&[vec![2.0], vec![4.0]]);
        let w = lstsq(&x, &y, 0.0).unwrap();
        assert_close(w[(0, 0)], 2.0, 1e-12);
    }

    #[test]
    fn lstsq_ridge_by_hand() {
        // (1 + 1) w = 1  =>  w = 0.5
        let x = Matrix::from_rows(&[vec![1.0]]);
        let y = Matrix::from_rows(&[vec![1.0]]);
        let w = lstsq(&x, &y, 1.0).unwrap();
        assert_close(w[(0, 0)], 0.5, 1e-12);
    }

    #[test]
    fn lstsq_identity_returns_y() {
        let x = Matrix::identity(3);
        let y = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let w = lstsq(&x, &y, 0.0).unwrap();
        assert!(w.sub(&y).max_abs() < 1e-12);
    }

    #[test]
    fn lstsq_singular_without_ridge() {
        // duplicated column => rank deficient Gram
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]);
        let y = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        match lstsq(&x, &y, 0.0) {
            Err(Error::SingularSystem) => {}
            other => panic!("expected SingularSystem, got {other:?}"),
        }
        // same system is fine with ridge
        assert!(lstsq(&x, &y, 1e-6).is_ok());
    }

    #[test]
    fn lstsq_square_nonsingular_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 4;
            let x = random_matrix(&mut rng, n, n);
            let y = random_matrix(&mut rng, n, 2);
            let w = lstsq(&x, &y, 0.0).unwrap();
            let resid = x.matmul(&w).sub(&y).frobenius_norm();
            assert!(resid < 1e-10 * y.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn lstsq_normal_equation_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &ridge in &[0.0, 1e-3, 1.0] {
            let x = random_matrix(&mut rng, 30, 6);
            let y = random_matrix(&mut rng, 30, 3);
            let w = lstsq(&x, &y, ridge).unwrap();
            let mut gram = x.matmul_transpose_a(&x);
            for i in 0..gram.rows() {
                gram[(i, i)] += ridge;
            }
            let xty = x.matmul_transpose_a(&y);
            let resid = gram.matmul(&w).sub(&xty).frobenius_norm();
            assert!(resid < 1e-8 * (1.0 + xty.frobenius_norm()));
        }
    }

    #[test]
    fn sherman_morrison_scalar() {
        let inv = Matrix::identity(1);
        let v = Vector::new(vec![1.0]);
        let updated = sherman_morrison_update(&inv, &v);
        assert_close(updated[(0, 0)], 0.5, 1e-15);
    }

    #[test]
    fn sherman_morrison_zero_vector() {
        let inv = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let v = Vector::zeros(2);
        let updated = sherman_morrison_update(&inv, &v);
        assert!(updated.sub(&inv).max_abs() == 0.0);
    }

    #[test]
    fn sherman_morrison_two_updates_match_direct_inverse() {
        // Gram = I + v1 v1^T + v2 v2^T inverted directly (2x2 adjugate).
        let v1 = Vector::new(vec![1.0, 2.0]);
        let v2 = Vector::new(vec![-0.5, 0.7]);
        let mut gram = Matrix::identity(2);
        gram.add_assign_scaled(1.0, &outer(&v1, &v1));
        gram.add_assign_scaled(1.0, &outer(&v2, &v2));
        let det = gram[(0, 0)] * gram[(1, 1)] - gram[(0, 1)] * gram[(1, 0)];
        let direct = Matrix::from_rows(&[
            vec![gram[(1, 1)] / det, -gram[(0, 1)] / det],
            vec![-gram[(1, 0)] / det, gram[(0, 0)] / det],
        ]);
        let step1 = sherman_morrison_update(&Matrix::identity(2), &v1);
        let step2 = sherman_morrison_update(&step1, &v2);
        assert!(step2.sub(&direct).max_abs() < 1e-10);
    }

    #[test]
    fn sherman_morrison_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = 5;
            // SPD Gram = B^T B + I
            let b = random_matrix(&mut rng, n, n);
            let mut gram = b.matmul_transpose_a(&b);
            for i in 0..n {
                gram[(i, i)] += 1.0;
            }
            let inv = gram.solve(&Matrix::identity(n)).unwrap();
            let v = Vector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
            let updated_inv = sherman_morrison_update(&inv, &v);
            let mut updated_gram = gram.clone();
            updated_gram.add_assign_scaled(1.0, &outer(&v, &v));
            let product = updated_inv.matmul(&updated_gram);
            assert!(product.sub(&Matrix::identity(n)).max_abs() < 1e-8);
        }
    }

    #[test]
    fn solve_matches_known_inverse() {
        let a = Matrix::from_rows(&[vec![4.0, 7.0], vec![2.0, 6.0]]);
        let inv = a.solve(&Matrix::identity(2)).unwrap();
        let expected = Matrix::from_rows(&[vec![0.6, -0.7], vec![-0.2, 0.4]]);
        assert!(inv.sub(&expected).max_abs() < 1e-12);
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    proptest! {
        #[test]
        fn kron_scaling_is_bilinear(
            a in proptest::collection::vec(-10.0f64..10.0, 1..5),
            b in proptest::collection::vec(-10.0f64..10.0, 1..5),
            alpha in -8.0f64..8.0,
        ) {
            let av = Vector::new(a);
            let bv = Vector::new(b);
            let lhs = kron(&av.scale(alpha), &bv);
            let rhs = kron(&av, &bv).scale(alpha);
            for i in 0..lhs.dim() {
                let tol = 1e-15 * rhs[i].abs().max(1e-300);
                prop_assert!((lhs[i] - rhs[i]).abs() <= tol);
            }
            // powers of two rescale exactly
            let lhs2 = kron(&av.scale(4.0), &bv);
            let rhs2 = kron(&av, &bv).scale(4.0);
            prop_assert_eq!(lhs2.as_slice(), rhs2.as_slice());
        }

        #[test]
        fn kron_dimension_and_layout(
            a in proptest::collection::vec(-3.0f64..3.0, 1..4),
            b in proptest::collection::vec(-3.0f64..3.0, 1..4),
        ) {
            let av = Vector::new(a.clone());
            let bv = Vector::new(b.clone());
            let k = kron(&av, &bv);
            prop_assert_eq!(k.dim(), a.len() * b.len());
            for i in 0..a.len() {
                for j in 0..b.len() {
                    prop_assert_eq!(k[i * b.len() + j], a[i] * b[j]);
                }
            }
        }
    }
}

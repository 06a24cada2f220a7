//! Small dense linear algebra over a generic scalar.
//!
//! Everything here is sized for desk-scale problems (state counts in the
//! tens to low hundreds, feature dimensions below that), so a plain
//! row-major matrix with direct factorizations is the right tool.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        let n = rows.len();
        let data = rows.into_iter().flatten().collect();
        Ok(Matrix { rows: n, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(entries: &[T]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// vᵀ · self, returned as a vector of length `cols`.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "vec_mul dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for i in 0..self.rows {
            let a = v[i];
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += a * x;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }

    pub fn scale(&self, c: T) -> Matrix<T> {
        Matrix::from_fn(self.rows, self.cols, |i, j| c * self[(i, j)])
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|x| x.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Maximum over rows of |Σ_j a_ij − 1|.
    pub fn row_sum_error(&self) -> T {
        (0..self.rows)
            .map(|i| (self.row(i).iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter()
        .map(|x| x.abs())
        .fold(T::zero(), |a, b| if b > a { b } else { a })
}

pub fn sub_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn scale_vec<T: Scalar>(a: &[T], c: T) -> Vec<T> {
    a.iter().map(|&x| c * x).collect()
}

/// LU factorization with partial pivoting.
pub struct LuFactor<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactor<T> {
    /// Factors `a`, failing when the smallest pivot falls below the
    /// scalar's pivot tolerance (relative to the matrix magnitude).
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        assert!(a.is_square(), "LU factorization needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = if a.max_abs() > T::one() { a.max_abs() } else { T::one() };
        let tol = T::pivot_tol() * scale;
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val < tol {
                return Err(Error::Singular(format!(
                    "pivot {pivot_val:e} below threshold at column {k}"
                )));
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
            }
            let inv_pivot = T::one() / lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] * inv_pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let delta = factor * lu[(k, j)];
                    lu[(i, j)] -= delta;
                }
            }
        }
        Ok(LuFactor { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let delta = self.lu[(i, j)] * x[j];
                x[i] = x[i] - delta;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let delta = self.lu[(i, j)] * x[j];
                x[i] = x[i] - delta;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_matrix(&self, b: &Matrix<T>) -> Matrix<T> {
        assert_eq!(b.rows(), self.lu.rows());
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve(&b.column(j));
            for i in 0..b.rows() {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(LuFactor::new(a)?.solve(b))
}

pub fn solve_matrix<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(LuFactor::new(a)?.solve_matrix(b))
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    assert!(a.is_square());
    let n = a.rows();
    let mut m = a.clone();
    let tol = T::strict_tol() * if m.max_abs() > T::one() { m.max_abs() } else { T::one() };
    for _sweep in 0..64 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += m[(i, j)].abs();
            }
        }
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < tol * real::<T>(1e-4) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (real::<T>(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Orthonormal basis (as columns) for the span of the rows of `m`,
/// computed by modified Gram-Schmidt with rank truncation.
pub fn row_space_basis<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let p = m.cols();
    let scale = if m.max_abs() > T::one() { m.max_abs() } else { T::one() };
    let tol = T::basis_tol() * scale;
    let mut basis: Vec<Vec<T>> = Vec::new();
    for i in 0..m.rows() {
        let mut v: Vec<T> = m.row(i).to_vec();
        for b in &basis {
            let c = dot(&v, b);
            for (x, &y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        // second orthogonalization pass for numerical cleanliness
        for b in &basis {
            let c = dot(&v, b);
            for (x, &y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let n = norm2(&v);
        if n > tol {
            let inv = T::one() / n;
            for x in v.iter_mut() {
                *x *= inv;
            }
            basis.push(v);
        }
    }
    let r = basis.len();
    Matrix::from_fn(p, r, |i, j| basis[j][i])
}

/// Solves ξᵀP = ξᵀ with Σξ = 1 for a row-stochastic `p` by replacing one
/// balance equation with the normalization constraint.
pub fn stationary_left_vector<T: Scalar>(p: &Matrix<T>) -> Result<Vec<T>> {
    assert!(p.is_square());
    let n = p.rows();
    // (Pᵀ − I) ξ = 0, last row replaced by 1ᵀ ξ = 1.
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[(j, i)];
        }
        a[(i, i)] -= T::one();
    }
    for j in 0..n {
        a[(n - 1, j)] = T::one();
    }
    let mut b = vec![T::zero(); n];
    b[n - 1] = T::one();
    solve(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let a = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lu_rejects_singular() {
        let a = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve(&a, &[1.0, 2.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn jacobi_eigenvalues_2x2() {
        let a = Matrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&a);
        assert!((e[0] - 1.0).abs() < 1e-10);
        assert!((e[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn stationary_two_state() {
        let p = Matrix::from_rows(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let xi = stationary_left_vector(&p).unwrap();
        assert!((xi[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((xi[1] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn basis_detects_rank() {
        let m = Matrix::from_rows(vec![
            vec![1.0, 0.0, 1.0],
            vec![2.0, 0.0, 2.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let b = row_space_basis(&m);
        assert_eq!(b.cols(), 2);
        // columns orthonormal
        let g = b.transpose().matmul(&b);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}

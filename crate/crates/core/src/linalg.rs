//! Small dense linear algebra: vectors as slices, row-major matrices,
//! LU solves, least squares and singular values via Jacobi sweeps.
//!
//! Everything here is sized for desk-scale problems (dimension ≲ 10).

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Real>(a: &[T], k: T) -> Vec<T> {
    a.iter().map(|&x| x * k).collect()
}

/// `y += k * x`
pub fn axpy<T: Real>(y: &mut [T], k: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + k * xi;
    }
}

pub fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn all_finite<T: Real>(a: &[T]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub fn unit<T: Real>(n: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[i] = T::one();
    e
}

/// Dense row-major matrix. As a linear map it sends `R^cols` to `R^rows`.
#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
                what: "matrix entries",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                    what: "matrix row",
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_cols(cols: &[Vec<T>]) -> Result<Self> {
        Ok(Self::from_rows(cols)?.transpose())
    }

    /// Column vector (n×1) from a slice.
    pub fn column_vector(v: &[T]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// Outer product `a ⊗ b`, i.e. the rank-one map `u ↦ a * <b, u>`.
    pub fn outer(a: &[T], b: &[T]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                m[(i, j)] = ai * bj;
            }
        }
        m
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[T]) {
        for (r, &x) in v.iter().enumerate().take(self.rows) {
            self[(r, c)] = x;
        }
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> Self {
        let mut m = Self::zeros(self.rows, end - start);
        for r in 0..self.rows {
            for c in start..end {
                m[(r, c - start)] = self[(r, c)];
            }
        }
        m
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: other.rows,
                what: "hstack rows",
            });
        }
        let mut m = Self::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(r, c)] = self[(r, c)];
            }
            for c in 0..other.cols {
                m[(r, self.cols + c)] = other[(r, c)];
            }
        }
        Ok(m)
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(c, r)] = self[(r, c)];
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    m[(i, j)] = m[(i, j)] + a * other[(k, j)];
                }
            }
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: add(&self.data, &other.data),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Self {
            rows: self.rows,
            cols: self.cols,
            data: sub(&self.data, &other.data),
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: scale(&self.data, k),
        }
    }

    pub fn frobenius(&self) -> T {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    /// Singular values in decreasing order (length `min(rows, cols)`).
    pub fn singular_values(&self) -> Vec<T> {
        let gram = if self.rows >= self.cols {
            self.transpose().matmul(self)
        } else {
            self.matmul(&self.transpose())
        };
        let mut ev = symmetric_eigenvalues(&gram);
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        ev.into_iter().map(|x| x.max(T::zero()).sqrt()).collect()
    }

    pub fn sigma_min(&self) -> T {
        self.singular_values().last().copied().unwrap_or_else(T::zero)
    }

    /// Operator 2-norm.
    pub fn op_norm(&self) -> T {
        self.singular_values().first().copied().unwrap_or_else(T::zero)
    }

    pub fn determinant(&self) -> T {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        match Lu::new(self) {
            Some(lu) => lu.det(),
            None => T::zero(),
        }
    }

    /// Solves `self * x = b` for square `self`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if self.rows != self.cols || b.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: b.len(),
                what: "linear solve",
            });
        }
        let lu = Lu::new(self).ok_or(Error::Singular)?;
        Ok(lu.solve(b))
    }

    /// Least-squares solution of `self * x ≈ b` (full column rank assumed),
    /// through modified Gram–Schmidt QR.
    pub fn least_squares(&self, b: &[T]) -> Result<Vec<T>> {
        let (m, n) = self.shape();
        if b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: b.len(),
                what: "least squares rhs",
            });
        }
        if n > m {
            return Err(Error::Singular);
        }
        let mut q: Vec<Vec<T>> = (0..n).map(|c| self.column(c)).collect();
        let mut r = Self::zeros(n, n);
        let scale_ref = self.max_abs().max(T::min_positive_value());
        for j in 0..n {
            for i in 0..j {
                let rij = dot(&q[i], &q[j]);
                r[(i, j)] = rij;
                let qi = q[i].clone();
                axpy(&mut q[j], -rij, &qi);
            }
            let nj = norm(&q[j]);
            if nj <= T::epsilon() * T::lit(64.0) * scale_ref {
                return Err(Error::Singular);
            }
            r[(j, j)] = nj;
            q[j] = scale(&q[j], T::one() / nj);
        }
        let qtb: Vec<T> = q.iter().map(|qi| dot(qi, b)).collect();
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut acc = qtb[i];
            for j in i + 1..n {
                acc = acc - r[(i, j)] * x[j];
            }
            x[i] = acc / r[(i, i)];
        }
        Ok(x)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorisation with partial pivoting.
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    /// Returns `None` when a pivot is exactly zero.
    pub fn new(a: &Matrix<T>) -> Option<Self> {
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() {
                return None;
            }
            if p != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for c in k + 1..n {
                    lu[(i, c)] = lu[(i, c)] - f * lu[(k, c)];
                }
            }
        }
        Some(Self { lu, perm, sign })
    }

    pub fn det(&self) -> T {
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let n = a.rows();
    let mut m = a.clone();
    let tol = T::epsilon() * T::lit(0.5);
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)] * m[(i, j)];
                total = total + v;
                if i != j {
                    off = off + v;
                }
            }
        }
        if off <= tol * tol * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let cs = T::one() / (t * t + T::one()).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = cs * mkp - sn * mkq;
                    m[(k, q)] = sn * mkp + cs * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = cs * mpk - sn * mqk;
                    m[(q, k)] = sn * mpk + cs * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// Orthonormal basis of the orthogonal complement of `v` in `R^n`
/// (Gram–Schmidt on the standard basis).
pub fn orthonormal_complement<T: Real>(v: &[T]) -> Vec<Vec<T>> {
    let n = v.len();
    let nv = norm(v);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
    if nv > T::zero() {
        basis.push(scale(v, T::one() / nv));
    }
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    // Start with the axes least aligned with v for better conditioning.
    order.sort_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    for i in order {
        let mut e = unit::<T>(n, i);
        for b in &basis {
            let k = dot(b, &e);
            axpy(&mut e, -k, b);
        }
        let ne = norm(&e);
        if ne > T::lit(1e-6) {
            let e = scale(&e, T::one() / ne);
            basis.push(e.clone());
            out.push(e);
        }
        if basis.len() == n {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solve_and_det() {
        let a = Matrix::from_rows(&[vec![2.0f64, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = a.solve(&[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!((a.determinant() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn singular_solve_is_an_error() {
        let a = Matrix::from_rows(&[vec![1.0f64, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(a.solve(&[1.0, 1.0]).is_err() || a.determinant().abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_diag() {
        let a = Matrix::from_rows(&[vec![3.0f64, 0.0], vec![0.0, -2.0], vec![0.0, 0.0]]).unwrap();
        let s = a.singular_values();
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_matches_exact_solution() {
        let a = Matrix::from_rows(&[vec![1.0f64, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let x = a.least_squares(&[1.0, 2.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = [1.0f64, 2.0, -0.5];
        let b = orthonormal_complement(&v);
        assert_eq!(b.len(), 2);
        for u in &b {
            assert!(dot(u, &v).abs() < 1e-12);
            assert!((norm(u) - 1.0).abs() < 1e-12);
        }
        assert!(dot(&b[0], &b[1]).abs() < 1e-12);
    }
}

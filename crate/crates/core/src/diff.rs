//! Central finite differences.

use crate::linalg::{norm, Matrix};
use crate::scalar::Real;

/// Default step `1e-5 * (1 + |x|)`.
pub fn default_step<T: Real>(x: &[T]) -> T {
    T::lit(1e-5) * (T::one() + norm(x))
}

/// Central difference of `f` at `x` along `u` with step `h`.
pub fn directional<T: Real>(f: &dyn Fn(&[T]) -> Vec<T>, x: &[T], u: &[T], h: T) -> Vec<T> {
    let xp: Vec<T> = x.iter().zip(u).map(|(&a, &b)| a + h * b).collect();
    let xm: Vec<T> = x.iter().zip(u).map(|(&a, &b)| a - h * b).collect();
    let fp = f(&xp);
    let fm = f(&xm);
    let inv = T::one() / (h + h);
    fp.iter().zip(&fm).map(|(&a, &b)| (a - b) * inv).collect()
}

/// Central-difference Jacobian (`m × n`) with the default step.
pub fn jacobian<T: Real>(f: &dyn Fn(&[T]) -> Vec<T>, x: &[T]) -> Matrix<T> {
    jacobian_with_step(f, x, default_step(x))
}

pub fn jacobian_with_step<T: Real>(f: &dyn Fn(&[T]) -> Vec<T>, x: &[T], h: T) -> Matrix<T> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e[j] = T::one();
        cols.push(directional(f, x, &e, h));
        e[j] = T::zero();
    }
    let m = cols.first().map_or(0, Vec::len);
    let mut jac = Matrix::zeros(m, n);
    for (j, col) in cols.iter().enumerate() {
        jac.set_column(j, col);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_polynomial_map() {
        let f = |x: &[f64]| vec![x[0] * x[0] * x[1], x[1].sin()];
        let j = jacobian(&f, &[1.5, 0.3]);
        assert!((j[(0, 0)] - 2.0 * 1.5 * 0.3).abs() < 1e-8);
        assert!((j[(0, 1)] - 2.25).abs() < 1e-8);
        assert!(j[(1, 0)].abs() < 1e-12);
        assert!((j[(1, 1)] - 0.3f64.cos()).abs() < 1e-8);
    }
}

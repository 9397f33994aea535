//! Composite Simpson and Gauss–Legendre rules.

use crate::linalg;
use crate::scalar::Real;

/// Composite Simpson on `[a, b]` with `m` panels (`m` rounded up to even,
/// at least 2). Oriented: `b < a` gives the negated integral.
pub fn quad_integral<T: Real>(f: impl Fn(T) -> Vec<T>, a: T, b: T, m: usize) -> Vec<T> {
    let m = (m.max(2) + 1) & !1;
    let h = (b - a) / T::from_usize_lossy(m);
    let mut acc = f(a);
    linalg::axpy(&mut acc, T::one(), &f(b));
    for i in 1..m {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        let fi = f(a + h * T::from_usize_lossy(i));
        linalg::axpy(&mut acc, w, &fi);
    }
    linalg::scale(&acc, h / T::lit(3.0))
}

/// Scalar Simpson.
pub fn simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, m: usize) -> T {
    quad_integral(|s| vec![f(s)], a, b, m)[0]
}

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss–Legendre with `panels` equal panels on `[a, b]`.
pub fn gauss_legendre<T: Real>(f: impl Fn(T) -> Vec<T>, a: T, b: T, panels: usize, dim: usize) -> Vec<T> {
    let panels = panels.max(1);
    let h = (b - a) / T::from_usize_lossy(panels);
    let half = h * T::lit(0.5);
    let mut acc = vec![T::zero(); dim];
    for p in 0..panels {
        let mid = a + h * (T::from_usize_lossy(p) + T::lit(0.5));
        for k in 0..4 {
            let dx = half * T::lit(GL8_X[k]);
            let w = half * T::lit(GL8_W[k]);
            linalg::axpy(&mut acc, w, &f(mid - dx));
            linalg::axpy(&mut acc, w, &f(mid + dx));
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_on_cubics() {
        assert_eq!(simpson(|s: f64| s, 0.0, 1.0, 4), 0.5);
        assert!((simpson(|s: f64| s * s * s, 0.0, 1.0, 4) - 0.25).abs() < 1e-15);
        let v = simpson(|s: f64| (std::f64::consts::TAU * s).sin(), 0.0, 1.0, 64);
        assert!(v.abs() < 1e-10);
        assert!((simpson(|s: f64| s, 1.0, 0.0, 8) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_matches_polynomials() {
        let v = gauss_legendre(|s: f64| vec![s.powi(15)], 0.0, 1.0, 1, 1)[0];
        assert!((v - 1.0 / 16.0).abs() < 1e-14);
        let e = gauss_legendre(|s: f64| vec![s.exp()], 0.0, 2.0, 3, 1)[0];
        assert!((e - (2.0f64.exp() - 1.0)).abs() < 1e-13);
    }
}

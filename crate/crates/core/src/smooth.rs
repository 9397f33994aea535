//! C∞ building blocks: the flat function `e^{-1/x}`, smooth steps and
//! plateau bumps. Every family built by this crate is assembled from these,
//! so no separate smoothing pass is ever needed.

use std::sync::OnceLock;

use crate::scalar::Real;

/// `e^{-1/x}` for `x > 0`, `0` otherwise.
#[inline]
pub fn flat_exp<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        (-x.recip()).exp()
    }
}

/// Smooth step: `0` on `(-∞, 0]`, `1` on `[1, ∞)`, strictly increasing
/// in between, all derivatives vanishing at both ends.
#[inline]
pub fn smooth_step<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x >= T::one() {
        return T::one();
    }
    let a = flat_exp(x);
    let b = flat_exp(T::one() - x);
    a / (a + b)
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv<T: Real>(x: T) -> T {
    if x <= T::zero() || x >= T::one() {
        return T::zero();
    }
    let one = T::one();
    let y = one - x;
    // S = a / (a + b), a' = a / x², b' = -b / y²
    let a = flat_exp(x);
    let b = flat_exp(y);
    let s = a + b;
    (a * b) * (one / (x * x) + one / (y * y)) / (s * s)
}

/// Inverse of [`smooth_step`] on `[0, 1]` by bisection.
pub fn smooth_step_inv<T: Real>(y: T) -> T {
    if y <= T::zero() {
        return T::zero();
    }
    if y >= T::one() {
        return T::one();
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if smooth_step(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::lit(0.5)
}

const TABLE_N: usize = 4096;

fn integral_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let x = [
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_3,
        ];
        let w = [
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_5,
            0.101_228_536_290_376_3,
        ];
        let h = 1.0 / TABLE_N as f64;
        let mut out = Vec::with_capacity(TABLE_N + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for i in 0..TABLE_N {
            let mid = (i as f64 + 0.5) * h;
            let mut part = 0.0;
            for k in 0..4 {
                part += w[k] * (smooth_step(mid - 0.5 * h * x[k]) + smooth_step(mid + 0.5 * h * x[k]));
            }
            acc += 0.5 * h * part;
            out.push(acc);
        }
        out
    })
}

/// `∫_0^u smooth_step`, continued linearly past `1` (slope one) and by
/// zero below `0`. Cubic Hermite interpolation of a fine table, using the
/// exact integrand as node slopes.
pub fn smooth_step_integral<T: Real>(u: T) -> T {
    if u <= T::zero() {
        return T::zero();
    }
    if u >= T::one() {
        return T::lit(0.5) + (u - T::one());
    }
    let table = integral_table();
    let n = TABLE_N as f64;
    let pos = u.to_f64_lossy() * n;
    let i = (pos.floor() as usize).min(TABLE_N - 1);
    let h = 1.0 / n;
    let th = T::lit((pos - i as f64).clamp(0.0, 1.0));
    let (a0, a1) = (T::lit(table[i]), T::lit(table[i + 1]));
    let s0 = smooth_step(T::lit(i as f64 * h));
    let s1 = smooth_step(T::lit((i + 1) as f64 * h));
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = two * th3 - three * th2 + one;
    let h10 = th3 - two * th2 + th;
    let h01 = -two * th3 + three * th2;
    let h11 = th3 - th2;
    let hh = T::lit(h);
    h00 * a0 + h10 * hh * s0 + h01 * a1 + h11 * hh * s1
}

/// Smooth transition from `0` at `a` to `1` at `b` (`a < b`).
#[inline]
pub fn ramp<T: Real>(x: T, a: T, b: T) -> T {
    smooth_step((x - a) / (b - a))
}

/// Plateau function: `1` on `[lo, hi]`, `0` outside `[lo - w, hi + w]`.
#[inline]
pub fn plateau<T: Real>(x: T, lo: T, hi: T, w: T) -> T {
    if w <= T::zero() {
        return if x >= lo && x <= hi { T::one() } else { T::zero() };
    }
    ramp(x, lo - w, lo) * (T::one() - ramp(x, hi, hi + w))
}

//! Working boxes, box-union regions, their dilations ("near" sets) and
//! smooth cutoffs. Axes may be periodic, in which case coordinates are
//! compared modulo the box width along that axis.

use std::sync::Arc;

use crate::scalar::{frac, Real};
use crate::smooth::plateau;

/// A scalar field on `E`.
pub type ScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Per-axis bounds, `None` where unbounded.
pub type AxisBounds<T> = Vec<Option<T>>;

/// Axis-aligned working box, with per-axis periodicity.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub periodic: Vec<bool>,
}

impl<T: Real> Domain<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        let n = lo.len();
        Self {
            lo,
            hi,
            periodic: vec![false; n],
        }
    }

    pub fn cube(dim: usize, lo: T, hi: T) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn with_periodic(mut self, axis: usize) -> Self {
        self.periodic[axis] = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &xi)| self.periodic[i] || (xi >= self.lo[i] && xi <= self.hi[i]))
    }

    /// Representative of `x_i` closest to `center` on a periodic axis.
    pub fn wrap_near(&self, axis: usize, x: T, center: T) -> T {
        if !self.periodic[axis] {
            return x;
        }
        let p = self.width(axis);
        let d = (x - center) / p + T::lit(0.5);
        center + (frac(d) - T::lit(0.5)) * p
    }

    /// Tensor grid with `n[i]` points along axis `i`. Periodic axes omit
    /// the duplicated endpoint.
    pub fn grid(&self, n: &[usize]) -> Vec<Vec<T>> {
        let axes: Vec<Vec<T>> = (0..self.dim())
            .map(|i| axis_points(self.lo[i], self.hi[i], n[i], self.periodic[i]))
            .collect();
        tensor(&axes)
    }
}

/// `n` points on `[lo, hi]`; when `periodic`, `hi` is excluded.
pub fn axis_points<T: Real>(lo: T, hi: T, n: usize, periodic: bool) -> Vec<T> {
    if n <= 1 {
        return vec![(lo + hi) * T::lit(0.5)];
    }
    let denom = if periodic { n } else { n - 1 };
    let h = (hi - lo) / T::from_usize_lossy(denom);
    (0..n).map(|i| lo + h * T::from_usize_lossy(i)).collect()
}

pub fn tensor<T: Real>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for ax in axes {
        let mut next = Vec::with_capacity(out.len() * ax.len());
        for p in &out {
            for &a in ax {
                let mut q = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Union of closed axis-aligned boxes. A `None` bound means unbounded along
/// that side. The empty union is the empty set.
#[derive(Clone, Debug, PartialEq)]
pub struct Region<T> {
    pub boxes: Vec<BoxSet<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet<T> {
    pub lo: Vec<Option<T>>,
    pub hi: Vec<Option<T>>,
}

impl<T: Real> BoxSet<T> {
    pub fn bounded(lo: Vec<T>, hi: Vec<T>) -> Self {
        Self {
            lo: lo.into_iter().map(Some).collect(),
            hi: hi.into_iter().map(Some).collect(),
        }
    }

    pub fn everything(dim: usize) -> Self {
        Self {
            lo: vec![None; dim],
            hi: vec![None; dim],
        }
    }

    fn axis_bounds(&self, i: usize) -> (Option<T>, Option<T>) {
        (self.lo[i], self.hi[i])
    }

    fn intersect(&self, other: &Self) -> Option<Self> {
        let pick = |a: Option<T>, b: Option<T>, hi: bool| match (a, b) {
            (Some(x), Some(y)) => Some(if hi { x.min(y) } else { x.max(y) }),
            (x, None) => x,
            (None, y) => y,
        };
        let lo: Vec<Option<T>> = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(&a, &b)| pick(a, b, false))
            .collect();
        let hi: Vec<Option<T>> = self.hi.iter().zip(&other.hi).map(|(&a, &b)| pick(a, b, true)).collect();
        let empty = lo
            .iter()
            .zip(&hi)
            .any(|(l, h)| matches!((l, h), (Some(l), Some(h)) if l > h));
        (!empty).then_some(Self { lo, hi })
    }

    fn dilate(&self, w: T) -> Self {
        Self {
            lo: self.lo.iter().map(|b| b.map(|v| v - w)).collect(),
            hi: self.hi.iter().map(|b| b.map(|v| v + w)).collect(),
        }
    }

    fn contains(&self, dom: &Domain<T>, x: &[T]) -> bool {
        (0..x.len()).all(|i| {
            let (lo, hi) = self.axis_bounds(i);
            let xi = match (lo, hi) {
                (Some(l), Some(h)) => dom.wrap_near(i, x[i], (l + h) * T::lit(0.5)),
                _ => x[i],
            };
            lo.is_none_or(|l| xi >= l) && hi.is_none_or(|h| xi <= h)
        })
    }

    /// `1` on the box, `0` off its `w`-dilation.
    fn cutoff(&self, dom: &Domain<T>, x: &[T], w: T) -> T {
        let mut v = T::one();
        for i in 0..x.len() {
            let (lo, hi) = self.axis_bounds(i);
            let xi = match (lo, hi) {
                (Some(l), Some(h)) => dom.wrap_near(i, x[i], (l + h) * T::lit(0.5)),
                _ => x[i],
            };
            let big = T::max_value().sqrt();
            let l = lo.unwrap_or(-big);
            let h = hi.unwrap_or(big);
            v = v * plateau(xi, l, h, w);
            if v == T::zero() {
                break;
            }
        }
        v
    }
}

impl<T: Real> Region<T> {
    pub fn empty() -> Self {
        Self { boxes: Vec::new() }
    }

    pub fn from_box(b: BoxSet<T>) -> Self {
        Self { boxes: vec![b] }
    }

    pub fn bounded(lo: Vec<T>, hi: Vec<T>) -> Self {
        Self::from_box(BoxSet::bounded(lo, hi))
    }

    pub fn everything(dim: usize) -> Self {
        Self::from_box(BoxSet::everything(dim))
    }

    pub fn union(mut self, other: Self) -> Self {
        self.boxes.extend(other.boxes);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Pairwise box intersections. Bounds are compared literally, without
    /// wrapping periodic axes.
    pub fn intersect(&self, other: &Self) -> Self {
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &other.boxes {
                if let Some(c) = a.intersect(b) {
                    boxes.push(c);
                }
            }
        }
        Self { boxes }
    }

    /// Per-axis hull of the boxes, `None` where unbounded. `None` overall
    /// for the empty region.
    pub fn bounding_box(&self) -> Option<(AxisBounds<T>, AxisBounds<T>)> {
        let first = self.boxes.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for b in &self.boxes[1..] {
            for i in 0..lo.len() {
                lo[i] = match (lo[i], b.lo[i]) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    _ => None,
                };
                hi[i] = match (hi[i], b.hi[i]) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    _ => None,
                };
            }
        }
        Some((lo, hi))
    }

    pub fn dilate(&self, w: T) -> Self {
        Self {
            boxes: self.boxes.iter().map(|b| b.dilate(w)).collect(),
        }
    }

    pub fn contains(&self, dom: &Domain<T>, x: &[T]) -> bool {
        self.boxes.iter().any(|b| b.contains(dom, x))
    }

    /// Smooth cutoff: `1` on the region, `0` outside its `w`-dilation.
    pub fn cutoff(&self, dom: &Domain<T>, x: &[T], w: T) -> T {
        let mut miss = T::one();
        for b in &self.boxes {
            miss = miss * (T::one() - b.cutoff(dom, x, w));
            if miss == T::zero() {
                break;
            }
        }
        T::one() - miss
    }
}

/// A C∞ function `E → [0, 1]`.
#[derive(Clone)]
pub struct Cutoff<T> {
    f: ScalarFn<T>,
}

impl<T: Real> Cutoff<T> {
    pub fn new(f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn constant(v: T) -> Self {
        Self::new(move |_| v)
    }

    /// Equal to one on `inner`, vanishing outside `inner` dilated by `w`.
    pub fn around(dom: Domain<T>, inner: Region<T>, w: T) -> Self {
        Self::new(move |x| inner.cutoff(&dom, x, w))
    }

    #[inline]
    pub fn eval(&self, x: &[T]) -> T {
        (self.f)(x)
    }
}

impl<T: Real> std::fmt::Debug for Cutoff<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Cutoff(..)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_wrap_picks_nearest_copy() {
        let d = Domain::new(vec![0.0f64], vec![1.0]).with_periodic(0);
        assert!((d.wrap_near(0, 0.95, 0.05) - (-0.05)).abs() < 1e-15);
        assert!((d.wrap_near(0, 0.2, 0.05) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cutoff_is_one_inside_zero_far() {
        let d = Domain::cube(2, -1.0f64, 1.0);
        let r = Region::bounded(vec![-0.2, -0.2], vec![0.2, 0.2]);
        assert_eq!(r.cutoff(&d, &[0.1, -0.1], 0.1), 1.0);
        assert_eq!(r.cutoff(&d, &[0.5, 0.0], 0.1), 0.0);
        let v = r.cutoff(&d, &[0.25, 0.0], 0.1);
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn periodic_grid_skips_endpoint() {
        let d = Domain::new(vec![0.0f64, 0.0], vec![1.0, 1.0]).with_periodic(0);
        let g = d.grid(&[4, 3]);
        assert_eq!(g.len(), 12);
        assert!(g.iter().all(|p| p[0] < 1.0));
    }

    #[test]
    fn union_and_unbounded_boxes() {
        let d = Domain::new(vec![0.0f64, -1.0], vec![1.0, 2.0]).with_periodic(0);
        let c = Region::from_box(BoxSet {
            lo: vec![None, None],
            hi: vec![None, Some(0.0)],
        })
        .union(Region::from_box(BoxSet {
            lo: vec![None, Some(1.0)],
            hi: vec![None, None],
        }));
        assert!(c.contains(&d, &[0.3, -0.5]));
        assert!(c.contains(&d, &[0.3, 1.5]));
        assert!(!c.contains(&d, &[0.3, 0.5]));
    }
}

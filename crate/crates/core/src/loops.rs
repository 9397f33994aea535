//! Loops and loop families, round trips through surrounding bases,
//! satisfied-or-refund concatenation, gluing over a cover, and the full
//! construction of a surrounding family with prescribed averages.
//!
//! A family is evaluated through [`LoopFamily::at`], which does the per-`x`
//! setup once and returns a [`LoopSlice`]. Slices expose exact partial
//! integrals `∫_0^a γ^t` wherever the construction allows it, so that
//! corrugations computed from them differentiate consistently.

use std::io::Write;
use std::sync::Arc;

use crate::convex::{self, AffineBasis, GridComponent};
use crate::domain::{BoxSet, Cutoff, Domain, Region, ScalarFn};
use crate::error::{Error, Result};
use crate::jetspace::VecFn;
use crate::linalg;
use crate::quadrature;
use crate::reparam::Reparametrized;
use crate::scalar::{frac, Real};
use crate::smooth::{smooth_step, smooth_step_integral};

/// A period-one map `R → F`.
#[derive(Clone)]
pub struct Loop<T> {
    dim: usize,
    f: Arc<dyn Fn(T) -> Vec<T> + Send + Sync>,
}

impl<T: Real> Loop<T> {
    /// `f` must already be 1-periodic.
    pub fn new(dim: usize, f: impl Fn(T) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }

    /// Periodic extension of a map given on `[0, 1)`.
    pub fn from_unit_interval(dim: usize, f: impl Fn(T) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self::new(dim, move |s| f(frac(s)))
    }

    pub fn constant(c: Vec<T>) -> Self {
        let dim = c.len();
        Self::new(dim, move |_| c.clone())
    }

    /// `c + r (cos 2πs, sin 2πs)` in the first two coordinates.
    pub fn circle(center: Vec<T>, r: T) -> Self {
        let dim = center.len();
        Self::new(dim, move |s| {
            let a = T::two_pi() * s;
            let mut v = center.clone();
            v[0] = v[0] + r * a.cos();
            v[1] = v[1] + r * a.sin();
            v
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, s: T) -> Vec<T> {
        (self.f)(s)
    }

    /// `m` samples at `i / m`.
    pub fn sample(&self, m: usize) -> Vec<Vec<T>> {
        (0..m)
            .map(|i| self.eval(T::from_usize_lossy(i) / T::from_usize_lossy(m)))
            .collect()
    }

    /// `max ‖γ(t + 1) − γ(t)‖` over the given times.
    pub fn periodicity_residual(&self, ts: &[T]) -> T {
        ts.iter()
            .map(|&t| linalg::dist(&self.eval(t + T::one()), &self.eval(t)))
            .fold(T::zero(), T::max)
    }

    /// Precompose with a circle map.
    pub fn compose(&self, phi: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        let f = self.f.clone();
        Self::new(self.dim, move |s| f(phi(s)))
    }
}

impl<T: Real> std::fmt::Debug for Loop<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Loop(R -> R^{})", self.dim)
    }
}

/// Composite Simpson average over one period with `m` panels.
pub fn average<T: Real>(gamma: &Loop<T>, m: usize) -> Vec<T> {
    quadrature::quad_integral(|s| gamma.eval(s), T::zero(), T::one(), m)
}

/// An interval of `s` on which `γ¹` is constant and equal to a basis point,
/// grouped per affine basis. `weight` is the share this basis may take in a
/// reparametrisation.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate<T> {
    pub weight: T,
    pub points: Vec<Vec<T>>,
    pub centers: Vec<T>,
    pub half_widths: Vec<T>,
}

impl<T: Real> Certificate<T> {
    fn mapped(&self, weight: T, offset: T, scale: T) -> Self {
        Self {
            weight: self.weight * weight,
            points: self.points.clone(),
            centers: self.centers.iter().map(|&c| offset + scale * c).collect(),
            half_widths: self.half_widths.iter().map(|&w| w * scale).collect(),
        }
    }

    fn shifted(&self, v: &[T]) -> Self {
        let mut c = self.clone();
        for p in &mut c.points {
            linalg::axpy(p, T::one(), v);
        }
        c
    }
}

/// A loop family at a fixed `x`.
pub trait LoopSlice<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    /// `γ^t(s)`, periodic in `s`.
    fn eval(&self, t: T, s: T) -> Vec<T>;
    /// `∫_0^a γ^t(s) ds` for `a ∈ [0, 1]`.
    fn partial_integral(&self, t: T, a: T) -> Vec<T>;
    fn average(&self, t: T) -> Vec<T> {
        self.partial_integral(t, T::one())
    }
    /// Surround certificates of `γ¹` with dwell intervals.
    fn certificates(&self) -> Vec<Certificate<T>> {
        Vec::new()
    }
}

/// `γ : E × [0, 1] × S¹ → F`.
pub trait LoopFamily<T: Real>: Send + Sync {
    fn source_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_>;

    fn eval(&self, x: &[T], t: T, s: T) -> Vec<T> {
        self.at(x).eval(t, s)
    }

    fn average(&self, x: &[T], t: T) -> Vec<T> {
        self.at(x).average(t)
    }
}

pub type DynFamily<T> = Arc<dyn LoopFamily<T>>;

/// Number of Simpson panels used for closure-defined families.
pub const DEFAULT_PANELS: usize = 256;

/// `(x, t, s) ↦ γ^t_x(s)`.
pub type LoopFn<T> = Arc<dyn Fn(&[T], T, T) -> Vec<T> + Send + Sync>;

/// A family given by a closure `(x, t, s) ↦ γ^t_x(s)`; partial integrals by
/// Simpson.
#[derive(Clone)]
pub struct FnFamily<T> {
    source_dim: usize,
    target_dim: usize,
    f: LoopFn<T>,
    panels: usize,
}

impl<T: Real> FnFamily<T> {
    pub fn new(source_dim: usize, target_dim: usize, f: impl Fn(&[T], T, T) -> Vec<T> + Send + Sync + 'static) -> Self {
        Self {
            source_dim,
            target_dim,
            f: Arc::new(f),
            panels: DEFAULT_PANELS,
        }
    }

    pub fn with_panels(mut self, m: usize) -> Self {
        self.panels = m;
        self
    }
}

struct FnSlice<'a, T> {
    fam: &'a FnFamily<T>,
    x: Vec<T>,
}

impl<T: Real> LoopSlice<T> for FnSlice<'_, T> {
    fn dim(&self) -> usize {
        self.fam.target_dim
    }

    fn eval(&self, t: T, s: T) -> Vec<T> {
        (self.fam.f)(&self.x, t, s)
    }

    fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        quadrature::quad_integral(|s| (self.fam.f)(&self.x, t, s), T::zero(), a, self.fam.panels)
    }
}

impl<T: Real> LoopFamily<T> for FnFamily<T> {
    fn source_dim(&self) -> usize {
        self.source_dim
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        Box::new(FnSlice {
            fam: self,
            x: x.to_vec(),
        })
    }
}

/// The constant family `γ^t_x(s) = c(x)`.
#[derive(Clone)]
pub struct ConstantFamily<T> {
    source_dim: usize,
    target_dim: usize,
    c: VecFn<T>,
}

impl<T: Real> ConstantFamily<T> {
    pub fn new(source_dim: usize, target_dim: usize, c: VecFn<T>) -> Self {
        Self {
            source_dim,
            target_dim,
            c,
        }
    }
}

struct ConstSlice<T> {
    c: Vec<T>,
}

impl<T: Real> LoopSlice<T> for ConstSlice<T> {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, _t: T, _s: T) -> Vec<T> {
        self.c.clone()
    }

    fn partial_integral(&self, _t: T, a: T) -> Vec<T> {
        linalg::scale(&self.c, a)
    }
}

impl<T: Real> LoopFamily<T> for ConstantFamily<T> {
    fn source_dim(&self) -> usize {
        self.source_dim
    }

    fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        Box::new(ConstSlice { c: (self.c)(x) })
    }
}

/// Out-and-back traversal of a polyline track `P_0 → … → P_m`.
///
/// The track parameter is `σ = t·h(s)` where `h` rises linearly to `1` at
/// `s = 1/2` (with a smooth turn of half-width `w`) and comes back. On each
/// segment the position is `P_j + S(mσ − j)(P_{j+1} − P_j)`, `S` the smooth
/// step, so the loop is C∞ and flat at `s = 0`.
#[derive(Clone, Debug)]
pub struct RoundTrip<T> {
    points: Vec<Vec<T>>,
    dwell: Vec<usize>,
    w: T,
    k: T,
    source_dim: usize,
}

impl<T: Real> RoundTrip<T> {
    /// Round trip `β → b_0 → … → b_d` with a dwell segment at each waypoint.
    pub fn new(beta: Vec<T>, waypoints: &[Vec<T>]) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidConfig("round trip needs at least one waypoint".into()));
        }
        let mut track = vec![beta];
        let mut dwell = Vec::new();
        for b in waypoints {
            track.push(b.clone());
            dwell.push(track.len() - 1);
            track.push(b.clone());
        }
        Self::from_track(track, dwell)
    }

    /// `dwell` lists segment indices `j` with `P_j = P_{j+1}`.
    pub fn from_track(points: Vec<Vec<T>>, dwell: Vec<usize>) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if points.is_empty() || points.iter().any(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points.iter().map(Vec::len).find(|&l| l != d).unwrap_or(0),
                what: "round trip track",
            });
        }
        let m = (points.len() - 1).max(1);
        let w = T::lit(1.0 / 16.0).min(T::lit(0.3) / T::from_usize_lossy(m));
        let k = T::one() / (T::lit(0.5) - T::lit(4.0) * w * smooth_step_integral(T::lit(0.5)));
        Ok(Self {
            points,
            dwell,
            w,
            k,
            source_dim: 0,
        })
    }

    /// Declare the source dimension when used as an `x`-independent family.
    pub fn with_source_dim(mut self, n: usize) -> Self {
        self.source_dim = n;
        self
    }

    pub fn base(&self) -> &[T] {
        &self.points[0]
    }

    pub fn track(&self) -> &[Vec<T>] {
        &self.points
    }

    fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// The out-and-back time profile `h`.
    pub fn profile(&self, s: T) -> T {
        let s = frac(s);
        let half = T::lit(0.5);
        let u = (s - half + self.w) / (self.w + self.w);
        self.k * (s - T::lit(4.0) * self.w * smooth_step_integral(u))
    }

    fn profile_inverse(&self, sigma: T) -> T {
        let s1 = T::lit(0.5) - self.w;
        if sigma <= self.k * s1 {
            return sigma / self.k;
        }
        let (mut lo, mut hi) = (s1, T::lit(0.5));
        for _ in 0..80 {
            let mid = (lo + hi) * T::lit(0.5);
            if self.profile(mid) < sigma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    }

    /// Position on the track at parameter `σ ∈ [0, 1]`.
    pub fn position(&self, sigma: T) -> Vec<T> {
        let m = self.segments();
        if m == 0 || sigma <= T::zero() {
            return self.points[0].clone();
        }
        if sigma >= T::one() {
            return self.points[m].clone();
        }
        let u = sigma * T::from_usize_lossy(m);
        let j = (u.floor().to_f64_lossy() as usize).min(m - 1);
        let a = smooth_step(u - T::from_usize_lossy(j));
        let mut p = self.points[j].clone();
        for (pi, (&x0, &x1)) in p.iter_mut().zip(self.points[j].iter().zip(&self.points[j + 1])) {
            *pi = x0 + a * (x1 - x0);
        }
        p
    }

    /// `∫_0^c P(t k u) du` for `c` on the linear rise.
    fn rise_integral(&self, t: T, c: T) -> Vec<T> {
        let m = self.segments();
        let mut acc = linalg::scale(&self.points[0], c);
        let rate = T::from_usize_lossy(m) * t * self.k;
        if m == 0 || rate <= T::lit(1e-12) {
            return acc;
        }
        for j in 0..m {
            let u = rate * c - T::from_usize_lossy(j);
            if u <= T::zero() {
                break;
            }
            let a = smooth_step_integral(u) / rate;
            for (ai, (&x0, &x1)) in acc.iter_mut().zip(self.points[j].iter().zip(&self.points[j + 1])) {
                *ai = *ai + a * (x1 - x0);
            }
        }
        acc
    }

    fn turn_integral(&self, t: T, a: T, b: T) -> Vec<T> {
        quadrature::gauss_legendre(|s| self.position(t * self.profile(s)), a, b, 4, self.points[0].len())
    }

    fn own_certificate(&self) -> Option<Certificate<T>> {
        if self.dwell.is_empty() {
            return None;
        }
        let m = T::from_usize_lossy(self.segments());
        let mut centers = Vec::new();
        let mut half_widths = Vec::new();
        let mut points = Vec::new();
        for &j in &self.dwell {
            let lo = self.profile_inverse(T::from_usize_lossy(j) / m);
            let hi = if j + 1 >= self.segments() {
                T::one() - lo
            } else {
                self.profile_inverse(T::from_usize_lossy(j + 1) / m)
            };
            centers.push((lo + hi) * T::lit(0.5));
            half_widths.push((hi - lo) * T::lit(0.5));
            points.push(self.points[j].clone());
        }
        Some(Certificate {
            weight: T::one(),
            points,
            centers,
            half_widths,
        })
    }
}

impl<T: Real> RoundTrip<T> {
    pub fn eval(&self, t: T, s: T) -> Vec<T> {
        self.position(t * self.profile(s))
    }

    /// `∫_0^a γ^t` in closed form off the turn.
    pub fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        let half = T::lit(0.5);
        let s1 = half - self.w;
        let s2 = half + self.w;
        if a <= s1 {
            return self.rise_integral(t, a);
        }
        let mut acc = self.rise_integral(t, s1);
        if a <= s2 {
            linalg::axpy(&mut acc, T::one(), &self.turn_integral(t, s1, a));
            return acc;
        }
        linalg::axpy(&mut acc, T::one(), &self.turn_integral(t, s1, s2));
        let back = linalg::sub(&self.rise_integral(t, s1), &self.rise_integral(t, T::one() - a));
        linalg::axpy(&mut acc, T::one(), &back);
        acc
    }
}

impl<T: Real> LoopSlice<T> for RoundTrip<T> {
    fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn eval(&self, t: T, s: T) -> Vec<T> {
        RoundTrip::eval(self, t, s)
    }

    fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        RoundTrip::partial_integral(self, t, a)
    }

    fn certificates(&self) -> Vec<Certificate<T>> {
        self.own_certificate().into_iter().collect()
    }
}

impl<T: Real> LoopFamily<T> for RoundTrip<T> {
    fn source_dim(&self) -> usize {
        self.source_dim
    }

    fn target_dim(&self) -> usize {
        self.points[0].len()
    }

    fn at(&self, _x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        Box::new(self.clone())
    }
}

/// Spec-level constructor: round trip from `beta` through `waypoints`.
pub fn round_trip_family<T: Real>(beta: &[T], waypoints: &[Vec<T>]) -> Result<RoundTrip<T>> {
    RoundTrip::new(beta.to_vec(), waypoints)
}

/// `γ_x = inner_x + shift(x)`.
#[derive(Clone)]
pub struct Shifted<T> {
    inner: DynFamily<T>,
    shift: VecFn<T>,
    source_dim: usize,
}

impl<T: Real> Shifted<T> {
    pub fn new(inner: DynFamily<T>, source_dim: usize, shift: VecFn<T>) -> Self {
        Self {
            inner,
            shift,
            source_dim,
        }
    }
}

struct ShiftedSlice<'a, T: Real> {
    inner: Box<dyn LoopSlice<T> + 'a>,
    shift: Vec<T>,
}

impl<T: Real> LoopSlice<T> for ShiftedSlice<'_, T> {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn eval(&self, t: T, s: T) -> Vec<T> {
        linalg::add(&self.inner.eval(t, s), &self.shift)
    }

    fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        let mut v = self.inner.partial_integral(t, a);
        linalg::axpy(&mut v, a, &self.shift);
        v
    }

    fn certificates(&self) -> Vec<Certificate<T>> {
        self.inner
            .certificates()
            .iter()
            .map(|c| c.shifted(&self.shift))
            .collect()
    }
}

impl<T: Real> LoopFamily<T> for Shifted<T> {
    fn source_dim(&self) -> usize {
        self.source_dim
    }

    fn target_dim(&self) -> usize {
        self.inner.target_dim()
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        Box::new(ShiftedSlice {
            inner: self.inner.at(x),
            shift: (self.shift)(x),
        })
    }
}

/// The family evaluated at a fixed `x0` for every `x`.
#[derive(Clone)]
pub struct Frozen<T> {
    inner: DynFamily<T>,
    x0: Vec<T>,
}

impl<T: Real> LoopFamily<T> for Frozen<T> {
    fn source_dim(&self) -> usize {
        self.inner.source_dim()
    }

    fn target_dim(&self) -> usize {
        self.inner.target_dim()
    }

    fn at(&self, _x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        self.inner.at(&self.x0)
    }
}

/// `γ^t_x(s) = γ^t_{x0}(s) + β(x) − β(x0)`.
pub fn translate_family<T: Real>(gamma0: DynFamily<T>, x0: &[T], beta: VecFn<T>) -> Shifted<T> {
    let n = x0.len();
    let b0 = beta(x0);
    let frozen = Frozen {
        inner: gamma0,
        x0: x0.to_vec(),
    };
    Shifted::new(Arc::new(frozen), n, Arc::new(move |x: &[T]| linalg::sub(&beta(x), &b0)))
}

/// Time cutoff used by the refund concatenation: `1` on `[0, 3/5]`, `0`
/// from `1` on.
pub fn refund_rho<T: Real>(tau: T) -> T {
    T::one() - smooth_step((tau - T::lit(0.6)) / T::lit(0.4))
}

/// Share of the certificate given to the second copy.
fn refund_kappa<T: Real>(tau: T) -> T {
    smooth_step((tau - T::lit(0.4)) / T::lit(0.2))
}

/// Concatenation `γ0^{ρ(τ)t}` on `[0, 1 − τ]` then `γ1^{ρ(1−τ)t}` on
/// `[1 − τ, 1]`, with `τ` depending on `x`.
#[derive(Clone)]
pub struct Glued<T> {
    g0: DynFamily<T>,
    g1: DynFamily<T>,
    tau: ScalarFn<T>,
}

impl<T: Real> Glued<T> {
    pub fn new(g0: DynFamily<T>, g1: DynFamily<T>, tau: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        Self {
            g0,
            g1,
            tau: Arc::new(tau),
        }
    }

    pub fn tau(&self, x: &[T]) -> T {
        (self.tau)(x).max(T::zero()).min(T::one())
    }
}

struct GluedSlice<'a, T: Real> {
    s0: Box<dyn LoopSlice<T> + 'a>,
    s1: Box<dyn LoopSlice<T> + 'a>,
    tau: T,
}

impl<T: Real> LoopSlice<T> for GluedSlice<'_, T> {
    fn dim(&self) -> usize {
        self.s0.dim()
    }

    fn eval(&self, t: T, s: T) -> Vec<T> {
        let s = frac(s);
        let cut = T::one() - self.tau;
        if s <= cut {
            self.s0.eval(refund_rho(self.tau) * t, s / cut)
        } else {
            self.s1.eval(refund_rho(cut) * t, (s - cut) / self.tau)
        }
    }

    fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        let cut = T::one() - self.tau;
        let t0 = refund_rho(self.tau) * t;
        if a <= cut {
            return linalg::scale(&self.s0.partial_integral(t0, a / cut), cut);
        }
        let mut v = linalg::scale(&self.s0.partial_integral(t0, T::one()), cut);
        let t1 = refund_rho(cut) * t;
        let w = self.s1.partial_integral(t1, (a - cut) / self.tau);
        linalg::axpy(&mut v, self.tau, &w);
        v
    }

    fn certificates(&self) -> Vec<Certificate<T>> {
        let k1 = refund_kappa(self.tau);
        let k0 = T::one() - k1;
        let cut = T::one() - self.tau;
        let mut out = Vec::new();
        if k0 > T::zero() {
            out.extend(self.s0.certificates().iter().map(|c| c.mapped(k0, T::zero(), cut)));
        }
        if k1 > T::zero() {
            out.extend(self.s1.certificates().iter().map(|c| c.mapped(k1, cut, self.tau)));
        }
        out
    }
}

impl<T: Real> LoopFamily<T> for Glued<T> {
    fn source_dim(&self) -> usize {
        self.g0.source_dim()
    }

    fn target_dim(&self) -> usize {
        self.g0.target_dim()
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        let tau = self.tau(x);
        if tau <= T::zero() {
            return self.g0.at(x);
        }
        if tau >= T::one() {
            return self.g1.at(x);
        }
        Box::new(GluedSlice {
            s0: self.g0.at(x),
            s1: self.g1.at(x),
            tau,
        })
    }
}

/// The contraction between two surrounding families, indexed by `τ`.
#[derive(Clone)]
pub struct SatisfiedOrRefund<T> {
    pub g0: DynFamily<T>,
    pub g1: DynFamily<T>,
}

impl<T: Real> SatisfiedOrRefund<T> {
    pub fn family(&self, tau: T) -> Glued<T> {
        Glued::new(self.g0.clone(), self.g1.clone(), move |_| tau)
    }

    pub fn eval(&self, tau: T, x: &[T], t: T, s: T) -> Vec<T> {
        self.family(tau).eval(x, t, s)
    }
}

pub fn satisfied_or_refund<T: Real>(g0: DynFamily<T>, g1: DynFamily<T>) -> SatisfiedOrRefund<T> {
    SatisfiedOrRefund { g0, g1 }
}

/// Equal to `g0` where `cutoff = 1`, to `g1` where `cutoff = 0`.
pub fn glue_families<T: Real>(g0: DynFamily<T>, g1: DynFamily<T>, cutoff: Cutoff<T>) -> Glued<T> {
    Glued::new(g0, g1, move |x| T::one() - cutoff.eval(x))
}

/// `g + χ (γ − g)`.
#[derive(Clone)]
pub struct CutoffBlend<T> {
    inner: DynFamily<T>,
    g: VecFn<T>,
    chi: Cutoff<T>,
}

struct BlendSlice<'a, T: Real> {
    inner: Box<dyn LoopSlice<T> + 'a>,
    g: Vec<T>,
    chi: T,
}

impl<T: Real> LoopSlice<T> for BlendSlice<'_, T> {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn eval(&self, t: T, s: T) -> Vec<T> {
        let v = self.inner.eval(t, s);
        self.g.iter().zip(&v).map(|(&g, &y)| g + self.chi * (y - g)).collect()
    }

    fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        let v = self.inner.partial_integral(t, a);
        self.g
            .iter()
            .zip(&v)
            .map(|(&g, &y)| a * g + self.chi * (y - a * g))
            .collect()
    }
}

impl<T: Real> LoopFamily<T> for CutoffBlend<T> {
    fn source_dim(&self) -> usize {
        self.inner.source_dim()
    }

    fn target_dim(&self) -> usize {
        self.inner.target_dim()
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        let chi = self.chi.eval(x);
        if chi >= T::one() {
            return self.inner.at(x);
        }
        let g = (self.g)(x);
        if chi <= T::zero() {
            return Box::new(ConstSlice { c: g });
        }
        Box::new(BlendSlice {
            inner: self.inner.at(x),
            g,
            chi,
        })
    }
}

/// `(x, y) ↦` radius of a ball around `y` inside `Ω_x` (zero outside).
pub type MarginFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;

/// Inputs of the surrounding-family construction.
#[derive(Clone)]
pub struct LoopLandscape<T> {
    pub omega: MarginFn<T>,
    pub beta: VecFn<T>,
    pub g: VecFn<T>,
    /// Where the output must be the constant loop at `β`.
    pub k: Region<T>,
    pub domain: Domain<T>,
    pub target_dim: usize,
}

#[derive(Clone, Debug)]
pub struct LoopOptions<T> {
    pub cells_per_axis: usize,
    pub max_depth: usize,
    /// Cutoff transition width, as a fraction of the cell width.
    pub overlap: T,
    pub samples_per_axis: usize,
    /// Width of the "near K" dilation.
    pub near: T,
    /// Transition width of the final cutoff around `K`.
    pub blend_width: T,
    /// Positivity floor for surround certificates on validation samples.
    pub mu_valid: T,
    pub lambdas: Vec<T>,
    pub flood_refinements: usize,
    /// Star loops use at most this fraction of the margin at `β`.
    pub star_fraction: T,
}

impl<T: Real> Default for LoopOptions<T> {
    fn default() -> Self {
        Self {
            cells_per_axis: 4,
            max_depth: 3,
            overlap: T::lit(0.25),
            samples_per_axis: 5,
            near: T::lit(0.05),
            blend_width: T::lit(0.05),
            mu_valid: T::lit(0.02),
            lambdas: vec![T::lit(0.05), T::lit(0.01), T::lit(1e-3)],
            flood_refinements: 3,
            star_fraction: T::lit(0.25),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct BuildInfo {
    pub cells: usize,
    pub star_cells: usize,
    pub flood_cells: usize,
    pub lambda: f64,
    pub max_track_len: usize,
}

/// A family surrounding `g` with base `β` inside `Ω`, with average `g`.
#[derive(Clone)]
pub struct SurroundingFamily<T> {
    pub family: DynFamily<T>,
    pub landscape: LoopLandscape<T>,
    pub info: BuildInfo,
}

impl<T: Real> LoopFamily<T> for SurroundingFamily<T> {
    fn source_dim(&self) -> usize {
        self.family.source_dim()
    }

    fn target_dim(&self) -> usize {
        self.family.target_dim()
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        self.family.at(x)
    }
}

/// Extreme member points along `±e_i`, `±e_i ± e_j` and the vertices of
/// a regular simplex and its opposite, deduplicated. Ties go to the point
/// closest to the ray from `g`.
fn extreme_points<T: Real>(comp: &GridComponent<T>, g: &[T]) -> Vec<Vec<T>> {
    let n = comp.dim();
    let mut dirs: Vec<Vec<T>> = Vec::new();
    for i in 0..n {
        for sg in [T::one(), -T::one()] {
            let mut u = vec![T::zero(); n];
            u[i] = sg;
            dirs.push(u);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut u = vec![T::zero(); n];
                u[i] = T::lit(a);
                u[j] = T::lit(b);
                dirs.push(u);
            }
        }
    }
    for u in regular_simplex::<T>(n) {
        dirs.push(u.iter().map(|&v| -v).collect());
        dirs.push(u);
    }
    let pts = comp.points();
    let tie = comp.h * T::lit(1e-6);
    let mut out: Vec<Vec<T>> = Vec::new();
    for u in &dirs {
        let un = linalg::norm(u);
        let score = |p: &Vec<T>| linalg::dot(u, &linalg::sub(p, g)) / un;
        let top = pts.iter().map(score).fold(T::neg_infinity(), T::max);
        let best = pts.iter().filter(|p| score(p) >= top - tie).min_by(|p, q| {
            let off = |p: &Vec<T>| {
                let d = linalg::sub(p, g);
                let along = linalg::dot(u, &d) / (un * un);
                linalg::norm(&linalg::sub(&d, &linalg::scale(u, along)))
            };
            off(p).partial_cmp(&off(q)).unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(b) = best {
            if !out.contains(b) {
                out.push(b.clone());
            }
        }
    }
    out
}

fn line_of_sight<T: Real>(omega: &dyn Fn(&[T]) -> bool, a: &[T], b: &[T], step: T) -> bool {
    let len = linalg::dist(a, b);
    let n = (len / step).ceil().to_f64_lossy().max(1.0) as usize;
    (0..=n).all(|i| {
        let th = T::from_usize_lossy(i) / T::from_usize_lossy(n);
        let p: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x + th * (y - x)).collect();
        omega(&p)
    })
}

/// Greedy shortcutting of a polyline by line-of-sight jumps.
fn simplify<T: Real>(omega: &dyn Fn(&[T]) -> bool, pts: &[Vec<T>], step: T) -> Vec<Vec<T>> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let mut out = vec![pts[0].clone()];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !line_of_sight(omega, &pts[i], &pts[j], step) {
            j -= 1;
        }
        out.push(pts[j].clone());
        i = j;
    }
    out
}

/// A surrounding round trip at a single `x`: flood fill the component of
/// `β` in `Ω_x`, pick an affine basis among its extreme points in which `g`
/// has positive coordinates, and connect the basis points by grid paths.
pub fn surrounding_loop_at<T: Real>(
    omega: &dyn Fn(&[T]) -> bool,
    beta: &[T],
    g: &[T],
    bx: &Domain<T>,
    h: T,
) -> Result<RoundTrip<T>> {
    surrounding_loop_refined(omega, beta, g, bx, h, 3)
}

fn surrounding_loop_refined<T: Real>(
    omega: &dyn Fn(&[T]) -> bool,
    beta: &[T],
    g: &[T],
    bx: &Domain<T>,
    h0: T,
    refinements: usize,
) -> Result<RoundTrip<T>> {
    if !omega(beta) {
        return Err(Error::SeedOutside);
    }
    let mut h = h0;
    let mut last = String::from("no attempt");
    for _ in 0..=refinements {
        match try_surrounding_loop(omega, beta, g, bx, h) {
            Ok(rt) => return Ok(rt),
            Err(e) => last = e.to_string(),
        }
        h = h * T::lit(0.5);
    }
    Err(Error::NotSurrounded(format!(
        "no certified basis around {:?} (last: {last})",
        g.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
    )))
}

fn try_surrounding_loop<T: Real>(
    omega: &dyn Fn(&[T]) -> bool,
    beta: &[T],
    g: &[T],
    bx: &Domain<T>,
    h: T,
) -> Result<RoundTrip<T>> {
    let comp = convex::flood_fill_component(|y: &[T]| omega(y), beta, bx, h)?;
    let cands = extreme_points(&comp, g);
    let mut found = None;
    for mu in [0.15, 0.05, 0.01, 1e-6] {
        if let Some(s) = convex::surrounds(&cands, g, T::lit(mu)) {
            found = Some(s);
            break;
        }
    }
    let sur = found.ok_or_else(|| Error::NotSurrounded("component hull misses target".into()))?;
    let basis: Vec<Vec<T>> = sur.indices.iter().map(|&i| cands[i].clone()).collect();
    let step = h * T::lit(0.25);
    let start = comp
        .nearest(beta)
        .ok_or_else(|| Error::NotSurrounded("empty component".into()))?;
    if !line_of_sight(omega, beta, &comp.point(&start), step) {
        return Err(Error::NotSurrounded("base point not connected to grid".into()));
    }
    let mut track = vec![beta.to_vec()];
    let mut dwell = Vec::new();
    let mut cur = start;
    let mut leg = vec![beta.to_vec()];
    for b in &basis {
        let target = comp
            .nearest(b)
            .ok_or_else(|| Error::NotSurrounded("basis point off grid".into()))?;
        let path = comp
            .shortest_path(&cur, &target)
            .ok_or_else(|| Error::NotSurrounded("basis point unreachable".into()))?;
        for idx in &path {
            let p = comp.point(idx);
            if leg.last() != Some(&p) {
                leg.push(p);
            }
        }
        let simple = simplify(omega, &leg, step);
        track.extend(simple.into_iter().skip(1));
        dwell.push(track.len() - 1);
        track.push(b.clone());
        cur = target;
        leg = vec![b.clone()];
    }
    RoundTrip::from_track(track, dwell)
}

/// Vertices of a regular simplex centred at `0` with unit circumradius.
pub fn regular_simplex<T: Real>(d: usize) -> Vec<Vec<T>> {
    if d == 0 {
        return vec![vec![]];
    }
    let df = T::from_usize_lossy(d);
    let alpha = (T::one() - (df + T::one()).sqrt()) / df;
    let mut pts: Vec<Vec<T>> = (0..d).map(|i| linalg::unit(d, i)).collect();
    pts.push(vec![alpha; d]);
    let c = (T::one() + alpha) / (df + T::one());
    pts.iter()
        .map(|p| {
            let q: Vec<T> = p.iter().map(|&v| v - c).collect();
            let n = linalg::norm(&q);
            linalg::scale(&q, T::one() / n)
        })
        .collect()
}

/// The star round trip through `ε`-scaled simplex vertices, based at `0`.
pub fn star_loop<T: Real>(d: usize, eps: T) -> RoundTrip<T> {
    let verts: Vec<Vec<T>> = regular_simplex(d).iter().map(|v| linalg::scale(v, eps)).collect();
    RoundTrip::new(vec![T::zero(); d], &verts).expect("nonempty simplex")
}

fn index_grid(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Debug)]
struct Cell<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    depth: usize,
}

impl<T: Real> Cell<T> {
    fn center(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| (a + b) * T::lit(0.5))
            .collect()
    }

    fn min_width(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| b - a)
            .fold(T::infinity(), T::min)
    }

    fn children(&self) -> Vec<Cell<T>> {
        let n = self.lo.len();
        let c = self.center();
        (0..(1usize << n))
            .map(|mask| {
                let mut lo = self.lo.clone();
                let mut hi = self.hi.clone();
                for a in 0..n {
                    if (mask >> a) & 1 == 0 {
                        hi[a] = c[a];
                    } else {
                        lo[a] = c[a];
                    }
                }
                Cell {
                    lo,
                    hi,
                    depth: self.depth + 1,
                }
            })
            .collect()
    }

    /// Samples over the cell dilated by `w`, clipped to non-periodic bounds.
    fn samples(&self, dom: &Domain<T>, w: T, per_axis: usize) -> Vec<Vec<T>> {
        let axes: Vec<Vec<T>> = (0..self.lo.len())
            .map(|a| {
                let (mut lo, mut hi) = (self.lo[a] - w, self.hi[a] + w);
                if !dom.periodic[a] {
                    lo = lo.max(dom.lo[a]);
                    hi = hi.min(dom.hi[a]);
                }
                crate::domain::axis_points(lo, hi, per_axis.max(2), false)
            })
            .collect();
        crate::domain::tensor(&axes)
    }
}

enum LeafKind {
    Star,
    Flood,
}

struct Leaf<T> {
    family: DynFamily<T>,
    kind: LeafKind,
    track_len: usize,
}

fn leaf_valid<T: Real>(land: &LoopLandscape<T>, rel: &RoundTrip<T>, samples: &[Vec<T>], safety: T, mu: T) -> bool {
    let cert = match rel.own_certificate() {
        Some(c) => c,
        None => return false,
    };
    let track = rel.track();
    for x in samples {
        let b = (land.beta)(x);
        let g = (land.g)(x);
        let pts: Vec<Vec<T>> = cert.points.iter().map(|p| linalg::add(p, &b)).collect();
        let ok = AffineBasis::new(pts)
            .and_then(|basis| convex::barycentric_coords(&basis, &g))
            .is_ok_and(|c| c.min() >= mu);
        if !ok {
            return false;
        }
        for seg in track.windows(2) {
            let p0 = linalg::add(&seg[0], &b);
            let p1 = linalg::add(&seg[1], &b);
            for i in 0..=8 {
                let th = T::from_usize_lossy(i) / T::lit(8.0);
                let p: Vec<T> = p0.iter().zip(&p1).map(|(&u, &v)| u + th * (v - u)).collect();
                if (land.omega)(x, &p) <= safety {
                    return false;
                }
            }
        }
    }
    true
}

fn star_leaf<T: Real>(land: &LoopLandscape<T>, samples: &[Vec<T>], eps: T, opts: &LoopOptions<T>) -> Option<Leaf<T>> {
    let mut m = T::infinity();
    for x in samples {
        let b = (land.beta)(x);
        m = m.min((land.omega)(x, &b));
    }
    if !(m > T::zero()) {
        return None;
    }
    let scale = samples
        .iter()
        .map(|x| linalg::norm(&(land.beta)(x)))
        .fold(T::one(), T::max);
    let r = (opts.star_fraction * m).min(eps).min(scale);
    let rel = star_loop(land.target_dim, r);
    if !leaf_valid(land, &rel, samples, r * T::lit(0.5), opts.mu_valid) {
        return None;
    }
    let n = land.domain.dim();
    let len = rel.track().len();
    let beta = land.beta.clone();
    Some(Leaf {
        family: Arc::new(Shifted::new(Arc::new(rel.with_source_dim(n)), n, beta)),
        kind: LeafKind::Star,
        track_len: len,
    })
}

fn flood_leaf<T: Real>(
    land: &LoopLandscape<T>,
    cell: &Cell<T>,
    samples: &[Vec<T>],
    opts: &LoopOptions<T>,
) -> Option<Leaf<T>> {
    let xc = cell.center();
    let b = (land.beta)(&xc);
    let g = (land.g)(&xc);
    let mb = (land.omega)(&xc, &b);
    if !(mb > T::zero()) {
        return None;
    }
    let gap = linalg::dist(&b, &g);
    let cap = T::one() + linalg::norm(&b) + linalg::norm(&g);
    let r = (gap * T::lit(2.0))
        .max(T::lit(0.25) * mb.min(cap))
        .max(T::lit(1e-6) * cap);
    let d = land.target_dim;
    let bx = Domain::new(g.iter().map(|&v| v - r).collect(), g.iter().map(|&v| v + r).collect());
    let mut h = r / T::lit(8.0);
    for _ in 0..=opts.flood_refinements {
        let thr = h;
        let omega_x = |y: &[T]| (land.omega)(&xc, y) > thr;
        if let Ok(rt) = surrounding_loop_refined(&omega_x, &b, &g, &bx, h, 0) {
            let rel_pts: Vec<Vec<T>> = rt.track().iter().map(|p| linalg::sub(p, &b)).collect();
            if let Ok(rel) = RoundTrip::from_track(rel_pts, rt.dwell.clone()) {
                if rel.own_certificate().map_or(0, |c| c.points.len()) == d + 1
                    && leaf_valid(land, &rel, samples, thr * T::lit(0.25), opts.mu_valid)
                {
                    let n = land.domain.dim();
                    let len = rel.track().len();
                    let beta = land.beta.clone();
                    return Some(Leaf {
                        family: Arc::new(Shifted::new(Arc::new(rel.with_source_dim(n)), n, beta)),
                        kind: LeafKind::Flood,
                        track_len: len,
                    });
                }
            }
        }
        h = h * T::lit(0.5);
    }
    None
}

/// Build a family of loops based at `β`, inside `Ω`, with average `g`,
/// constant near `K`. `eps` bounds the radius of the small loops used near
/// `K`.
pub fn build_loop_family<T: Real>(
    land: &LoopLandscape<T>,
    eps: T,
    opts: &LoopOptions<T>,
) -> Result<SurroundingFamily<T>> {
    let dom = &land.domain;
    let n = dom.dim();
    let dim_f = land.target_dim;
    let near_zone = land.k.dilate(opts.near + opts.blend_width);
    let base_width = (0..n)
        .map(|a| dom.width(a) / T::from_usize_lossy(opts.cells_per_axis))
        .fold(T::infinity(), T::min);
    let forced_zone = land.k.dilate(opts.near + opts.blend_width + opts.overlap * base_width);

    // Initial cover.
    let axes: Vec<Vec<T>> = (0..n)
        .map(|a| {
            (0..=opts.cells_per_axis)
                .map(|i| dom.lo[a] + dom.width(a) * T::from_usize_lossy(i) / T::from_usize_lossy(opts.cells_per_axis))
                .collect()
        })
        .collect();
    let mut queue: Vec<Cell<T>> = index_grid(n, opts.cells_per_axis)
        .iter()
        .map(|idx| {
            let lo: Vec<T> = (0..n).map(|a| axes[a][idx[a]]).collect();
            let hi: Vec<T> = (0..n).map(|a| axes[a][idx[a] + 1]).collect();
            Cell { lo, hi, depth: 0 }
        })
        .collect();
    queue.reverse();

    // Near K, g must equal β.
    for cell in &queue {
        for x in cell.samples(dom, T::zero(), opts.samples_per_axis) {
            if near_zone.contains(dom, &x) {
                let b = (land.beta)(&x);
                let g = (land.g)(&x);
                if linalg::dist(&b, &g) > T::lit(1e-9) * (T::one() + linalg::norm(&b)) {
                    return Err(Error::NotAccepted(format!(
                        "g differs from beta near K at x = {:?}",
                        x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
                    )));
                }
            }
        }
    }

    let mut floods: Vec<(Cell<T>, Leaf<T>)> = Vec::new();
    let mut stars: Vec<(Cell<T>, Leaf<T>)> = Vec::new();
    while let Some(cell) = queue.pop() {
        let w = opts.overlap * cell.min_width();
        let samples = cell.samples(dom, w, opts.samples_per_axis);
        let forced = cell
            .samples(dom, T::zero(), opts.samples_per_axis)
            .iter()
            .chain(std::iter::once(&cell.center()))
            .any(|x| forced_zone.contains(dom, x));
        let leaf = star_leaf(land, &samples, eps, opts).or_else(|| {
            if forced {
                None
            } else {
                flood_leaf(land, &cell, &samples, opts)
            }
        });
        match leaf {
            Some(l) => match l.kind {
                LeafKind::Star => stars.push((cell, l)),
                LeafKind::Flood => floods.push((cell, l)),
            },
            None if cell.depth < opts.max_depth => {
                let mut ch = cell.children();
                ch.reverse();
                queue.extend(ch);
            }
            None => {
                let c: Vec<f64> = cell.center().iter().map(|v| v.to_f64_lossy()).collect();
                return Err(if forced {
                    Error::MarginExceeded(format!("no safe small loop near K around x = {c:?}"))
                } else {
                    Error::NotSurrounded(format!("no valid surrounding loop on the cell around x = {c:?}"))
                });
            }
        }
    }

    let mut info = BuildInfo {
        cells: floods.len() + stars.len(),
        star_cells: stars.len(),
        flood_cells: floods.len(),
        lambda: 0.0,
        max_track_len: 0,
    };
    let mut acc: DynFamily<T> = Arc::new(ConstantFamily::new(n, dim_f, land.beta.clone()));
    let mut validation: Vec<Vec<T>> = Vec::new();
    for (cell, leaf) in floods.into_iter().chain(stars) {
        info.max_track_len = info.max_track_len.max(leaf.track_len);
        let w = opts.overlap * cell.min_width();
        validation.extend(cell.samples(dom, T::zero(), 3));
        let region = Region::from_box(BoxSet::bounded(cell.lo.clone(), cell.hi.clone()));
        let dom2 = dom.clone();
        acc = Arc::new(Glued::new(acc, leaf.family, move |x| region.cutoff(&dom2, x, w)));
    }

    let mut chosen = None;
    for &lam in &opts.lambdas {
        let rep = Reparametrized::new(acc.clone(), land.g.clone(), lam);
        let ok = validation
            .iter()
            .all(|x| near_zone.contains(dom, x) || rep.min_weight(x).is_ok_and(|w| w >= T::zero()));
        if ok {
            chosen = Some((lam, rep));
            break;
        }
    }
    let (lam, rep) = chosen
        .ok_or_else(|| Error::DegenerateWeights("no leak value keeps the reparametrisation weights positive".into()))?;
    info.lambda = lam.to_f64_lossy();

    let family: DynFamily<T> = if land.k.is_empty() {
        Arc::new(rep)
    } else {
        let inner = land.k.dilate(opts.near);
        let dom2 = dom.clone();
        let bw = opts.blend_width;
        let chi = Cutoff::new(move |x| T::one() - inner.cutoff(&dom2, x, bw));
        Arc::new(CutoffBlend {
            inner: Arc::new(rep),
            g: land.g.clone(),
            chi,
        })
    };
    Ok(SurroundingFamily {
        family,
        landscape: land.clone(),
        info,
    })
}

/// Residuals of the three defining properties on a grid.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct BulletReport {
    /// `max ‖γ^t_x(s) − β(x)‖` over `t = 0` or `s = 0`.
    pub base_residual: f64,
    /// `max ‖⟨γ¹_x⟩ − g(x)‖`.
    pub average_residual: f64,
    /// Smallest margin of `γ^t_x(s)` in `Ω_x`.
    pub min_margin: f64,
    pub points: usize,
}

/// Evaluate the base-point, average and membership properties. Averages
/// use composite Simpson with `avg_panels` panels.
pub fn check_bullets<T: Real>(
    fam: &dyn LoopFamily<T>,
    land: &LoopLandscape<T>,
    xs: &[Vec<T>],
    nt: usize,
    ns: usize,
    avg_panels: usize,
) -> BulletReport {
    let mut rep = BulletReport {
        min_margin: f64::INFINITY,
        ..Default::default()
    };
    for x in xs {
        let sl = fam.at(x);
        let b = (land.beta)(x);
        let g = (land.g)(x);
        for j in 0..ns {
            let s = T::from_usize_lossy(j) / T::from_usize_lossy(ns);
            let r = linalg::dist(&sl.eval(T::zero(), s), &b).to_f64_lossy();
            rep.base_residual = rep.base_residual.max(r);
        }
        for i in 0..nt {
            let t = T::from_usize_lossy(i) / T::from_usize_lossy((nt - 1).max(1));
            let r = linalg::dist(&sl.eval(t, T::zero()), &b).to_f64_lossy();
            rep.base_residual = rep.base_residual.max(r);
            for j in 0..ns {
                let s = T::from_usize_lossy(j) / T::from_usize_lossy(ns);
                let m = (land.omega)(x, &sl.eval(t, s)).to_f64_lossy();
                rep.min_margin = rep.min_margin.min(m);
                rep.points += 1;
            }
        }
        let avg = quadrature::quad_integral(|s| sl.eval(T::one(), s), T::zero(), T::one(), avg_panels);
        rep.average_residual = rep.average_residual.max(linalg::dist(&avg, &g).to_f64_lossy());
    }
    rep
}

/// CSV dump with columns `x0.., t, s, y0..`.
pub fn write_csv<T: Real, W: Write>(
    out: &mut W,
    fam: &dyn LoopFamily<T>,
    xs: &[Vec<T>],
    ts: &[T],
    ns: usize,
) -> std::io::Result<()> {
    let n = fam.source_dim();
    let d = fam.target_dim();
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.push("t".into());
    header.push("s".into());
    header.extend((0..d).map(|i| format!("y{i}")));
    writeln!(out, "{}", header.join(","))?;
    for x in xs {
        let sl = fam.at(x);
        for &t in ts {
            for j in 0..ns {
                let s = T::from_usize_lossy(j) / T::from_usize_lossy(ns);
                let y = sl.eval(t, s);
                let row: Vec<String> = x
                    .iter()
                    .chain(std::iter::once(&t))
                    .chain(std::iter::once(&s))
                    .chain(y.iter())
                    .map(|v| format!("{}", v.to_f64_lossy()))
                    .collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_pts() -> Vec<Vec<f64>> {
        vec![vec![1.0f64, 0.0], vec![-0.5, 0.8], vec![-0.5, -0.8]]
    }

    #[test]
    fn circle_average_vanishes() {
        let c = Loop::circle(vec![0.3f64, -0.2], 1.0);
        let a = average(&c, 64);
        assert!((a[0] - 0.3).abs() < 1e-12 && (a[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn round_trip_base_and_image() {
        let rt = RoundTrip::new(vec![0.0, 0.0], &circle_pts()).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!(linalg::norm(&rt.eval(t, 0.0)) < 1e-15);
        }
        for j in 0..50 {
            assert!(linalg::norm(&rt.eval(0.0, j as f64 / 50.0)) < 1e-15);
        }
        let samples: Vec<Vec<f64>> = (0..512).map(|j| rt.eval(1.0, j as f64 / 512.0)).collect();
        for w in circle_pts() {
            let d = samples
                .iter()
                .map(|p| linalg::dist(p, &w))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-6);
        }
    }

    #[test]
    fn round_trip_partial_integral_matches_quadrature() {
        let rt = RoundTrip::new(vec![0.2, 0.1], &circle_pts()).unwrap();
        for t in [1.0, 0.7, 0.25] {
            for a in [0.1, 0.3, 0.47, 0.5, 0.52, 0.8, 1.0] {
                let exact = rt.partial_integral(t, a);
                let q = quadrature::quad_integral(|s| rt.eval(t, s), 0.0, a, 20000);
                assert!(linalg::dist(&exact, &q) < 1e-8, "t={t} a={a}");
            }
        }
    }

    #[test]
    fn round_trip_partial_integral_differentiates_to_the_loop() {
        let rt = RoundTrip::new(vec![0.2, 0.1], &circle_pts()).unwrap();
        let h = 1e-6;
        for i in 1..100 {
            let a = i as f64 / 100.0;
            let d = linalg::scale(
                &linalg::sub(&rt.partial_integral(1.0, a + h), &rt.partial_integral(1.0, a - h)),
                0.5 / h,
            );
            assert!(linalg::dist(&d, &rt.eval(1.0, a)) < 1e-6, "a={a}");
        }
    }

    #[test]
    fn dwell_certificate_is_constant() {
        let rt = RoundTrip::new(vec![0.0, 0.0], &circle_pts()).unwrap();
        let c = rt.own_certificate().unwrap();
        for ((&cen, &hw), p) in c.centers.iter().zip(&c.half_widths).zip(&c.points) {
            for k in -4..=4 {
                let s = cen + hw * 0.999 * k as f64 / 4.0;
                assert!(linalg::dist(&rt.eval(1.0, s), p) < 1e-12);
            }
        }
    }

    #[test]
    fn refund_endpoints() {
        let a: DynFamily<f64> = Arc::new(RoundTrip::new(vec![0.0, 0.0], &circle_pts()).unwrap());
        let b: DynFamily<f64> = Arc::new(star_loop(2, 0.5));
        let r = satisfied_or_refund(a.clone(), b.clone());
        for j in 0..20 {
            let s = j as f64 / 20.0;
            assert_eq!(r.eval(0.0, &[], 1.0, s), a.eval(&[], 1.0, s));
            assert_eq!(r.eval(1.0, &[], 1.0, s), b.eval(&[], 1.0, s));
        }
    }

    #[test]
    fn simplex_is_regular() {
        let v = regular_simplex::<f64>(3);
        let d01 = linalg::dist(&v[0], &v[1]);
        for i in 0..4 {
            assert!((linalg::norm(&v[i]) - 1.0).abs() < 1e-12);
            for j in i + 1..4 {
                assert!((linalg::dist(&v[i], &v[j]) - d01).abs() < 1e-12);
            }
        }
    }
}

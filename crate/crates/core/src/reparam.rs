//! Circle reparametrisations that spend most of the period near a few points,
//! used to steer the average of a loop.

use crate::convex::{self, AffineBasis};
use crate::error::{Error, Result};
use crate::jetspace::VecFn;
use crate::linalg::{self, Matrix};
use crate::loops::{DynFamily, Loop, LoopFamily, LoopSlice};
use crate::quadrature;
use crate::scalar::{frac, Real};
use crate::smooth::{smooth_step, smooth_step_deriv};

/// Uniform share of time that is never concentrated.
pub const DEFAULT_LEAK: f64 = 1e-3;
/// Smallest admissible weight in [`reparam_from_weights`].
pub const MIN_WEIGHT: f64 = 1e-4;

/// A C∞ bump of unit mass on the circle supported in `(c − η, c + η)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaMollifier<T> {
    pub center: T,
    pub eta: T,
}

impl<T: Real> DeltaMollifier<T> {
    pub fn new(center: T, eta: T) -> Result<Self> {
        if !(eta > T::zero() && eta < T::lit(0.5)) {
            return Err(Error::InvalidConfig(format!(
                "mollifier width {} outside (0, 1/2)",
                eta.to_f64_lossy()
            )));
        }
        Ok(Self {
            center: frac(center),
            eta,
        })
    }

    fn local(&self, u: T) -> T {
        smooth_step((u - self.center + self.eta) / (self.eta + self.eta))
    }

    pub fn eval(&self, s: T) -> T {
        let mut d = frac(s) - self.center;
        if d >= T::lit(0.5) {
            d = d - T::one();
        } else if d < -T::lit(0.5) {
            d = d + T::one();
        }
        if d.abs() >= self.eta {
            return T::zero();
        }
        let two_eta = self.eta + self.eta;
        smooth_step_deriv((d + self.eta) / two_eta) / two_eta
    }

    fn antiderivative(&self, u: T) -> T {
        self.local(u) + self.local(u + T::one()) + self.local(u - T::one())
    }

    /// `∫_0^u δ` for `u ∈ [0, 1]`.
    pub fn cdf(&self, u: T) -> T {
        self.antiderivative(u) - self.antiderivative(T::zero())
    }

    /// The support as an interval of `R` around the centre.
    pub fn support(&self) -> (T, T) {
        (self.center - self.eta, self.center + self.eta)
    }
}

/// `φ = Φ⁻¹` with `Φ(u) = λu + (1 − λ) Σ w_k ∫_0^u δ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleReparam<T> {
    pub lambda: T,
    pub mollifiers: Vec<DeltaMollifier<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> CircleReparam<T> {
    pub fn new(lambda: T, mollifiers: Vec<DeltaMollifier<T>>, weights: Vec<T>) -> Result<Self> {
        if mollifiers.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: mollifiers.len(),
                found: weights.len(),
                what: "reparametrisation weights",
            });
        }
        if !(lambda > T::zero() && lambda <= T::one()) || weights.iter().any(|&w| !(w >= T::zero())) {
            return Err(Error::DegenerateWeights(
                "negative weight or leak outside (0, 1]".into(),
            ));
        }
        Ok(Self {
            lambda,
            mollifiers,
            weights,
        })
    }

    pub fn identity() -> Self {
        Self {
            lambda: T::one(),
            mollifiers: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// `Φ' = ρ`.
    pub fn density(&self, u: T) -> T {
        let bumps: T = self
            .mollifiers
            .iter()
            .zip(&self.weights)
            .map(|(m, &w)| w * m.eval(u))
            .sum();
        self.lambda + (T::one() - self.lambda) * bumps
    }

    /// `Φ` on `[0, 1]`.
    pub fn forward(&self, u: T) -> T {
        let bumps: T = self
            .mollifiers
            .iter()
            .zip(&self.weights)
            .map(|(m, &w)| w * m.cdf(u))
            .sum();
        self.lambda * u + (T::one() - self.lambda) * bumps
    }

    fn invert_unit(&self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        if r >= T::one() {
            return T::one();
        }
        let (mut lo, mut hi) = (T::zero(), T::one());
        for _ in 0..40 {
            let mid = (lo + hi) * T::lit(0.5);
            if self.forward(mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut u = (lo + hi) * T::lit(0.5);
        for _ in 0..3 {
            let step = (self.forward(u) - r) / self.density(u);
            let next = u - step;
            if next < lo || next > hi {
                break;
            }
            u = next;
        }
        u
    }

    /// `φ(s)`, with `φ(s + 1) = φ(s) + 1`.
    pub fn eval(&self, s: T) -> T {
        if self.mollifiers.is_empty() {
            return s;
        }
        let n = s.floor();
        n + self.invert_unit(s - n)
    }

    pub fn derivative(&self, s: T) -> T {
        T::one() / self.density(self.eval(s))
    }
}

/// The reparametrisation with the default leak. Weights must be positive
/// and sum to one, centres distinct.
pub fn reparam_from_weights<T: Real>(weights: &[T], centers: &[T], eta: T) -> Result<CircleReparam<T>> {
    reparam_with_leak(weights, centers, eta, T::lit(DEFAULT_LEAK))
}

pub fn reparam_with_leak<T: Real>(weights: &[T], centers: &[T], eta: T, lambda: T) -> Result<CircleReparam<T>> {
    if weights.len() != centers.len() || weights.is_empty() {
        return Err(Error::DegenerateWeights("weights and centres differ in length".into()));
    }
    let sum: T = weights.iter().copied().sum();
    if weights.iter().any(|&w| !(w >= T::lit(MIN_WEIGHT))) || (sum - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::DegenerateWeights(format!(
            "weights {:?} not positive with unit sum",
            weights.iter().map(|w| w.to_f64_lossy()).collect::<Vec<_>>()
        )));
    }
    let gap = min_gap(centers);
    if !(gap > eta + eta) {
        return Err(Error::DegenerateWeights(
            "centres closer than the mollifier support".into(),
        ));
    }
    let molls = centers
        .iter()
        .map(|&c| DeltaMollifier::new(c, eta))
        .collect::<Result<Vec<_>>>()?;
    CircleReparam::new(lambda, molls, weights.to_vec())
}

/// Smallest circular distance between centres.
fn min_gap<T: Real>(centers: &[T]) -> T {
    let mut c: Vec<T> = centers.iter().map(|&s| frac(s)).collect();
    c.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if c.len() < 2 {
        return T::one();
    }
    let mut gap = c[0] + T::one() - c[c.len() - 1];
    for w in c.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

/// `⟨γ ∘ φ⟩ = ∫ γ ρ du`, by Simpson in `u`.
pub fn reparam_average<T: Real>(gamma: &Loop<T>, rep: &CircleReparam<T>, panels: usize) -> Vec<T> {
    quadrature::quad_integral(
        |u| linalg::scale(&gamma.eval(u), rep.density(u)),
        T::zero(),
        T::one(),
        panels,
    )
}

#[derive(Clone, Debug)]
pub struct AdjustOptions<T> {
    pub lambda: T,
    /// Mollifier half-width; `None` means a quarter of the smallest gap.
    pub eta: Option<T>,
    pub tol: T,
    pub max_iter: usize,
    pub panels: usize,
}

impl<T: Real> Default for AdjustOptions<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(DEFAULT_LEAK),
            eta: None,
            tol: T::lit(1e-10),
            max_iter: 50,
            panels: 4096,
        }
    }
}

/// Weights `w` with `⟨γ ∘ φ_w⟩ = g`, by damped Newton from `w0` with a
/// finite-difference Jacobian on the sum-zero directions.
pub fn adjust_weights<T: Real>(gamma: &Loop<T>, g: &[T], centers: &[T], w0: &[T]) -> Result<Vec<T>> {
    adjust_weights_with(gamma, g, centers, w0, &AdjustOptions::default())
}

pub fn adjust_weights_with<T: Real>(
    gamma: &Loop<T>,
    g: &[T],
    centers: &[T],
    w0: &[T],
    opts: &AdjustOptions<T>,
) -> Result<Vec<T>> {
    let k = centers.len();
    if w0.len() != k || k < 2 {
        return Err(Error::DegenerateWeights(
            "need matching weights for at least two centres".into(),
        ));
    }
    let eta = opts.eta.unwrap_or_else(|| min_gap(centers) * T::lit(0.25));
    let d = g.len();
    let residual = |w: &[T]| -> Result<Vec<T>> {
        let rep = reparam_with_leak(w, centers, eta, opts.lambda)?;
        Ok(linalg::sub(&reparam_average(gamma, &rep, opts.panels), g))
    };
    // Directions e_j − e_0 keep the sum fixed.
    let dirs: Vec<Vec<T>> = (1..k)
        .map(|j| {
            let mut v = vec![T::zero(); k];
            v[0] = -T::one();
            v[j] = T::one();
            v
        })
        .collect();
    let mut w = w0.to_vec();
    let mut r = residual(&w)?;
    let mut rn = linalg::norm(&r);
    let fd = T::lit(1e-6);
    for it in 0..opts.max_iter {
        if rn <= opts.tol {
            return Ok(w);
        }
        let mut jac = Matrix::zeros(d, dirs.len());
        for (c, u) in dirs.iter().enumerate() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            linalg::axpy(&mut wp, fd, u);
            linalg::axpy(&mut wm, -fd, u);
            let col = match (residual(&wp), residual(&wm)) {
                (Ok(a), Ok(b)) => linalg::scale(&linalg::sub(&a, &b), T::one() / (fd + fd)),
                _ => {
                    let a = residual(&wp).or_else(|_| residual(&w))?;
                    linalg::scale(&linalg::sub(&a, &r), T::one() / fd)
                }
            };
            jac.set_column(c, &col);
        }
        let neg: Vec<T> = r.iter().map(|&v| -v).collect();
        let z = if dirs.len() == d {
            jac.solve(&neg)?
        } else {
            jac.least_squares(&neg)?
        };
        let mut step = vec![T::zero(); k];
        for (zi, u) in z.iter().zip(&dirs) {
            linalg::axpy(&mut step, *zi, u);
        }
        let mut alpha = T::one();
        let mut improved = false;
        for _ in 0..30 {
            let mut cand = w.clone();
            linalg::axpy(&mut cand, alpha, &step);
            if let Ok(rc) = residual(&cand) {
                let cn = linalg::norm(&rc);
                if cn < rn {
                    w = cand;
                    r = rc;
                    rn = cn;
                    improved = true;
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }
        if !improved {
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: rn.to_f64_lossy(),
            });
        }
    }
    if rn <= opts.tol {
        Ok(w)
    } else {
        Err(Error::NoConvergence {
            iterations: opts.max_iter,
            residual: rn.to_f64_lossy(),
        })
    }
}

/// Fraction of a dwell half-width used by the mollifier.
const SUPPORT_FRACTION: f64 = 0.9;

/// `γ^t_x ∘ φ_x` with `φ_x` chosen so that `⟨γ¹_x ∘ φ_x⟩ = g(x)`, using the
/// dwell certificates of the inner family.
#[derive(Clone)]
pub struct Reparametrized<T> {
    inner: DynFamily<T>,
    g: VecFn<T>,
    lambda: T,
}

struct Plan<T> {
    rep: CircleReparam<T>,
    points: Vec<Vec<T>>,
    raw_min: T,
}

impl<T: Real> Reparametrized<T> {
    pub fn new(inner: DynFamily<T>, g: VecFn<T>, lambda: T) -> Self {
        Self { inner, g, lambda }
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    fn plan(&self, slice: &dyn LoopSlice<T>, x: &[T]) -> Result<Plan<T>> {
        let certs = slice.certificates();
        if certs.is_empty() {
            return Err(Error::NotSurrounded("no certificate to steer the average".into()));
        }
        let lam = self.lambda;
        let g = (self.g)(x);
        let avg = slice.average(T::one());
        let target: Vec<T> = g
            .iter()
            .zip(&avg)
            .map(|(&gi, &ai)| (gi - lam * ai) / (T::one() - lam))
            .collect();
        let mut molls = Vec::new();
        let mut weights = Vec::new();
        let mut points = Vec::new();
        let mut total = T::zero();
        let mut raw_min = T::infinity();
        for c in &certs {
            let Ok(basis) = AffineBasis::new(c.points.clone()) else {
                continue;
            };
            let bc = convex::barycentric_coords(&basis, &target)?;
            raw_min = raw_min.min(bc.min());
            total = total + c.weight;
            for (k, &b) in bc.weights.iter().enumerate() {
                molls.push(DeltaMollifier::new(
                    c.centers[k],
                    c.half_widths[k] * T::lit(SUPPORT_FRACTION),
                )?);
                weights.push(c.weight * b);
                points.push(c.points[k].clone());
            }
        }
        if !(total > T::zero()) {
            return Err(Error::NotSurrounded("all certificates degenerate".into()));
        }
        for w in &mut weights {
            *w = (*w / total).max(T::zero());
        }
        Ok(Plan {
            rep: CircleReparam::new(lam, molls, weights)?,
            points,
            raw_min,
        })
    }

    /// Smallest barycentric weight before clamping.
    pub fn min_weight(&self, x: &[T]) -> Result<T> {
        let slice = self.inner.at(x);
        Ok(self.plan(slice.as_ref(), x)?.raw_min)
    }

    /// The circle map used at `x`.
    pub fn reparam_at(&self, x: &[T]) -> Result<CircleReparam<T>> {
        let slice = self.inner.at(x);
        Ok(self.plan(slice.as_ref(), x)?.rep)
    }
}

struct ReparamSlice<'a, T: Real> {
    inner: Box<dyn LoopSlice<T> + 'a>,
    rep: CircleReparam<T>,
    points: Vec<Vec<T>>,
}

impl<T: Real> LoopSlice<T> for ReparamSlice<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, t: T, s: T) -> Vec<T> {
        self.inner.eval(t, self.rep.eval(s))
    }

    fn partial_integral(&self, t: T, a: T) -> Vec<T> {
        let b = if a >= T::one() { T::one() } else { self.rep.eval(a) };
        let lam = self.rep.lambda;
        let mut acc = linalg::scale(&self.inner.partial_integral(t, b), lam);
        let d = self.inner.dim();
        for ((m, &w), p) in self.rep.mollifiers.iter().zip(&self.rep.weights).zip(&self.points) {
            if w == T::zero() {
                continue;
            }
            let mut term = linalg::scale(p, m.cdf(b));
            let (lo, hi) = m.support();
            let lo = lo.max(T::zero());
            let hi = hi.min(b);
            if t != T::one() && hi > lo {
                let corr = quadrature::gauss_legendre(
                    |u| {
                        let diff = linalg::sub(&self.inner.eval(t, u), &self.inner.eval(T::one(), u));
                        linalg::scale(&diff, m.eval(u))
                    },
                    lo,
                    hi,
                    4,
                    d,
                );
                linalg::axpy(&mut term, T::one(), &corr);
            }
            linalg::axpy(&mut acc, (T::one() - lam) * w, &term);
        }
        acc
    }
}

impl<T: Real> LoopFamily<T> for Reparametrized<T> {
    fn source_dim(&self) -> usize {
        self.inner.source_dim()
    }

    fn target_dim(&self) -> usize {
        self.inner.target_dim()
    }

    fn at(&self, x: &[T]) -> Box<dyn LoopSlice<T> + '_> {
        let slice = self.inner.at(x);
        match self.plan(slice.as_ref(), x) {
            Ok(plan) => Box::new(ReparamSlice {
                inner: slice,
                rep: plan.rep,
                points: plan.points,
            }),
            Err(_) => slice,
        }
    }
}

/// Reparametrise every loop of `family` so that its average is `g`.
pub fn reparametrize_family<T: Real>(family: DynFamily<T>, g: VecFn<T>, lambda: T) -> Reparametrized<T> {
    Reparametrized::new(family, g, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::RoundTrip;
    use std::sync::Arc;

    #[test]
    fn mollifier_has_unit_mass() {
        for c in [0.5, 0.05, 0.97] {
            let m = DeltaMollifier::new(c, 0.1f64).unwrap();
            let q = quadrature::simpson(|s| m.eval(s), 0.0, 1.0, 4000);
            assert!((q - 1.0).abs() < 1e-10);
            assert!((m.cdf(1.0) - 1.0).abs() < 1e-14);
            assert!(m.cdf(0.0).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_map_is_a_degree_one_diffeo() {
        let rep = reparam_from_weights(&[0.2, 0.3, 0.5], &[0.1, 0.4, 0.75], 0.05f64).unwrap();
        assert_eq!(rep.eval(0.0), 0.0);
        assert!((rep.eval(1.0) - 1.0).abs() < 1e-14);
        let mut prev = -1.0;
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            let u = rep.eval(s);
            assert!(u > prev);
            prev = u;
            assert!((rep.forward(u) - s).abs() < 1e-13);
        }
        assert!((rep.eval(1.3) - 1.0 - rep.eval(0.3)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(reparam_from_weights(&[0.5, 0.6], &[0.1, 0.6], 0.1f64).is_err());
        assert!(reparam_from_weights(&[1.0, 0.0], &[0.1, 0.6], 0.1f64).is_err());
        assert!(reparam_from_weights(&[0.5, 0.5], &[0.1, 0.15], 0.1f64).is_err());
    }

    #[test]
    fn adjusted_weights_hit_the_target() {
        let gamma = Loop::circle(vec![0.0, 0.0], 1.0f64);
        let centers = [0.0, 1.0 / 3.0, 2.0 / 3.0];
        let g = [0.2, -0.1];
        let w = adjust_weights(&gamma, &g, &centers, &[1.0 / 3.0; 3]).unwrap();
        let rep = reparam_from_weights(&w, &centers, 1.0 / 12.0).unwrap();
        let avg = reparam_average(&gamma, &rep, 20000);
        assert!(linalg::dist(&avg, &g) < 1e-8);
    }

    #[test]
    fn reparametrized_round_trip_has_exact_average() {
        let rt = RoundTrip::new(vec![0.0, 0.0], &[vec![1.0, 0.0], vec![-0.5, 0.9], vec![-0.5, -0.9]]).unwrap();
        let fam = Reparametrized::new(Arc::new(rt), Arc::new(|_: &[f64]| vec![0.1, 0.2]), 0.01);
        let sl = fam.at(&[]);
        let a = sl.average(1.0);
        assert!(linalg::dist(&a, &[0.1, 0.2]) < 1e-12);
        let q = quadrature::quad_integral(|s| sl.eval(1.0, s), 0.0, 1.0, 40000);
        assert!(linalg::dist(&q, &[0.1, 0.2]) < 1e-5);
        for t in [0.4, 0.9] {
            for a in [0.2, 0.5, 0.77] {
                let h = 1e-6;
                let d = linalg::scale(
                    &linalg::sub(&sl.partial_integral(t, a + h), &sl.partial_integral(t, a - h)),
                    0.5 / h,
                );
                assert!(linalg::dist(&d, &sl.eval(t, a)) < 1e-5, "t={t} a={a}");
            }
        }
    }
}

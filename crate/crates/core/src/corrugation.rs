//! The corrugation operator `(1/N) ∫_0^{Nπ(x)} (γ_x − ⟨γ_x⟩)`, its remainder
//! and derivative, and the choice of `N`.

use std::sync::Arc;

use crate::diff;
use crate::error::{Error, Result};
use crate::jetspace::DualPair;
use crate::linalg::{self, Matrix};
use crate::loops::{DynFamily, LoopSlice};
use crate::quadrature;
use crate::scalar::{frac, Real};

/// Analytic `∂_x γ^t_x(s)` as a `dim F × dim E` matrix.
pub type FamilyDerivative<T> = Arc<dyn Fn(&[T], T, T) -> Matrix<T> + Send + Sync>;

#[derive(Clone)]
pub struct CorrugationJob<T> {
    pub p: DualPair<T>,
    pub n: T,
    pub family: DynFamily<T>,
    pub dgamma_dx: Option<FamilyDerivative<T>>,
}

impl<T: Real> CorrugationJob<T> {
    pub fn new(p: DualPair<T>, n: T, family: DynFamily<T>) -> Result<Self> {
        if !(n > T::zero()) {
            return Err(Error::InvalidConfig("corrugation frequency must be positive".into()));
        }
        if family.source_dim() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: family.source_dim(),
                what: "loop family source",
            });
        }
        Ok(Self {
            p,
            n,
            family,
            dgamma_dx: None,
        })
    }

    pub fn with_derivative(mut self, d: impl Fn(&[T], T, T) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.dgamma_dx = Some(Arc::new(d));
        self
    }

    pub fn with_n(&self, n: T) -> Self {
        let mut j = self.clone();
        j.n = n;
        j
    }
}

/// `(1/N)(I(r) − r I(1))`, the periodicity-reduced integral at phase `r`.
pub fn reduced<T: Real>(slice: &dyn LoopSlice<T>, n: T, t: T, r: T) -> Vec<T> {
    let full = slice.partial_integral(t, T::one());
    let part = slice.partial_integral(t, r);
    part.iter().zip(&full).map(|(&a, &b)| (a - r * b) / n).collect()
}

fn fd_step<T: Real>(x: &[T]) -> T {
    T::lit(1e-5) * (T::one() + linalg::norm(x))
}

pub fn corrugation<T: Real>(job: &CorrugationJob<T>, x: &[T], t: T) -> Vec<T> {
    let slice = job.family.at(x);
    let r = frac(job.n * job.p.apply_pi(x));
    reduced(slice.as_ref(), job.n, t, r)
}

/// Direct composite Simpson over `[0, Nπ(x)]` with `256⌈N|π(x)|⌉` panels
/// (at least 256), no periodicity reduction.
pub fn corrugation_quadrature<T: Real>(job: &CorrugationJob<T>, x: &[T], t: T) -> Vec<T> {
    let slice = job.family.at(x);
    let avg = slice.average(t);
    let end = job.n * job.p.apply_pi(x);
    let m = (T::lit(256.0) * end.abs().ceil()).to_f64_lossy() as usize;
    let v = quadrature::quad_integral(|s| linalg::sub(&slice.eval(t, s), &avg), T::zero(), end, m.max(256));
    linalg::scale(&v, T::one() / job.n)
}

/// Columnwise corrugation of `∂_x γ`.
pub fn remainder<T: Real>(job: &CorrugationJob<T>, x: &[T], t: T) -> Matrix<T> {
    let r = frac(job.n * job.p.apply_pi(x));
    let nx = x.len();
    let nf = job.family.target_dim();
    if let Some(d) = &job.dgamma_dx {
        let panels = 256;
        let mean = quadrature::quad_integral(|s| d(x, t, s).as_slice().to_vec(), T::zero(), T::one(), panels);
        let part = quadrature::quad_integral(|s| d(x, t, s).as_slice().to_vec(), T::zero(), r, panels);
        let vals: Vec<T> = part.iter().zip(&mean).map(|(&a, &b)| (a - r * b) / job.n).collect();
        return Matrix::from_row_major(nf, nx, vals).expect("derivative shape");
    }
    remainder_at_phase(&job.family, x, job.n, t, r)
}

/// Remainder at a frozen phase `r`, by central differences in `x`.
pub fn remainder_at_phase<T: Real>(family: &DynFamily<T>, x: &[T], n: T, t: T, r: T) -> Matrix<T> {
    let h = fd_step(x);
    let mut m = Matrix::zeros(family.target_dim(), x.len());
    for j in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] = xp[j] + h;
        xm[j] = xm[j] - h;
        let cp = reduced(family.at(&xp).as_ref(), n, t, r);
        let cm = reduced(family.at(&xm).as_ref(), n, t, r);
        m.set_column(j, &linalg::scale(&linalg::sub(&cp, &cm), T::one() / (h + h)));
    }
    m
}

/// `π ⊗ (γ^t_x(Nπ(x)) − ⟨γ^t_x⟩) + Rem`.
pub fn corrugated_derivative<T: Real>(job: &CorrugationJob<T>, x: &[T], t: T) -> Matrix<T> {
    let slice = job.family.at(x);
    let phase = job.n * job.p.apply_pi(x);
    let u = linalg::sub(&slice.eval(t, phase), &slice.average(t));
    Matrix::outer(&u, job.p.pi()).add(&remainder(job, x, t))
}

/// Central finite-difference Jacobian of `x ↦ corrugation(job, x, t)`.
pub fn corrugation_jacobian_fd<T: Real>(job: &CorrugationJob<T>, x: &[T], t: T, h: T) -> Matrix<T> {
    diff::jacobian_with_step(&|y: &[T]| corrugation(job, y, t), x, h)
}

/// Sup norms over a grid for one `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrugationSup<T> {
    pub n: T,
    pub corr: T,
    pub rem: T,
}

/// Slices at the grid points and at the finite-difference neighbours,
/// reused for every `N`.
struct Probe<'a, T: Real> {
    x: Vec<T>,
    pi_x: T,
    center: Box<dyn LoopSlice<T> + 'a>,
    plus: Vec<Box<dyn LoopSlice<T> + 'a>>,
    minus: Vec<Box<dyn LoopSlice<T> + 'a>>,
    h: T,
}

fn probes<'a, T: Real>(fam: &'a DynFamily<T>, p: &DualPair<T>, points: &[Vec<T>]) -> Vec<Probe<'a, T>> {
    points
        .iter()
        .map(|x| {
            let h = fd_step(x);
            let shifted = |sg: T| {
                (0..x.len())
                    .map(|j| {
                        let mut y = x.clone();
                        y[j] = y[j] + sg * h;
                        fam.at(&y)
                    })
                    .collect::<Vec<_>>()
            };
            Probe {
                x: x.clone(),
                pi_x: p.apply_pi(x),
                center: fam.at(x),
                plus: shifted(T::one()),
                minus: shifted(-T::one()),
                h,
            }
        })
        .collect()
}

fn sup_at<T: Real>(probes: &[Probe<'_, T>], ts: &[T], n: T, nf: usize) -> CorrugationSup<T> {
    let mut out = CorrugationSup {
        n,
        corr: T::zero(),
        rem: T::zero(),
    };
    for pr in probes {
        let r = frac(n * pr.pi_x);
        for &t in ts {
            let c = reduced(pr.center.as_ref(), n, t, r);
            out.corr = out.corr.max(linalg::norm(&c));
            let mut m = Matrix::zeros(nf, pr.x.len());
            for j in 0..pr.x.len() {
                let cp = reduced(pr.plus[j].as_ref(), n, t, r);
                let cm = reduced(pr.minus[j].as_ref(), n, t, r);
                m.set_column(j, &linalg::scale(&linalg::sub(&cp, &cm), T::one() / (pr.h + pr.h)));
            }
            out.rem = out.rem.max(m.op_norm());
        }
    }
    out
}

/// Sup of `‖Corr‖` and `‖Rem‖` over `points × ts` for a given `N`.
pub fn corrugation_sup<T: Real>(job: &CorrugationJob<T>, points: &[Vec<T>], ts: &[T]) -> CorrugationSup<T> {
    let pr = probes(&job.family, &job.p, points);
    sup_at(&pr, ts, job.n, job.family.target_dim())
}

pub const MAX_DOUBLINGS: usize = 30;

/// Smallest `N = 2^k`, `k ≤ 30`, with `sup ‖Corr‖ ≤ corr_max` and
/// `sup ‖Rem‖ ≤ rem_max` over `points × ts`.
pub fn choose_n_bounded<T: Real>(
    family: &DynFamily<T>,
    p: &DualPair<T>,
    points: &[Vec<T>],
    ts: &[T],
    corr_max: T,
    rem_max: T,
) -> Result<CorrugationSup<T>> {
    let pr = probes(family, p, points);
    let nf = family.target_dim();
    let mut n = T::one();
    let mut last = None;
    for _ in 0..=MAX_DOUBLINGS {
        let s = sup_at(&pr, ts, n, nf);
        if s.corr <= corr_max && s.rem <= rem_max {
            return Ok(s);
        }
        last = Some(s);
        n = n + n;
    }
    let s = last.expect("at least one trial");
    Err(Error::BudgetExceeded {
        max_n: s.n.to_f64_lossy(),
        corr_sup: s.corr.to_f64_lossy(),
        rem_sup: s.rem.to_f64_lossy(),
    })
}

/// Smallest doubling `N` with both sups at most `eps`.
pub fn choose_n<T: Real>(job: &CorrugationJob<T>, points: &[Vec<T>], ts: &[T], eps: T) -> Result<T> {
    Ok(choose_n_bounded(&job.family, &job.p, points, ts, eps, eps)?.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::{ConstantFamily, FnFamily};

    fn circle_job(n: f64) -> CorrugationJob<f64> {
        let fam = FnFamily::new(2, 2, |_x: &[f64], _t, s: f64| {
            let a = std::f64::consts::TAU * s;
            vec![a.cos(), a.sin()]
        });
        CorrugationJob::new(DualPair::coordinate(2, 0), n, Arc::new(fam)).unwrap()
    }

    #[test]
    fn circle_matches_closed_form() {
        let job = circle_job(4.0);
        for x0 in [-0.7, 0.13, 0.5, 0.91] {
            let c = corrugation(&job, &[x0, 0.3], 1.0);
            let a = std::f64::consts::TAU * 4.0 * x0;
            let tau = std::f64::consts::TAU * 4.0;
            assert!((c[0] - a.sin() / tau).abs() < 1e-10);
            assert!((c[1] - (1.0 - a.cos()) / tau).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_family_has_no_corrugation() {
        let fam = ConstantFamily::new(2, 2, Arc::new(|x: &[f64]| vec![x[0], 2.0]));
        let job = CorrugationJob::new(DualPair::coordinate(2, 1), 8.0, Arc::new(fam)).unwrap();
        let x = [0.3, 0.77];
        assert!(linalg::norm(&corrugation(&job, &x, 0.5)) < 1e-15);
        assert!(remainder(&job, &x, 0.5).max_abs() < 1e-12);
        assert_eq!(choose_n(&job, &[x.to_vec()], &[1.0], 1e-3).unwrap(), 1.0);
    }

    #[test]
    fn reduction_agrees_with_direct_quadrature() {
        let job = circle_job(16.0);
        for x0 in [-0.9, 0.37, 0.64] {
            let a = corrugation(&job, &[x0, 0.0], 1.0);
            let b = corrugation_quadrature(&job, &[x0, 0.0], 1.0);
            assert!(linalg::dist(&a, &b) < 1e-8);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let fam = FnFamily::new(2, 2, |x: &[f64], t: f64, s: f64| {
            let a = std::f64::consts::TAU * s;
            vec![(1.0 + 0.3 * x[1]) * t * a.cos(), x[0] * a.sin() + 0.2 * (2.0 * a).cos()]
        });
        let p = DualPair::new(vec![0.6, 0.8], vec![0.6, 0.8]).unwrap();
        let job = CorrugationJob::new(p, 8.0, Arc::new(fam)).unwrap();
        let x = [0.31, -0.42];
        let d = corrugated_derivative(&job, &x, 0.7);
        let f = corrugation_jacobian_fd(&job, &x, 0.7, 1e-6);
        assert!(d.sub(&f).frobenius() <= 1e-4 * f.frobenius());
    }
}

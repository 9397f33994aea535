//! Closed plane curves, the winding number of their tangent, and the
//! regular homotopy driver.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{BoxSet, Domain, Region};
use crate::error::{Error, Result};
use crate::hprinciple::{self, ConclusionReport, Homotopy, Landscape, StepInfo, StepOptions, VerifyOptions};
use crate::jetspace::{FamilyOfSections, Relation};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::smooth::{smooth_step, smooth_step_deriv};

type CurveFn<T> = Arc<dyn Fn(T) -> [T; 2] + Send + Sync>;

/// A 1-periodic immersed curve with its derivative.
#[derive(Clone)]
pub struct ClosedCurve<T> {
    f: CurveFn<T>,
    df: CurveFn<T>,
}

impl<T: Real> ClosedCurve<T> {
    /// Checks `f′ ≠ 0` on 512 samples.
    pub fn new(
        f: impl Fn(T) -> [T; 2] + Send + Sync + 'static,
        df: impl Fn(T) -> [T; 2] + Send + Sync + 'static,
    ) -> Result<Self> {
        let c = Self {
            f: Arc::new(f),
            df: Arc::new(df),
        };
        for i in 0..512 {
            let s = T::from_usize_lossy(i) / T::lit(512.0);
            let d = c.df(s);
            if !(d[0].hypot(d[1]) > T::zero()) {
                return Err(Error::NotAccepted(format!(
                    "curve is not immersed at s = {}",
                    s.to_f64_lossy()
                )));
            }
        }
        Ok(c)
    }

    pub fn f(&self, s: T) -> [T; 2] {
        (self.f)(s)
    }

    pub fn df(&self, s: T) -> [T; 2] {
        (self.df)(s)
    }

    /// Axis-aligned ellipse `(a cos 2πs, b sin 2πs)`; negative `b` reverses.
    pub fn ellipse(a: T, b: T) -> Result<Self> {
        let tau = T::two_pi();
        Self::new(
            move |s| [a * (tau * s).cos(), b * (tau * s).sin()],
            move |s| [-a * tau * (tau * s).sin(), b * tau * (tau * s).cos()],
        )
    }

    pub fn circle() -> Self {
        Self::ellipse(T::one(), T::one()).expect("circle is immersed")
    }

    pub fn reversed_circle() -> Self {
        Self::ellipse(T::one(), -T::one()).expect("circle is immersed")
    }

    /// `(sin 2πs, sin 4πs)`.
    pub fn figure_eight() -> Self {
        let tau = T::two_pi();
        let two = T::lit(2.0);
        Self::new(
            move |s| [(tau * s).sin(), (two * tau * s).sin()],
            move |s| [tau * (tau * s).cos(), two * tau * (two * tau * s).cos()],
        )
        .expect("figure eight is immersed")
    }
}

impl<T: Real> std::fmt::Debug for ClosedCurve<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ClosedCurve")
    }
}

fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::two_pi();
    let mut r = a % tau;
    if r > T::PI() {
        r = r - tau;
    } else if r <= -T::PI() {
        r = r + tau;
    }
    r
}

/// Total turning of `f′` over one period in units of `2π`, from `samples`
/// equally spaced tangents.
pub fn winding_number_with<T: Real>(c: &ClosedCurve<T>, samples: usize) -> Result<i64> {
    let n = samples.max(3);
    let angle = |i: usize| {
        let d = c.df(T::from_usize_lossy(i) / T::from_usize_lossy(n));
        d[1].atan2(d[0])
    };
    let mut total = T::zero();
    let mut worst = T::zero();
    let mut prev = angle(0);
    for i in 1..=n {
        let a = angle(i % n);
        let d = wrap_angle(a - prev);
        worst = worst.max(d.abs());
        total = total + d;
        prev = a;
    }
    if worst >= T::FRAC_PI_2() {
        return Err(Error::StepTooCoarse {
            max_step: worst.to_f64_lossy(),
        });
    }
    Ok((total / T::two_pi()).round().to_f64_lossy() as i64)
}

/// Winding number of the tangent with 1024 samples, refining once to 4096
/// when a step turns by a quarter turn or more.
pub fn winding_number<T: Real>(c: &ClosedCurve<T>) -> Result<i64> {
    match winding_number_with(c, 1024) {
        Err(Error::StepTooCoarse { .. }) => winding_number_with(c, 4096),
        other => other,
    }
}

/// Continuous lift of `arg(f1′/f0′)`, tabulated so it can be evaluated at
/// any `s` by snapping the principal value to the nearest table entry.
struct AngleGap<T> {
    table: Vec<T>,
}

impl<T: Real> AngleGap<T> {
    fn principal(c0: &ClosedCurve<T>, c1: &ClosedCurve<T>, s: T) -> T {
        let a = c0.df(s);
        let b = c1.df(s);
        // arg(b / a) = arg(b · conj(a))
        let re = b[0] * a[0] + b[1] * a[1];
        let im = b[1] * a[0] - b[0] * a[1];
        im.atan2(re)
    }

    fn new(c0: &ClosedCurve<T>, c1: &ClosedCurve<T>, n: usize) -> Self {
        let tau = T::two_pi();
        let start = |c: &ClosedCurve<T>| {
            let d = c.df(T::zero());
            let a = d[1].atan2(d[0]);
            if a < T::zero() {
                a + tau
            } else {
                a
            }
        };
        let mut table = Vec::with_capacity(n + 1);
        let mut prev = start(c1) - start(c0);
        table.push(prev);
        for i in 1..=n {
            let p = Self::principal(c0, c1, T::from_usize_lossy(i) / T::from_usize_lossy(n));
            prev = prev + wrap_angle(p - prev);
            table.push(prev);
        }
        Self { table }
    }

    fn eval(&self, c0: &ClosedCurve<T>, c1: &ClosedCurve<T>, s: T) -> T {
        let n = self.table.len() - 1;
        let u = s - s.floor();
        let i = ((u * T::from_usize_lossy(n)).round().to_f64_lossy() as usize).min(n);
        let near = self.table[i];
        let p = Self::principal(c0, c1, s);
        p + T::two_pi() * ((near - p) / T::two_pi()).round()
    }
}

#[derive(Clone, Debug)]
pub struct WgOptions<T> {
    /// Parameter width at each end over which the formal family is frozen.
    pub plateau: T,
    pub step: StepOptions<T>,
}

impl<T: Real> Default for WgOptions<T> {
    fn default() -> Self {
        Self {
            plateau: T::lit(0.1),
            step: StepOptions::for_dim(2),
        }
    }
}

/// The output of `whitney_graustein`: the h-principle homotopy on
/// `(s, p) ∈ S¹ × [0, 1]` and the formal family it started from. Frame `p`
/// of the regular homotopy is `s ↦ f_1(s, p)`.
pub struct WhitneyGraustein<T> {
    pub homotopy: Homotopy<T>,
    pub formal: FamilyOfSections<T>,
    pub landscape: Landscape<T>,
    pub winding: i64,
    pub eps: T,
    f0: ClosedCurve<T>,
    f1: ClosedCurve<T>,
}

/// One frame of the regular homotopy.
#[derive(Clone, Debug, Serialize)]
pub struct FrameReport {
    pub p: f64,
    pub immersion_floor: f64,
    pub c0_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WgReport {
    pub winding: i64,
    pub eps: f64,
    pub samples: usize,
    pub frames: Vec<FrameReport>,
    pub immersion_floor: f64,
    pub all_immersed: bool,
    pub endpoint_residual: f64,
    pub endpoints_ok: bool,
    pub c0_deviation: f64,
    pub c0_ok: bool,
    pub steps: Vec<StepInfo>,
}

impl WgReport {
    pub fn all_pass(&self) -> bool {
        self.all_immersed && self.endpoints_ok && self.c0_ok
    }
}

impl<T: Real> WhitneyGraustein<T> {
    /// `f_1(s, p)`.
    pub fn curve(&self, p: T, s: T) -> Vec<T> {
        self.homotopy.f(T::one(), &[s, p])
    }

    /// `∂_s f_1(s, p)`.
    pub fn tangent(&self, p: T, s: T) -> Vec<T> {
        let h = T::lit(1e-6) / self.homotopy.max_frequency();
        self.homotopy.derivative(T::one(), &[s, p], h).column(0)
    }

    /// Sample count per frame: at least `samples`, and at least 16 per
    /// corrugation wavelength.
    pub fn frame_samples(&self, samples: usize) -> usize {
        let n = self.homotopy.max_frequency().to_f64_lossy() as usize;
        samples.max(16 * n)
    }

    /// Immersion floor, endpoint match and C⁰ distance to the formal family
    /// for `frames` equally spaced values of `p`.
    pub fn report(&self, frames: usize, samples: usize) -> WgReport {
        let frames = frames.max(2);
        let m = self.frame_samples(samples);
        let mut out = Vec::with_capacity(frames);
        let mut endpoint = 0.0f64;
        for k in 0..frames {
            let p = T::from_usize_lossy(k) / T::from_usize_lossy(frames - 1);
            let mut floor = f64::INFINITY;
            let mut dev = 0.0f64;
            for i in 0..m {
                let s = T::from_usize_lossy(i) / T::from_usize_lossy(m);
                let d = self.tangent(p, s);
                floor = floor.min(d[0].hypot(d[1]).to_f64_lossy());
                let y = self.curve(p, s);
                let y0 = (self.formal.f)(&[p], &[s]);
                dev = dev.max(crate::linalg::dist(&y, &y0).to_f64_lossy());
                if k == 0 || k == frames - 1 {
                    let target = if k == 0 { self.f0.f(s) } else { self.f1.f(s) };
                    endpoint = endpoint.max(crate::linalg::dist(&y, &target).to_f64_lossy());
                }
            }
            out.push(FrameReport {
                p: p.to_f64_lossy(),
                immersion_floor: floor,
                c0_deviation: dev,
            });
        }
        let floor = out.iter().map(|f| f.immersion_floor).fold(f64::INFINITY, f64::min);
        let dev = out.iter().map(|f| f.c0_deviation).fold(0.0, f64::max);
        WgReport {
            winding: self.winding,
            eps: self.eps.to_f64_lossy(),
            samples: m,
            frames: out,
            immersion_floor: floor,
            all_immersed: floor > 0.0,
            endpoint_residual: endpoint,
            endpoints_ok: endpoint <= 1e-6,
            c0_deviation: dev,
            c0_ok: dev <= self.eps.to_f64_lossy(),
            steps: self.homotopy.steps.clone(),
        }
    }

    /// The h-principle conclusions for the parametric relation on the
    /// `(s, p)` grid.
    pub fn conclusions(&self, opts: &VerifyOptions<T>) -> ConclusionReport {
        let bar = crate::jetspace::bar_family(&self.formal);
        let r = crate::jetspace::parametric_relation(&Relation::immersion(1, 2), 1);
        let holo = vec![vec![T::one(), T::zero()]];
        hprinciple::verify_conclusions(&self.homotopy, &bar, &r, &self.landscape, &holo, self.eps, opts)
    }
}

/// The formal family `p ↦ ((1 − σ)f0 + σ f1, g_σ)` with `σ = σ(p)` frozen
/// near both ends, `g` interpolating lifted tangent angles linearly and
/// speeds log-linearly.
pub fn formal_family<T: Real>(f0: &ClosedCurve<T>, f1: &ClosedCurve<T>, plateau: T) -> FamilyOfSections<T> {
    let gap = Arc::new(AngleGap::new(f0, f1, 1024));
    let sigma = move |p: T| smooth_step((p - plateau) / (T::one() - plateau - plateau));
    let dsigma =
        move |p: T| smooth_step_deriv((p - plateau) / (T::one() - plateau - plateau)) / (T::one() - plateau - plateau);
    let (a0, a1) = (f0.clone(), f1.clone());
    let f = move |p: &[T], x: &[T]| {
        let q = sigma(p[0]);
        let (y0, y1) = (a0.f(x[0]), a1.f(x[0]));
        vec![y0[0] + q * (y1[0] - y0[0]), y0[1] + q * (y1[1] - y0[1])]
    };
    let (a0, a1) = (f0.clone(), f1.clone());
    let phi = move |p: &[T], x: &[T]| {
        let q = sigma(p[0]);
        let s = x[0];
        let d0 = a0.df(s);
        if q == T::zero() {
            return Matrix::column_vector(&d0);
        }
        let d1 = a1.df(s);
        let ratio = d1[0].hypot(d1[1]) / d0[0].hypot(d0[1]);
        let k = ratio.powf(q);
        let (sn, cs) = (q * gap.eval(&a0, &a1, s)).sin_cos();
        Matrix::column_vector(&[k * (cs * d0[0] - sn * d0[1]), k * (sn * d0[0] + cs * d0[1])])
    };
    let (a0, a1) = (f0.clone(), f1.clone());
    let df_dx = move |p: &[T], x: &[T]| {
        let q = sigma(p[0]);
        let (d0, d1) = (a0.df(x[0]), a1.df(x[0]));
        Matrix::column_vector(&[d0[0] + q * (d1[0] - d0[0]), d0[1] + q * (d1[1] - d0[1])])
    };
    let (a0, a1) = (f0.clone(), f1.clone());
    let df_dp = move |p: &[T], x: &[T]| {
        let dq = dsigma(p[0]);
        let (y0, y1) = (a0.f(x[0]), a1.f(x[0]));
        Matrix::column_vector(&[dq * (y1[0] - y0[0]), dq * (y1[1] - y0[1])])
    };
    FamilyOfSections::new(1, 1, 2, f, phi)
        .with_df_dx(df_dx)
        .with_df_dp(df_dp)
}

/// Regular homotopy from `f0` to `f1` through the parametric h-principle
/// for the immersion relation, on the circle `s ∈ [0, 1)` with parameter
/// `p ∈ [0, 1]`. Both ends of the parameter range are kept fixed.
pub fn whitney_graustein<T: Real>(
    f0: &ClosedCurve<T>,
    f1: &ClosedCurve<T>,
    eps: T,
    opts: &WgOptions<T>,
) -> Result<WhitneyGraustein<T>> {
    let w0 = winding_number(f0)?;
    let w1 = winding_number(f1)?;
    if w0 != w1 {
        return Err(Error::WindingMismatch { w0, w1 });
    }
    let a = opts.plateau;
    if !(a > T::zero() && a < T::lit(0.25)) {
        return Err(Error::InvalidConfig("plateau must lie in (0, 1/4)".into()));
    }
    let formal = formal_family(f0, f1, a);
    let half = a * T::lit(0.5);
    let c = Region::from_box(BoxSet {
        lo: vec![None, None],
        hi: vec![None, Some(half)],
    })
    .union(Region::from_box(BoxSet {
        lo: vec![None, Some(T::one() - half)],
        hi: vec![None, None],
    }));
    let domain = Domain::new(vec![T::zero(), T::zero()], vec![T::one(), T::one()]).with_periodic(0);
    let landscape = Landscape::new(c, Region::everything(2), Region::everything(2), domain, T::lit(0.1))?;
    let homotopy = hprinciple::improve_parametric(&Relation::immersion(1, 2), &formal, &landscape, eps, &opts.step)?;
    Ok(WhitneyGraustein {
        homotopy,
        formal,
        landscape,
        winding: w0,
        eps,
        f0: f0.clone(),
        f1: f1.clone(),
    })
}

/// Write `t, s, x, y` rows for `frames` frames of `samples` points each.
pub fn write_frames_csv<T: Real, W: std::io::Write>(
    wg: &WhitneyGraustein<T>,
    frames: usize,
    samples: usize,
    mut w: W,
) -> Result<()> {
    let frames = frames.max(2);
    writeln!(w, "t,s,x,y")?;
    for k in 0..frames {
        let p = T::from_usize_lossy(k) / T::from_usize_lossy(frames - 1);
        for i in 0..samples {
            let s = T::from_usize_lossy(i) / T::from_usize_lossy(samples);
            let y = wg.curve(p, s);
            writeln!(
                w,
                "{},{},{},{}",
                p.to_f64_lossy(),
                s.to_f64_lossy(),
                y[0].to_f64_lossy(),
                y[1].to_f64_lossy()
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winding_of_basic_curves() {
        assert_eq!(winding_number(&ClosedCurve::<f64>::circle()).unwrap(), 1);
        assert_eq!(winding_number(&ClosedCurve::<f64>::reversed_circle()).unwrap(), -1);
        assert_eq!(winding_number(&ClosedCurve::<f64>::figure_eight()).unwrap(), 0);
    }

    #[test]
    fn too_few_samples_is_reported() {
        let c = ClosedCurve::<f64>::circle();
        assert!(matches!(winding_number_with(&c, 3), Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn formal_family_hits_both_tangents() {
        let c0 = ClosedCurve::<f64>::circle();
        let c1 = ClosedCurve::ellipse(1.5, 0.7).unwrap();
        let fam = formal_family(&c0, &c1, 0.1);
        for i in 0..50 {
            let s = i as f64 / 50.0;
            let a = (fam.phi)(&[0.0], &[s]).column(0);
            let b = (fam.phi)(&[1.0], &[s]).column(0);
            let (d0, d1) = (c0.df(s), c1.df(s));
            assert_eq!(a, d0.to_vec());
            assert!((b[0] - d1[0]).abs() + (b[1] - d1[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_windings_are_refused() {
        let e = whitney_graustein(
            &ClosedCurve::<f64>::circle(),
            &ClosedCurve::reversed_circle(),
            0.05,
            &WgOptions::default(),
        );
        assert!(matches!(e, Err(Error::WindingMismatch { w0: 1, w1: -1 })));
    }
}

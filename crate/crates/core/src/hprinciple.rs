//! Landscapes, the inductive improvement step, the fold over a basis, and
//! the parametric version, with grid verification of their conclusions.

use std::sync::Arc;

use serde::Serialize;

use crate::corrugation::{reduced, remainder_at_phase};
use crate::diff;
use crate::domain::{Domain, Region};
use crate::error::{Error, Result};
use crate::jetspace::{self, DualPair, FamilyOfSections, JetSection, OneJet, Relation};
use crate::linalg::{self, Matrix};
use crate::loops::{self, BuildInfo, DynFamily, LoopLandscape, LoopOptions, MarginFn};
use crate::scalar::{frac, Real};
use crate::smooth::smooth_step;

/// `C`, where the input is already holonomic; `K0 ⊂ K1`, where holonomy is
/// wanted and where changes are allowed.
#[derive(Clone, Debug)]
pub struct Landscape<T> {
    pub c: Region<T>,
    pub k0: Region<T>,
    pub k1: Region<T>,
    pub domain: Domain<T>,
}

impl<T: Real> Landscape<T> {
    /// Checks on the domain grid that `K0` dilated by `margin` lies in `K1`.
    pub fn new(c: Region<T>, k0: Region<T>, k1: Region<T>, domain: Domain<T>, margin: T) -> Result<Self> {
        let l = Self { c, k0, k1, domain };
        let grid = l.domain.grid(&vec![41; l.domain.dim()]);
        let fat = l.k0.dilate(margin);
        if let Some(x) = grid
            .iter()
            .find(|x| fat.contains(&l.domain, x) && !l.k1.contains(&l.domain, x))
        {
            return Err(Error::NotAccepted(format!(
                "K0 is not well inside K1 near x = {:?}",
                to_f64(x)
            )));
        }
        Ok(l)
    }
}

/// A landscape with a subspace `E'` and a dual pair `(π, v)`, `E' ⊂ ker π`.
#[derive(Clone, Debug)]
pub struct StepLandscape<T> {
    pub landscape: Landscape<T>,
    pub e_sub: Vec<Vec<T>>,
    pub p: DualPair<T>,
}

impl<T: Real> StepLandscape<T> {
    pub fn new(landscape: Landscape<T>, e_sub: Vec<Vec<T>>, p: DualPair<T>) -> Result<Self> {
        for u in &e_sub {
            if p.apply_pi(u).abs() > T::lit(1e-10) {
                return Err(Error::NotAccepted("subspace not inside ker pi".into()));
            }
        }
        Ok(Self { landscape, e_sub, p })
    }

    /// `E' ⊕ Rv`.
    pub fn improved_subspace(&self) -> Vec<Vec<T>> {
        let mut b = self.e_sub.clone();
        b.push(self.p.v().to_vec());
        b
    }
}

#[derive(Clone, Debug)]
pub struct StepOptions<T> {
    /// Grid points per axis used to probe the landscape.
    pub grid: Vec<usize>,
    /// Width of the "near" dilations.
    pub near: T,
    /// Transition width of the cutoff around `K0`.
    pub rho_width: T,
    pub holonomy_tol: T,
    pub loops: LoopOptions<T>,
    /// Times at which margins and corrugation sizes are probed.
    pub times: Vec<T>,
    /// Loop samples per time when measuring margins.
    pub margin_samples: usize,
    /// Phases at which the corrugation size is probed.
    pub phases: usize,
}

impl<T: Real> StepOptions<T> {
    pub fn for_dim(n: usize) -> Self {
        let per_axis = match n {
            1 => 64,
            2 => 16,
            _ => 6,
        };
        Self {
            grid: vec![per_axis; n],
            near: T::lit(0.02),
            rho_width: T::lit(0.05),
            holonomy_tol: T::lit(1e-3),
            loops: LoopOptions {
                near: T::lit(0.02),
                blend_width: T::lit(0.03),
                ..LoopOptions::default()
            },
            times: vec![T::lit(0.25), T::lit(0.5), T::lit(0.75), T::one()],
            margin_samples: 32,
            phases: 16,
        }
    }
}

/// Grid evidence for the step hypotheses.
#[derive(Clone, Debug, Default, Serialize)]
pub struct AcceptsWitness {
    pub formal: bool,
    pub e_holonomic_near_k0: bool,
    pub holonomic_near_c: bool,
    pub min_margin: f64,
    pub holonomy_k0: f64,
    pub holonomy_c: f64,
    pub witness: Option<Vec<f64>>,
}

impl AcceptsWitness {
    pub fn ok(&self) -> bool {
        self.formal && self.e_holonomic_near_k0 && self.holonomic_near_c
    }
}

pub fn accepts<T: Real>(
    r: &Relation<T>,
    f: &JetSection<T>,
    s: &StepLandscape<T>,
    opts: &StepOptions<T>,
) -> AcceptsWitness {
    let l = &s.landscape;
    let near_k0 = l.k0.dilate(opts.near);
    let near_c = l.c.dilate(opts.near);
    let full: Vec<Vec<T>> = (0..l.domain.dim()).map(|i| linalg::unit(l.domain.dim(), i)).collect();
    let mut w = AcceptsWitness {
        formal: true,
        e_holonomic_near_k0: true,
        holonomic_near_c: true,
        min_margin: f64::INFINITY,
        ..Default::default()
    };
    for x in l.domain.grid(&opts.grid) {
        let m = r.margin(&f.eval(&x)).to_f64_lossy();
        w.min_margin = w.min_margin.min(m);
        if !(m > 0.0) && w.formal {
            w.formal = false;
            w.witness = Some(to_f64(&x));
        }
        if near_k0.contains(&l.domain, &x) {
            let h = f.holonomy_residual(&x, &s.e_sub).to_f64_lossy();
            w.holonomy_k0 = w.holonomy_k0.max(h);
        }
        if near_c.contains(&l.domain, &x) {
            let h = f.holonomy_residual(&x, &full).to_f64_lossy();
            w.holonomy_c = w.holonomy_c.max(h);
        }
    }
    let tol = opts.holonomy_tol.to_f64_lossy();
    w.e_holonomic_near_k0 = w.holonomy_k0 <= tol;
    w.holonomic_near_c = w.holonomy_c <= tol;
    w
}

/// What one improvement step did.
#[derive(Clone, Debug, Default, Serialize)]
pub struct StepInfo {
    pub trivial: bool,
    pub n: f64,
    pub eps: f64,
    pub margin: f64,
    pub corr_sup: f64,
    pub rem_sup: f64,
    pub loops: BuildInfo,
}

type JetAt<T> = Arc<dyn Fn(T, &[T]) -> (Vec<T>, Matrix<T>) + Send + Sync>;
type DerivAt<T> = Arc<dyn Fn(T, &[T]) -> Matrix<T> + Send + Sync>;

/// A family of jet sections `F_t`, `t ∈ [0, 1]`, extended constantly
/// outside.
#[derive(Clone)]
pub struct Homotopy<T> {
    pub source_dim: usize,
    pub target_dim: usize,
    jet: JetAt<T>,
    deriv: Option<DerivAt<T>>,
    pub steps: Vec<StepInfo>,
}

impl<T: Real> Homotopy<T> {
    pub fn new(
        source_dim: usize,
        target_dim: usize,
        jet: impl Fn(T, &[T]) -> (Vec<T>, Matrix<T>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            source_dim,
            target_dim,
            jet: Arc::new(jet),
            deriv: None,
            steps: Vec::new(),
        }
    }

    /// `Df_t` when known in closed form.
    pub fn with_derivative(mut self, d: impl Fn(T, &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(d));
        self
    }

    /// The constant homotopy at `f`.
    pub fn constant(f: &JetSection<T>) -> Self {
        let f1 = f.clone();
        let f2 = f.clone();
        Self::new(f.source_dim, f.target_dim, move |_, x| ((f1.f)(x), (f1.phi)(x)))
            .with_derivative(move |_, x| f2.derivative(x))
    }

    fn clamp(t: T) -> T {
        t.max(T::zero()).min(T::one())
    }

    pub fn eval(&self, t: T, x: &[T]) -> OneJet<T> {
        let (y, phi) = (self.jet)(Self::clamp(t), x);
        OneJet { x: x.to_vec(), y, phi }
    }

    pub fn f(&self, t: T, x: &[T]) -> Vec<T> {
        (self.jet)(Self::clamp(t), x).0
    }

    /// `Df_t(x)`, closed form if known, else central differences with step
    /// `h`.
    pub fn derivative(&self, t: T, x: &[T], h: T) -> Matrix<T> {
        match &self.deriv {
            Some(d) => d(Self::clamp(t), x),
            None => diff::jacobian_with_step(&|y: &[T]| self.f(t, y), x, h),
        }
    }

    /// `F_t` as a section.
    pub fn section_at(&self, t: T) -> JetSection<T> {
        let j1 = self.jet.clone();
        let j2 = self.jet.clone();
        let t = Self::clamp(t);
        let mut s = JetSection::new(
            self.source_dim,
            self.target_dim,
            move |x| j1(t, x).0,
            move |x| j2(t, x).1,
        );
        if let Some(d) = self.deriv.clone() {
            s = s.with_derivative(move |x| d(t, x));
        }
        s
    }

    /// Run the pieces one after another, each on a slot of length `1/k`
    /// entered through a smooth step so the result is C∞ in `t`.
    pub fn concat(parts: &[Homotopy<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidConfig("nothing to concatenate".into()))?;
        let k = parts.len();
        let kt = T::from_usize_lossy(k);
        let locate = move |t: T| {
            let u = Self::clamp(t) * kt;
            let i = (u.floor().to_f64_lossy() as usize).min(k - 1);
            (i, smooth_step(u - T::from_usize_lossy(i)))
        };
        let jets: Vec<JetAt<T>> = parts.iter().map(|h| h.jet.clone()).collect();
        let mut out = Self::new(first.source_dim, first.target_dim, move |t, x| {
            let (i, s) = locate(t);
            jets[i](s, x)
        });
        if parts.iter().all(|h| h.deriv.is_some()) {
            let ds: Vec<DerivAt<T>> = parts.iter().map(|h| h.deriv.clone().expect("checked")).collect();
            out = out.with_derivative(move |t, x| {
                let (i, s) = locate(t);
                ds[i](s, x)
            });
        }
        out.steps = parts.iter().flat_map(|h| h.steps.clone()).collect();
        Ok(out)
    }

    /// Largest corrugation frequency used, `1` if none.
    pub fn max_frequency(&self) -> T {
        self.steps.iter().map(|s| T::lit(s.n)).fold(T::one(), T::max)
    }
}

impl<T: Real> std::fmt::Debug for Homotopy<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Homotopy(R^{} -> R^{}, {} steps)",
            self.source_dim,
            self.target_dim,
            self.steps.len()
        )
    }
}

fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}

/// The domain restricted to the bounding box of `region` padded by `pad`,
/// along non-periodic axes.
fn clip_domain<T: Real>(dom: &Domain<T>, region: &Region<T>, pad: T) -> Domain<T> {
    let mut out = dom.clone();
    if let Some((lo, hi)) = region.bounding_box() {
        for i in 0..dom.dim() {
            if dom.periodic[i] {
                continue;
            }
            if let Some(l) = lo[i] {
                out.lo[i] = dom.lo[i].max(l - pad);
            }
            if let Some(h) = hi[i] {
                out.hi[i] = dom.hi[i].min(h + pad);
            }
            if out.hi[i] <= out.lo[i] {
                out.hi[i] = out.lo[i] + pad;
            }
        }
    }
    out
}

/// One improvement step: makes `F` holonomic along `v` near `K0` through a
/// corrugation in the direction of `π`, keeping it unchanged near `C` and
/// outside `K1` and `eps`-close in the `F` component.
pub fn improve_step<T: Real>(
    r: &Relation<T>,
    f: &JetSection<T>,
    s: &StepLandscape<T>,
    eps: T,
    opts: &StepOptions<T>,
) -> Result<Homotopy<T>> {
    let witness = accepts(r, f, s, opts);
    if !witness.ok() {
        return Err(Error::NotAccepted(format!("{witness:?}")));
    }
    let l = &s.landscape;
    let dom = l.domain.clone();
    let p = s.p.clone();
    let v = p.v().to_vec();
    let pi_norm = linalg::norm(p.pi());

    let probe: Vec<Vec<T>> = dom
        .grid(&opts.grid)
        .into_iter()
        .filter(|x| l.k1.contains(&dom, x))
        .collect();

    let fs = f.clone();
    let v2 = v.clone();
    let g: jetspace::VecFn<T> = Arc::new(move |x: &[T]| fs.derivative_along(x, &v2));
    let fs = f.clone();
    let v2 = v.clone();
    let beta: jetspace::VecFn<T> = Arc::new(move |x: &[T]| (fs.phi)(x).mul_vec(&v2));

    let gap = probe
        .iter()
        .map(|x| {
            let b = beta(x);
            linalg::dist(&g(x), &b) / (T::one() + linalg::norm(&b))
        })
        .fold(T::zero(), T::max);
    if gap <= T::lit(1e-12) {
        let mut h = Homotopy::constant(f);
        h.steps.push(StepInfo {
            trivial: true,
            n: 0.0,
            eps: eps.to_f64_lossy(),
            margin: witness.min_margin,
            ..Default::default()
        });
        return Ok(h);
    }

    let rr = r.clone();
    let fs = f.clone();
    let p2 = p.clone();
    let omega: MarginFn<T> =
        Arc::new(move |x: &[T], w: &[T]| jetspace::slice(&rr, &fs.eval(x), &p2).map_or(T::zero(), |sl| sl.margin(w)));

    let k_loops = l.c.intersect(&l.k1);
    let loop_dom = clip_domain(&dom, &l.k1, opts.rho_width + opts.near);
    let land = LoopLandscape {
        omega: omega.clone(),
        beta: beta.clone(),
        g: g.clone(),
        k: k_loops,
        domain: loop_dom,
        target_dim: f.target_dim,
    };
    for x in &probe {
        if !(omega(x, &beta(x)) > T::zero()) {
            return Err(Error::NotAccepted(format!(
                "formal solution outside the relation at {:?}",
                to_f64(x)
            )));
        }
    }
    let built = loops::build_loop_family(&land, T::infinity(), &opts.loops).map_err(|e| match e {
        Error::NotSurrounded(d) => Error::AmpleSliceEmpty {
            x: Vec::new(),
            detail: d,
        },
        other => other,
    })?;
    let info = built.info.clone();
    let fam: DynFamily<T> = Arc::new(built);

    // Smallest jet margin along the loops, and the phase-swept sizes of the
    // corrugation and remainder at N = 1.
    let mut margin = T::infinity();
    let mut c0 = T::zero();
    let mut r0 = T::zero();
    let mut ts = opts.times.clone();
    ts.insert(0, T::zero());
    for x in &probe {
        let sl = fam.at(x);
        for &t in &ts {
            for j in 0..opts.margin_samples {
                let sv = T::from_usize_lossy(j) / T::from_usize_lossy(opts.margin_samples);
                margin = margin.min(omega(x, &sl.eval(t, sv)) * pi_norm);
            }
        }
        for k in 0..opts.phases {
            let ph = (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(opts.phases);
            for &t in &opts.times {
                c0 = c0.max(linalg::norm(&reduced(sl.as_ref(), T::one(), t, ph)));
                r0 = r0.max(remainder_at_phase(&fam, x, T::one(), t, ph).op_norm());
            }
        }
    }
    if !(margin > T::zero()) {
        return Err(Error::MarginExceeded("loops touch the boundary of the relation".into()));
    }
    let half = margin * T::lit(0.5);
    let corr_max = eps.min(half);
    let mut n = T::one();
    let mut k = 0;
    while c0 / n > corr_max || r0 / n > half {
        n = n + n;
        k += 1;
        if k > crate::corrugation::MAX_DOUBLINGS {
            return Err(Error::BudgetExceeded {
                max_n: (n * T::lit(0.5)).to_f64_lossy(),
                corr_sup: (c0 / n).to_f64_lossy(),
                rem_sup: (r0 / n).to_f64_lossy(),
            });
        }
    }

    let near_k0 = l.k0.dilate(opts.near);
    let rho_w = opts.rho_width;
    let rho_dom = dom.clone();
    let rho = Arc::new(move |x: &[T]| near_k0.cutoff(&rho_dom, x, rho_w));
    for x in dom.grid(&opts.grid) {
        if rho(&x) > T::zero() && !l.k1.contains(&dom, &x) {
            return Err(Error::NotAccepted("cutoff support leaves K1".into()));
        }
    }

    let fs = f.clone();
    let fam2 = fam.clone();
    let p2 = p.clone();
    let rho2 = rho.clone();
    let jet = move |t: T, x: &[T]| {
        let y0 = (fs.f)(x);
        let phi0 = (fs.phi)(x);
        let rx = rho2(x);
        if rx == T::zero() {
            return (y0, phi0);
        }
        let tau = t * rx;
        let sl = fam2.at(x);
        let phase = n * p2.apply_pi(x);
        let ph = frac(phase);
        let corr = reduced(sl.as_ref(), n, T::one(), ph);
        let y = linalg::add(&y0, &linalg::scale(&corr, tau));
        let w = sl.eval(tau, phase);
        let mut phi = p2.update(&phi0, &w).expect("dimensions checked");
        if tau != T::zero() {
            phi = phi.add(&remainder_at_phase(&fam2, x, n, T::one(), ph).scale(tau));
        }
        (y, phi)
    };
    let fs = f.clone();
    let fam3 = fam.clone();
    let p3 = p.clone();
    let rho3 = rho.clone();
    let deriv = move |t: T, x: &[T]| {
        let d0 = fs.derivative(x);
        let rx = rho3(x);
        let grad = diff::jacobian(&|y: &[T]| vec![rho3(y)], x);
        let gnorm = grad.max_abs();
        if rx == T::zero() && gnorm == T::zero() {
            return d0;
        }
        let sl = fam3.at(x);
        let phase = n * p3.apply_pi(x);
        let ph = frac(phase);
        let corr = reduced(sl.as_ref(), n, T::one(), ph);
        let u = linalg::sub(&sl.eval(T::one(), phase), &sl.average(T::one()));
        let dcorr = Matrix::outer(&u, p3.pi()).add(&remainder_at_phase(&fam3, x, n, T::one(), ph));
        let row: Vec<T> = (0..x.len()).map(|j| grad[(0, j)]).collect();
        d0.add(&dcorr.scale(t * rx)).add(&Matrix::outer(&corr, &row).scale(t))
    };
    let mut h = Homotopy::new(f.source_dim, f.target_dim, jet).with_derivative(deriv);
    h.steps.push(StepInfo {
        trivial: false,
        n: n.to_f64_lossy(),
        eps: eps.to_f64_lossy(),
        margin: margin.to_f64_lossy(),
        corr_sup: (c0 / n).to_f64_lossy(),
        rem_sup: (r0 / n).to_f64_lossy(),
        loops: info,
    });
    Ok(h)
}

/// Dual basis: rows of the inverse of the matrix with columns `basis`.
fn dual_pairs<T: Real>(basis: &[Vec<T>]) -> Result<Vec<DualPair<T>>> {
    let m = Matrix::from_cols(basis)?;
    let n = basis.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = vec![T::zero(); n];
        // π_i solves Mᵀ π_i = e_i.
        let sol = m.transpose().solve(&linalg::unit(n, i))?;
        row.copy_from_slice(&sol);
        out.push(DualPair::new(row, basis[i].clone())?);
    }
    Ok(out)
}

/// Fold of improvement steps along `basis`, with `E_i = span(e_1..e_{i-1})`
/// and `eps / n` per step.
pub fn improve<T: Real>(
    r: &Relation<T>,
    f0: &JetSection<T>,
    l: &Landscape<T>,
    eps: T,
    basis: &[Vec<T>],
    opts: &StepOptions<T>,
) -> Result<Homotopy<T>> {
    let pairs = dual_pairs(basis)?;
    let per = eps / T::from_usize_lossy(basis.len());
    let mut parts = Vec::new();
    let mut current = f0.clone();
    for (i, p) in pairs.into_iter().enumerate() {
        let step = StepLandscape::new(l.clone(), basis[..i].to_vec(), p).map_err(|e| Error::StepFailed {
            step: i + 1,
            source: Box::new(e),
        })?;
        let h = improve_step(r, &current, &step, per, opts).map_err(|e| Error::StepFailed {
            step: i + 1,
            source: Box::new(e),
        })?;
        current = h.section_at(T::one());
        parts.push(h);
    }
    Homotopy::concat(&parts)
}

/// `improve` on `E × P` for a family of formal solutions. Coordinates are
/// ordered `(x, p)`; the parameter directions are processed first.
pub fn improve_parametric<T: Real>(
    r: &Relation<T>,
    fam: &FamilyOfSections<T>,
    l: &Landscape<T>,
    eps: T,
    opts: &StepOptions<T>,
) -> Result<Homotopy<T>> {
    let e = fam.source_dim;
    let np = fam.param_dim;
    let bar = jetspace::bar_family(fam);
    let rp = jetspace::parametric_relation(r, np);
    let n = e + np;
    let basis: Vec<Vec<T>> = (e..n).chain(0..e).map(|i| linalg::unit(n, i)).collect();
    improve(&rp, &bar, l, eps, &basis, opts)
}

/// One verified property.
#[derive(Clone, Debug, Serialize)]
pub struct BulletResult {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ConclusionReport {
    pub bullets: Vec<BulletResult>,
    pub points: usize,
}

impl ConclusionReport {
    pub fn all_pass(&self) -> bool {
        self.bullets.iter().all(|b| b.pass)
    }

    pub fn get(&self, name: &str) -> Option<&BulletResult> {
        self.bullets.iter().find(|b| b.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions<T> {
    pub grid: Vec<usize>,
    pub times: usize,
    pub near: T,
    pub start_tol: T,
    pub unchanged_tol: T,
    pub holonomy_tol: T,
}

impl<T: Real> VerifyOptions<T> {
    pub fn for_dim(n: usize) -> Self {
        let per_axis = match n {
            1 => 256,
            2 => 24,
            _ => 8,
        };
        Self {
            grid: vec![per_axis; n],
            times: 5,
            near: T::lit(0.02),
            start_tol: T::lit(1e-9),
            unchanged_tol: T::lit(1e-12),
            holonomy_tol: T::lit(1e-3),
        }
    }
}

fn jet_dist<T: Real>(a: &OneJet<T>, b: &OneJet<T>) -> T {
    linalg::dist(&a.y, &b.y).max(a.phi.sub(&b.phi).max_abs())
}

fn track(b: &mut BulletResult, r: f64, x: &[f64]) {
    if r > b.residual || (r.is_nan() && !b.residual.is_nan()) {
        b.residual = r;
        b.witness = Some(x.to_vec());
    }
}

fn bullet(name: &str, tol: f64) -> BulletResult {
    BulletResult {
        name: name.into(),
        residual: 0.0,
        tol,
        pass: true,
        witness: None,
    }
}

/// Grid check of the five step conclusions: starts at `F0`, stays in `R`,
/// unchanged near `C` and outside `K1`, `eps`-close in `F`, holonomic on
/// `holonomic` near `K0` at the end. Holonomy uses finite differences of
/// `f_1` with step `1e-6 / N`, far below the corrugation wavelength.
pub fn verify_conclusions<T: Real>(
    hom: &Homotopy<T>,
    f0: &JetSection<T>,
    r: &Relation<T>,
    l: &Landscape<T>,
    holonomic: &[Vec<T>],
    eps: T,
    opts: &VerifyOptions<T>,
) -> ConclusionReport {
    let dom = &l.domain;
    let near_c = l.c.dilate(opts.near);
    let near_k0 = l.k0.dilate(opts.near);
    let mut start = bullet("starts_at_f0", opts.start_tol.to_f64_lossy());
    let mut member = bullet("in_relation", 0.0);
    let mut unchanged = bullet("unchanged_near_c_and_off_k1", opts.unchanged_tol.to_f64_lossy());
    let mut close = bullet("c0_close", eps.to_f64_lossy());
    let mut holo = bullet("holonomic_near_k0", opts.holonomy_tol.to_f64_lossy());
    let grid = dom.grid(&opts.grid);
    let h = T::lit(1e-6) / hom.max_frequency();
    let nt = opts.times.max(2);
    let mut worst_margin = f64::INFINITY;
    for x in &grid {
        let xf = to_f64(x);
        let base = f0.eval(x);
        track(&mut start, jet_dist(&hom.eval(T::zero(), x), &base).to_f64_lossy(), &xf);
        let frozen = near_c.contains(dom, x) || !l.k1.contains(dom, x);
        for i in 0..nt {
            let t = T::from_usize_lossy(i) / T::from_usize_lossy(nt - 1);
            let j = hom.eval(t, x);
            let m = r.margin(&j).to_f64_lossy();
            if m < worst_margin {
                worst_margin = m;
                if !(m > 0.0) {
                    member.witness = Some(xf.clone());
                }
            }
            track(&mut close, linalg::dist(&j.y, &base.y).to_f64_lossy(), &xf);
            if frozen {
                track(&mut unchanged, jet_dist(&j, &base).to_f64_lossy(), &xf);
            }
        }
        if near_k0.contains(dom, x) && !holonomic.is_empty() {
            let phi = hom.eval(T::one(), x).phi;
            for u in holonomic {
                let du = diff::directional(&|y: &[T]| hom.f(T::one(), y), x, u, h);
                let res = linalg::norm(&linalg::sub(&du, &phi.mul_vec(u))) / (T::one() + linalg::norm(u));
                track(&mut holo, res.to_f64_lossy(), &xf);
            }
        }
    }
    member.residual = -worst_margin;
    member.pass = worst_margin > 0.0;
    start.pass = start.residual <= start.tol;
    unchanged.pass = unchanged.residual <= unchanged.tol;
    close.pass = close.residual <= close.tol;
    holo.pass = holo.residual <= holo.tol;
    ConclusionReport {
        bullets: vec![start, member, unchanged, close, holo],
        points: grid.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_landscape() -> Landscape<f64> {
        Landscape::new(
            Region::empty(),
            Region::bounded(vec![-0.5], vec![0.5]),
            Region::bounded(vec![-0.8], vec![0.8]),
            Domain::new(vec![-1.0], vec![1.0]),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn concat_hits_endpoints() {
        let a = Homotopy::new(1, 1, |t: f64, x: &[f64]| (vec![x[0] + t], Matrix::identity(1)));
        let b = Homotopy::new(1, 1, |t: f64, x: &[f64]| {
            (vec![x[0] + 1.0 + 2.0 * t], Matrix::identity(1))
        });
        let c = Homotopy::concat(&[a, b]).unwrap();
        assert_eq!(c.f(0.0, &[0.5]), vec![0.5]);
        assert_eq!(c.f(0.5, &[0.5]), vec![1.5]);
        assert_eq!(c.f(1.0, &[0.5]), vec![3.5]);
        assert_eq!(c.f(7.0, &[0.5]), vec![3.5]);
    }

    #[test]
    fn rejects_inconsistent_pair() {
        let p = DualPair::new(vec![1.0, 0.0], vec![1.0, 3.0]).unwrap();
        let l = Landscape::new(
            Region::empty(),
            Region::empty(),
            Region::empty(),
            Domain::cube(2, 0.0, 1.0),
            0.1,
        )
        .unwrap();
        assert!(StepLandscape::new(l, vec![vec![1.0, 0.0]], p).is_err());
    }

    #[test]
    fn identity_homotopy_verifies() {
        let f = JetSection::holonomic(
            1,
            2,
            |x: &[f64]| vec![x[0], x[0] * x[0]],
            |x: &[f64]| Matrix::from_cols(&[vec![1.0, 2.0 * x[0]]]).unwrap(),
        );
        let l = line_landscape();
        let h = Homotopy::constant(&f);
        let rep = verify_conclusions(
            &h,
            &f,
            &Relation::immersion(1, 2),
            &l,
            &[vec![1.0]],
            0.1,
            &VerifyOptions::for_dim(1),
        );
        assert!(rep.all_pass(), "{rep:?}");
        assert_eq!(rep.get("starts_at_f0").unwrap().residual, 0.0);
    }

    #[test]
    fn zeroed_phi_breaks_membership() {
        let f = JetSection::holonomic(
            1,
            2,
            |x: &[f64]| vec![x[0], 0.0],
            |_| Matrix::from_cols(&[vec![1.0, 0.0]]).unwrap(),
        );
        let h = Homotopy::new(1, 2, |_, x: &[f64]| (vec![x[0], 0.0], Matrix::zeros(2, 1)));
        let rep = verify_conclusions(
            &h,
            &f,
            &Relation::immersion(1, 2),
            &line_landscape(),
            &[],
            0.1,
            &VerifyOptions::for_dim(1),
        );
        let b = rep.get("in_relation").unwrap();
        assert!(!b.pass && b.witness.is_some());
    }

    #[test]
    fn one_step_makes_a_formal_immersion_holonomic() {
        // f = (0.3x, 0) has f' = (0.3, 0) but φ = (0, 1): formal, not holonomic.
        let f = JetSection::new(
            1,
            2,
            |x: &[f64]| vec![0.3 * x[0], 0.0],
            |_| Matrix::from_cols(&[vec![0.0, 1.0]]).unwrap(),
        )
        .with_derivative(|_| Matrix::from_cols(&[vec![0.3, 0.0]]).unwrap());
        let l = line_landscape();
        let r = Relation::immersion(1, 2);
        let h = improve(&r, &f, &l, 0.05, &[vec![1.0]], &StepOptions::for_dim(1)).unwrap();
        let rep = verify_conclusions(&h, &f, &r, &l, &[vec![1.0]], 0.05, &VerifyOptions::for_dim(1));
        assert!(rep.all_pass(), "{rep:#?}");
    }
}

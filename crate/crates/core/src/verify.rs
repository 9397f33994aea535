//! Seeded test instances and the verification suites behind `verify`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex::{self, AffineBasis};
use crate::corrugation::{self, CorrugationJob};
use crate::demos::sphere::{self, SliceGrid, SphereRelationConfig};
use crate::domain::{Domain, Region};
use crate::error::{Error, Result};
use crate::jetspace::{DualPair, OneJet};
use crate::linalg;
use crate::loops::{self, DynFamily, FnFamily, Loop, LoopFamily, LoopLandscape, LoopOptions, SurroundingFamily};
use crate::quadrature;
use crate::reparam::{self, CircleReparam};
use crate::scalar::Real;

pub const SUITES: [&str; 5] = ["corrugation", "loops", "reparam", "convex", "sphere"];

/// One row of a residual table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `residual <= tol`.
    pub fn at_most(suite: &str, name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            residual,
            tol,
            pass: residual <= tol,
        }
    }

    /// Passes when `residual > tol`.
    pub fn above(suite: &str, name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            residual,
            tol,
            pass: residual > tol,
        }
    }

    pub fn flag(suite: &str, name: impl Into<String>, ok: bool) -> Self {
        Self {
            suite: suite.into(),
            name: name.into(),
            residual: if ok { 0.0 } else { 1.0 },
            tol: 0.0,
            pass: ok,
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- instances

/// `γ^t_x(s) = (cos 2πs, sin 2πs)` on `R^2`.
pub fn circle_family<T: Real>() -> DynFamily<T> {
    Arc::new(FnFamily::new(2, 2, |_x: &[T], _t: T, s: T| {
        let a = T::two_pi() * s;
        vec![a.cos(), a.sin()]
    }))
}

/// A family on `R^2 → R^2` whose Fourier coefficients (modes 1 to 3) vary
/// smoothly in `x` and scale with `t`, plus an `x`-dependent centre.
pub fn trig_family<T: Real>(rng: &mut impl Rng) -> DynFamily<T> {
    let mut c = || T::lit(rng.gen_range(-1.0..1.0));
    let coef: Vec<[T; 4]> = (0..6).map(|_| [c(), c(), c(), c()]).collect();
    let centre = [c(), c(), c(), c()];
    Arc::new(FnFamily::new(2, 2, move |x: &[T], t: T, s: T| {
        let mut out = vec![
            centre[0] + centre[1] * x[0] * x[1],
            centre[2] * (x[0] - x[1]).sin() + centre[3],
        ];
        for (k, a) in coef.iter().enumerate() {
            let mode = T::from_usize_lossy(k % 3 + 1);
            let amp = a[0] + a[1] * (x[0] + a[2] * x[1]).sin() * T::lit(0.5);
            let ph = T::two_pi() * mode * s + a[3];
            out[k / 3] = out[k / 3] + t * amp * ph.cos() * T::lit(0.5);
        }
        out
    }))
}

/// `E = R`, `F = R^2`: `Ω_x` is the plane minus the point `(0.2x, 0)`,
/// `β = (1, 0)`, and `g(x)` lies across the hole from `β`.
pub fn line_landscape<T: Real>() -> LoopLandscape<T> {
    let hole = |x: &[T]| vec![T::lit(0.2) * x[0], T::zero()];
    LoopLandscape {
        omega: Arc::new(move |x: &[T], w: &[T]| linalg::dist(w, &hole(x))),
        beta: Arc::new(|_: &[T]| vec![T::one(), T::zero()]),
        g: Arc::new(|x: &[T]| vec![T::lit(-0.6) + T::lit(0.2) * x[0], T::lit(0.3) * (T::PI() * x[0]).sin()]),
        k: Region::empty(),
        domain: Domain::new(vec![-T::one()], vec![T::one()]),
        target_dim: 2,
    }
}

/// A smooth loop in the plane, sample parameters whose images form an
/// affine basis, and a target with barycentric coordinates at least 0.15 in
/// that basis.
pub struct ReparamInstance<T> {
    pub gamma: Loop<T>,
    pub centers: Vec<T>,
    pub g: Vec<T>,
}

pub fn reparam_instance<T: Real>(rng: &mut impl Rng) -> ReparamInstance<T> {
    loop {
        let r1 = T::lit(rng.gen_range(0.8..1.2));
        let r2 = T::lit(rng.gen_range(0.8..1.2));
        let e1 = T::lit(rng.gen_range(0.0..0.2));
        let e2 = T::lit(rng.gen_range(0.0..0.2));
        let ph = T::lit(rng.gen_range(0.0..std::f64::consts::TAU));
        let gamma = Loop::new(2, move |s: T| {
            let a = T::two_pi() * s;
            vec![
                r1 * a.cos() + e1 * (a + a + ph).cos(),
                r2 * a.sin() + e2 * (T::lit(3.0) * a).sin(),
            ]
        });
        let centers: Vec<T> = (0..3)
            .map(|i| T::lit(i as f64 / 3.0 + rng.gen_range(0.0..0.08)))
            .collect();
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.15..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let lam: Vec<T> = raw.iter().map(|v| T::lit(v / sum)).collect();
        if lam.iter().any(|&l| l < T::lit(0.15)) {
            continue;
        }
        let pts: Vec<Vec<T>> = centers.iter().map(|&c| gamma.eval(c)).collect();
        let mut g = vec![T::zero(); 2];
        for (p, &l) in pts.iter().zip(&lam) {
            linalg::axpy(&mut g, l, p);
        }
        if convex::surrounds(&pts, &g, T::lit(0.1)).is_some() {
            return ReparamInstance { gamma, centers, g };
        }
    }
}

/// `∫_0^1 γ(φ(s)) ds` by 8-point Gauss–Legendre on the `s`-panels whose
/// images under `φ` are `panels` equal steps in `u`.
pub fn average_in_s<T: Real>(gamma: &Loop<T>, rep: &CircleReparam<T>, panels: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); gamma.dim()];
    let mut a = T::zero();
    for k in 1..=panels {
        let b = rep.forward(T::from_usize_lossy(k) / T::from_usize_lossy(panels));
        let part = quadrature::gauss_legendre(|s| gamma.eval(rep.eval(s)), a, b, 1, gamma.dim());
        linalg::axpy(&mut acc, T::one(), &part);
        a = b;
    }
    acc
}

/// Sampled image of `γ^t_x` at `m` points.
pub fn loop_samples<T: Real>(fam: &dyn LoopFamily<T>, x: &[T], t: T, m: usize) -> Vec<Vec<T>> {
    let sl = fam.at(x);
    (0..m)
        .map(|j| sl.eval(t, T::from_usize_lossy(j) / T::from_usize_lossy(m)))
        .collect()
}

/// Largest distance from a point of `sub` to the nearest point of `sup`.
pub fn superset_gap<T: Real>(sup: &[Vec<T>], sub: &[Vec<T>]) -> T {
    sub.iter()
        .map(|p| sup.iter().map(|q| linalg::dist(p, q)).fold(T::infinity(), T::min))
        .fold(T::zero(), T::max)
}

/// Vertices of the unit square and its centre.
pub fn square<T: Real>() -> (Vec<Vec<T>>, Vec<T>) {
    let (o, l) = (T::zero(), T::one());
    (
        vec![vec![o, o], vec![l, o], vec![l, l], vec![o, l]],
        vec![T::lit(0.5), T::lit(0.5)],
    )
}

// ------------------------------------------------------------------- suites

/// Run one suite by name.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "corrugation" => Ok(corrugation_suite(seed)),
        "loops" => loops_suite(seed),
        "reparam" => reparam_suite(seed),
        "convex" => Ok(convex_suite(seed)),
        "sphere" => sphere_suite(seed),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown suite {other:?} (expected one of {}, all)",
            SUITES.join(", ")
        ))),
    }
}

fn corrugation_suite(seed: u64) -> Vec<Check> {
    const S: &str = "corrugation";
    let mut r = rng(seed);
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..12 {
        let fam = if i % 3 == 0 {
            circle_family()
        } else {
            trig_family(&mut r)
        };
        let n = [4.0, 8.0, 16.0][i % 3];
        let ang: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let p = DualPair::new(vec![ang.cos(), ang.sin()], vec![ang.cos(), ang.sin()]).expect("unit pair");
        let job = CorrugationJob::new(p, n, fam).expect("dims match");
        let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let t = r.gen_range(0.2..1.0);
        let d = corrugation::corrugated_derivative(&job, &x, t);
        let f = corrugation::corrugation_jacobian_fd(&job, &x, t, 1e-6);
        worst = worst.max(d.sub(&f).frobenius() / f.frobenius().max(1e-12));
    }
    out.push(Check::at_most(S, "derivative_identity_rel", worst, 1e-4));

    let job = CorrugationJob::new(DualPair::coordinate(2, 0), 16.0, circle_family()).expect("dims match");
    let mut gap = 0.0f64;
    for _ in 0..6 {
        let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let a = corrugation::corrugation(&job, &x, 1.0);
        let b = corrugation::corrugation_quadrature(&job, &x, 1.0);
        gap = gap.max(linalg::dist(&a, &b));
    }
    out.push(Check::at_most(S, "reduced_vs_direct_quadrature", gap, 1e-8));

    let pts = Domain::cube(2, -1.0, 1.0).grid(&[15, 15]);
    let scaled: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&n| corrugation::corrugation_sup(&job.with_n(n), &pts, &[1.0]).corr * n)
        .collect();
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    out.push(Check::at_most(S, "sup_corr_times_n_spread", (hi - lo) / lo, 0.1));
    out
}

/// The surrounding family on `line_landscape` with default options.
pub fn line_family(opts: &LoopOptions<f64>) -> Result<SurroundingFamily<f64>> {
    loops::build_loop_family(&line_landscape(), f64::INFINITY, opts)
}

fn loops_suite(_seed: u64) -> Result<Vec<Check>> {
    const S: &str = "loops";
    let land = line_landscape::<f64>();
    let fam = line_family(&LoopOptions::default())?;
    let xs = land.domain.grid(&[8]);
    let b = loops::check_bullets(&fam, &land, &xs, 6, 32, 32768);
    let mut out = vec![
        Check::at_most(S, "base_point", b.base_residual, 1e-9),
        Check::at_most(S, "average", b.average_residual, 1e-8),
        Check::above(S, "min_margin", b.min_margin, 0.0),
    ];

    let other = line_family(&LoopOptions {
        cells_per_axis: 3,
        ..LoopOptions::default()
    })?;
    let g0: DynFamily<f64> = Arc::new(fam);
    let g1: DynFamily<f64> = Arc::new(other);
    let sor = loops::satisfied_or_refund(g0.clone(), g1.clone());
    let xs = land.domain.grid(&[5]);
    let mut end = 0.0f64;
    for x in &xs {
        for j in 0..32 {
            let s = j as f64 / 32.0;
            for t in [0.0, 0.5, 1.0] {
                end = end.max(linalg::dist(&sor.eval(0.0, x, t, s), &g0.eval(x, t, s)));
                end = end.max(linalg::dist(&sor.eval(1.0, x, t, s), &g1.eval(x, t, s)));
            }
        }
    }
    out.push(Check::at_most(S, "refund_endpoints", end, 1e-9));
    let mut all = true;
    for k in 0..=4 {
        let fam = sor.family(k as f64 / 4.0);
        for x in &xs {
            let pts = loop_samples(&fam, x, 1.0, 48);
            all &= convex::surrounds(&pts, &(land.g)(x), 1e-6).is_some();
        }
    }
    out.push(Check::flag(S, "refund_surrounds", all));
    let mid = sor.family(0.5);
    let mut gap = 0.0f64;
    for x in &xs {
        let d = loop_samples(&mid, x, 1.0, 128);
        gap = gap.max(superset_gap(&d, &loop_samples(g0.as_ref(), x, 1.0, 64)));
        gap = gap.max(superset_gap(&d, &loop_samples(g1.as_ref(), x, 1.0, 64)));
    }
    out.push(Check::at_most(S, "refund_half_contains_both", gap, 1e-6));
    Ok(out)
}

fn reparam_suite(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "reparam";
    let mut r = rng(seed);
    let mut avg = 0.0f64;
    let mut base = 0.0f64;
    for _ in 0..4 {
        let inst = reparam_instance::<f64>(&mut r);
        let w = reparam::adjust_weights(&inst.gamma, &inst.g, &inst.centers, &[1.0 / 3.0; 3])?;
        let eta = min_gap(&inst.centers) * 0.25;
        let rep = reparam::reparam_from_weights(&w, &inst.centers, eta)?;
        avg = avg.max(linalg::dist(&average_in_s(&inst.gamma, &rep, 2048), &inst.g));
        base = base.max(rep.eval(0.0).abs());
    }
    Ok(vec![
        Check::at_most(S, "average_matches_target", avg, 1e-8),
        Check::at_most(S, "fixes_zero", base, 1e-9),
    ])
}

/// Smallest circular gap between parameters.
pub fn min_gap(c: &[f64]) -> f64 {
    let mut v: Vec<f64> = c.iter().map(|s| s.rem_euclid(1.0)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut gap = v[0] + 1.0 - v[v.len() - 1];
    for w in v.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

fn convex_suite(seed: u64) -> Vec<Check> {
    const S: &str = "convex";
    let mut r = rng(seed);
    let mut disagree = 0usize;
    let mut resid = 0.0f64;
    for _ in 0..40 {
        let k = r.gen_range(1..=8);
        let pts: Vec<Vec<f64>> = (0..k)
            .map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)])
            .collect();
        let v = vec![r.gen_range(-0.6..0.6), r.gen_range(-0.6..0.6)];
        let a = convex::caratheodory_select(&pts, &v);
        let b = convex::exhaustive_hull(&pts, &v);
        if a.is_some() != b.is_some() {
            disagree += 1;
        }
        if let Some(c) = a {
            resid = resid.max(c.residual(&pts, &v));
        }
    }
    let mut out = vec![
        Check::at_most(S, "caratheodory_vs_exhaustive_disagreements", disagree as f64, 0.0),
        Check::at_most(S, "caratheodory_residual", resid, 1e-8),
    ];
    let mut trip = 0.0f64;
    for d in [2usize, 3] {
        for _ in 0..10 {
            let pts: Vec<Vec<f64>> = (0..=d)
                .map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect())
                .collect();
            let basis = match AffineBasis::new(pts.clone()) {
                Ok(b) if b.sigma_min() > 0.05 => b,
                _ => continue,
            };
            let raw: Vec<f64> = (0..=d).map(|_| r.gen_range(-0.5..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let mut q = vec![0.0; d];
            for (p, &wi) in pts.iter().zip(&w) {
                linalg::axpy(&mut q, wi, p);
            }
            if let Ok(c) = convex::barycentric_coords(&basis, &q) {
                let err = c.weights.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                trip = trip.max(err);
            }
        }
    }
    out.push(Check::at_most(S, "barycentric_round_trip", trip, 1e-10));
    let (sq, c) = square::<f64>();
    out.push(Check::flag(
        S,
        "square_not_surrounded_but_in_hull",
        convex::surrounds(&sq, &c, 1e-6).is_none() && convex::caratheodory_select(&sq, &c).is_some(),
    ));
    out
}

fn sphere_suite(seed: u64) -> Result<Vec<Check>> {
    const S: &str = "sphere";
    let grid = sphere::sphere_grid::<f64>(20, 40);
    let mut out = vec![
        Check::at_most(S, "holonomic_t0", sphere::rotation_holonomy_residual(0.0, &grid), 1e-4),
        Check::at_most(S, "holonomic_t1", sphere::rotation_holonomy_residual(1.0, &grid), 1e-4),
    ];
    let floor = sphere::rotation_sigma_floor(11, &grid);
    out.push(Check::at_most(S, "sigma_floor_deficit", 0.9 - floor, 0.0));

    let cfg = SphereRelationConfig::default();
    let mut r = rng(seed);
    let mut stable = true;
    let mut kinds = [0usize; 2];
    for i in 0..6 {
        let t = r.gen_range(0.0..1.0);
        let x = if i == 0 {
            vec![0.2, -0.1, 0.3]
        } else {
            let v: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
            linalg::scale(&v, 1.0 / linalg::norm(&v))
        };
        let sigma: OneJet<f64> = sphere::rotation_formal_solution(t, &x);
        let pi: Vec<f64> = if i == 1 {
            x.clone()
        } else {
            (0..3).map(|_| r.gen_range(-1.0..1.0)).collect()
        };
        let k = pi
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold((0, 0.0), |a, (j, v)| if v > a.1 { (j, v) } else { a })
            .0;
        let v = linalg::scale(&linalg::unit(3, k), 1.0 / pi[k]);
        let p = DualPair::new(pi, v)?;
        let grid = SliceGrid::new(1.0, 9, seed.wrapping_add(i as u64));
        let a = sphere::slice_case_analysis(cfg, &sigma, &p, &grid)?;
        let b = sphere::slice_case_analysis(cfg, &sigma, &p, &grid.refined())?;
        stable &= a.case.same_kind(&b.case);
        kinds[matches!(a.case, sphere::SliceCase::FullSpace) as usize] += 1;
    }
    out.push(Check::flag(S, "slice_cases_stable_under_refinement", stable));
    out.push(Check::flag(
        S,
        "slice_cases_cover_both_kinds",
        kinds[0] > 0 && kinds[1] > 0,
    ));
    Ok(out)
}

/// Rows as `suite,check,residual,tol,pass`.
pub fn write_checks<W: std::io::Write>(w: W, checks: &[Check]) -> Result<()> {
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.suite.clone(),
                c.name.clone(),
                format!("{:e}", c.residual),
                format!("{:e}", c.tol),
                c.pass.to_string(),
            ]
        })
        .collect();
    crate::export::write_csv(w, &["suite", "check", "residual", "tol", "pass"], &rows)
}

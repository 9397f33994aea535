//! The sphere-eversion relation, its rotation formal solution and sampled
//! ampleness evidence for its slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convex;
use crate::diff;
use crate::domain::{Domain, Region};
use crate::error::{Error, Result};
use crate::export::Mesh;
use crate::hprinciple::{self, ConclusionReport, Landscape, StepInfo, StepOptions, VerifyOptions};
use crate::jetspace::{self, DualPair, JetSection, OneJet, Relation};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;
use crate::smooth::smooth_step;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereRelationConfig<T> {
    pub ball_radius: T,
    /// Floor on the smallest singular value of `φ` restricted to `x⊥`.
    pub delta: T,
}

impl<T: Real> Default for SphereRelationConfig<T> {
    fn default() -> Self {
        Self {
            ball_radius: T::lit(0.9),
            delta: T::lit(1e-6),
        }
    }
}

impl<T: Real> SphereRelationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ball_radius > T::zero() && self.ball_radius < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "ball radius must lie in (0, 1), got {}",
                self.ball_radius
            )));
        }
        if !(self.delta > T::zero()) {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        Ok(())
    }
}

/// 3 × 2 matrix whose columns are an orthonormal basis of `x⊥`.
fn perp_basis<T: Real>(x: &[T]) -> Matrix<T> {
    let b = linalg::orthonormal_complement(x);
    Matrix::from_cols(&b).expect("two columns of length 3")
}

/// `σ_min(φ|x⊥)`.
pub fn sigma_on_perp<T: Real>(phi: &Matrix<T>, x: &[T]) -> T {
    phi.matmul(&perp_basis(x)).sigma_min()
}

/// Jets `(x, y, φ)` with `x` in the open ball, or `φ` injective on `x⊥` with
/// `σ_min(φ|x⊥) > δ`. Inside the ball the margin is infinite; outside it is
/// `σ_min − δ`, since an operator-norm change of `φ` by `ε` moves `σ_min` by
/// at most `ε`.
pub fn sphere_relation<T: Real>(cfg: SphereRelationConfig<T>) -> Relation<T> {
    let margin = move |j: &OneJet<T>| {
        if linalg::norm(&j.x) < cfg.ball_radius {
            T::infinity()
        } else {
            sigma_on_perp(&j.phi, &j.x) - cfg.delta
        }
    };
    Relation::new(3, 3, move |j| margin(j) > T::zero(), margin)
}

/// Rotation by `angle` about the unit axis `k`.
pub fn rodrigues<T: Real>(k: &[T], angle: T) -> Matrix<T> {
    let (s, c) = angle.sin_cos();
    let mut m = Matrix::identity(3).scale(c);
    let cross = Matrix::from_rows(&[
        vec![T::zero(), -k[2], k[1]],
        vec![k[2], T::zero(), -k[0]],
        vec![-k[1], k[0], T::zero()],
    ])
    .expect("3 x 3");
    m = m.add(&cross.scale(s));
    m.add(&Matrix::outer(k, k).scale(T::one() - c))
}

/// `((1 − 2t)x, rot_{πt}(x/|x|))`, the rotation angle tapered to zero near
/// the origin so the section is smooth there.
pub fn rotation_formal_solution<T: Real>(t: T, x: &[T]) -> OneJet<T> {
    let y = linalg::scale(x, T::one() - t - t);
    let r = linalg::norm(x);
    let taper = smooth_step((r - T::lit(0.05)) / T::lit(0.1));
    let phi = if taper == T::zero() {
        Matrix::identity(3)
    } else {
        rodrigues(&linalg::scale(x, T::one() / r), T::PI() * t * taper)
    };
    OneJet { x: x.to_vec(), y, phi }
}

/// The formal solution at a fixed time as a section.
pub fn rotation_section<T: Real>(t: T) -> JetSection<T> {
    let k = T::one() - t - t;
    JetSection::new(
        3,
        3,
        move |x| linalg::scale(x, k),
        move |x| rotation_formal_solution(t, x).phi,
    )
    .with_derivative(move |_| Matrix::identity(3).scale(k))
}

/// `n_lat × n_lon` points on the unit sphere, latitudes at cell centres so
/// the poles are avoided.
pub fn sphere_grid<T: Real>(n_lat: usize, n_lon: usize) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        let th = T::PI() * (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(n_lat);
        for j in 0..n_lon {
            let ph = T::two_pi() * T::from_usize_lossy(j) / T::from_usize_lossy(n_lon);
            out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
        }
    }
    out
}

/// Smallest `σ_min(Df(x)|x⊥)` over the grid, with central differences.
pub fn immersion_floor<T: Real>(f: &dyn Fn(&[T]) -> Vec<T>, grid: &[Vec<T>]) -> T {
    grid.iter()
        .map(|x| sigma_on_perp(&diff::jacobian(f, x), x))
        .fold(T::infinity(), T::min)
}

/// `σ_min(Df(x)|x⊥) ≥ delta` at every grid point.
pub fn immersion_check<T: Real>(f: &dyn Fn(&[T]) -> Vec<T>, grid: &[Vec<T>], delta: T) -> bool {
    immersion_floor(f, grid) >= delta
}

/// Largest `‖(Df − φ)|x⊥‖_F` of the formal solution at time `t` over the
/// grid, `Df` by central differences of `x ↦ (1 − 2t)x`.
pub fn rotation_holonomy_residual<T: Real>(t: T, grid: &[Vec<T>]) -> T {
    let f = move |x: &[T]| rotation_formal_solution(t, x).y;
    grid.iter()
        .map(|x| {
            let q = perp_basis(x);
            let d = diff::jacobian(&f, x);
            d.sub(&rotation_formal_solution(t, x).phi).matmul(&q).frobenius()
        })
        .fold(T::zero(), T::max)
}

/// Smallest `σ_min(φ|x⊥)` of the formal solution over `frames` equally
/// spaced times and the grid.
pub fn rotation_sigma_floor<T: Real>(frames: usize, grid: &[Vec<T>]) -> T {
    let frames = frames.max(2);
    let mut m = T::infinity();
    for k in 0..frames {
        let t = T::from_usize_lossy(k) / T::from_usize_lossy(frames - 1);
        for x in grid {
            m = m.min(sigma_on_perp(&rotation_formal_solution(t, x).phi, x));
        }
    }
    m
}

/// The sphere mesh pushed forward by `x ↦ (1 − 2t)x` at `frames` times.
pub fn formal_frames<T: Real>(frames: usize, n_lat: usize, n_lon: usize) -> Vec<(T, Mesh<T>)> {
    let frames = frames.max(2);
    let base = Mesh::uv_sphere(n_lat, n_lon);
    (0..frames)
        .map(|k| {
            let t = T::from_usize_lossy(k) / T::from_usize_lossy(frames - 1);
            (t, base.map(|x| rotation_formal_solution(t, x).y))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SliceCase<T> {
    FullSpace,
    /// The slice misses the affine line through `point` along `direction`.
    ComplementOfLine {
        point: Vec<T>,
        direction: Vec<T>,
    },
}

impl<T> SliceCase<T> {
    pub fn same_kind(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SliceGrid<T> {
    pub half_width: T,
    pub per_axis: usize,
    pub seed: u64,
}

impl<T: Real> SliceGrid<T> {
    pub fn new(half_width: T, per_axis: usize, seed: u64) -> Self {
        Self {
            half_width,
            per_axis,
            seed,
        }
    }

    /// Same box, spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            per_axis: 2 * self.per_axis - 1,
            ..*self
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceAnalysis<T> {
    pub case: SliceCase<T>,
    /// Fraction of grid points where membership agrees with the case.
    pub agreement: f64,
    pub points: usize,
    /// Random targets found in the hull of the sampled component.
    pub hull_hits: usize,
    pub hull_targets: usize,
}

/// Classify the slice of the sphere relation at `sigma` along `p` and check
/// the classification against sampled membership. For a line complement the
/// component of an off-line seed must have 8 random targets of the box in
/// its convex hull.
pub fn slice_case_analysis<T: Real>(
    cfg: SphereRelationConfig<T>,
    sigma: &OneJet<T>,
    p: &DualPair<T>,
    grid: &SliceGrid<T>,
) -> Result<SliceAnalysis<T>> {
    cfg.validate()?;
    let rel = sphere_relation(cfg);
    if !rel.member(sigma) {
        return Err(Error::NotAccepted("jet is not in the relation".into()));
    }
    let sl = jetspace::slice(&rel, sigma, p)?;
    let x = &sigma.x;
    let pi = p.pi();
    let xn = linalg::norm(x);
    let xh = linalg::scale(x, T::one() / xn);
    let off_axis = linalg::sub(pi, &linalg::scale(&xh, linalg::dot(pi, &xh)));
    let case = if xn < cfg.ball_radius || linalg::norm(&off_axis) <= T::lit(1e-12) * linalg::norm(pi) {
        SliceCase::FullSpace
    } else {
        // ker π ∩ x⊥ = span(u0); u1 ∈ x⊥ with π(u1) = 1. The updated map sends
        // u0 to φu0 and u1 to w − φ(v − u1).
        let c = cross(x, pi);
        let u0 = linalg::scale(&c, T::one() / linalg::norm(&c));
        let u1 = cross(&xh, &u0);
        let u1 = linalg::scale(&u1, T::one() / linalg::dot(pi, &u1));
        let point = sigma.phi.mul_vec(&linalg::sub(p.v(), &u1));
        let dir = sigma.phi.mul_vec(&u0);
        let direction = linalg::scale(&dir, T::one() / linalg::norm(&dir));
        SliceCase::ComplementOfLine { point, direction }
    };

    let center = match &case {
        SliceCase::FullSpace => sigma.phi.mul_vec(p.v()),
        SliceCase::ComplementOfLine { point, .. } => point.clone(),
    };
    let h = grid.half_width;
    let bx = Domain::new(
        center.iter().map(|&c| c - h).collect(),
        center.iter().map(|&c| c + h).collect(),
    );
    let n = grid.per_axis.max(2);
    let pts = bx.grid(&[n, n, n]);
    let scale = T::one() + linalg::norm(&center) + h;
    let predicted = |w: &[T]| match &case {
        SliceCase::FullSpace => true,
        SliceCase::ComplementOfLine { point, direction } => {
            let d = linalg::sub(w, point);
            let along = linalg::scale(direction, linalg::dot(&d, direction));
            linalg::norm(&linalg::sub(&d, &along)) > T::lit(1e-9) * scale
        }
    };
    let agree = pts.iter().filter(|w| sl.contains(w) == predicted(w)).count();
    let agreement = agree as f64 / pts.len() as f64;
    if agreement < 0.99 {
        return Err(Error::Inconsistent(format!(
            "sampled slice membership agrees with {case:?} on {:.2}% of points",
            100.0 * agreement
        )));
    }

    let mut hull_hits = 0;
    let mut hull_targets = 0;
    if let SliceCase::ComplementOfLine { direction, .. } = &case {
        let step = (h + h) / T::from_usize_lossy(n - 1);
        let off = linalg::orthonormal_complement(direction);
        let seed = linalg::add(&center, &linalg::scale(&off[0], h * T::lit(0.5)));
        let comp = convex::flood_fill_component(|w: &[T]| sl.contains(w), &seed, &bx, step)?;
        let cand = comp.points();
        let extremes = extreme_points(&cand);
        let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
        hull_targets = 8;
        for _ in 0..hull_targets {
            let q: Vec<T> = center
                .iter()
                .map(|&c| c + h * T::lit(rng.gen_range(-0.5..0.5)))
                .collect();
            if convex::caratheodory_select(&extremes, &q).is_some() {
                hull_hits += 1;
            }
        }
        if hull_hits < hull_targets {
            return Err(Error::Inconsistent(format!(
                "only {hull_hits} of {hull_targets} targets lie in the hull of a slice component"
            )));
        }
    }
    Ok(SliceAnalysis {
        case,
        agreement,
        points: pts.len(),
        hull_hits,
        hull_targets,
    })
}

fn cross<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// The points maximising each of the 26 directions `{−1, 0, 1}³ \ 0`.
fn extreme_points<T: Real>(pts: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::new();
    for code in 0..27usize {
        if code == 13 {
            continue;
        }
        let d = [
            T::from_usize_lossy(code % 3) - T::one(),
            T::from_usize_lossy((code / 3) % 3) - T::one(),
            T::from_usize_lossy(code / 9) - T::one(),
        ];
        let best = pts.iter().max_by(|a, b| {
            linalg::dot(a, &d)
                .partial_cmp(&linalg::dot(b, &d))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(b) = best {
            if !out.contains(b) {
                out.push(b.clone());
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct CorrugateOptions<T> {
    /// Time of the formal solution to improve.
    pub t: T,
    /// Centre of the patch on the sphere.
    pub center: Vec<T>,
    pub k0_half: T,
    pub k1_half: T,
    pub box_half: T,
    pub eps: T,
    pub step: StepOptions<T>,
    pub verify: VerifyOptions<T>,
}

impl<T: Real> Default for CorrugateOptions<T> {
    /// Coarse settings: one loop cell, a 3³ probe grid. Finer grids cost
    /// minutes because each step re-evaluates the previous ones.
    fn default() -> Self {
        let mut step = StepOptions::for_dim(3);
        step.grid = vec![3; 3];
        step.loops.cells_per_axis = 1;
        step.loops.max_depth = 0;
        step.loops.flood_refinements = 1;
        step.loops.samples_per_axis = 3;
        Self {
            t: T::lit(0.25),
            center: vec![T::zero(), T::zero(), T::one()],
            k0_half: T::lit(0.05),
            k1_half: T::lit(0.15),
            box_half: T::lit(0.2),
            eps: T::lit(0.05),
            step,
            verify: VerifyOptions {
                grid: vec![3; 3],
                ..VerifyOptions::for_dim(3)
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrugateReport {
    pub t: f64,
    pub steps: Vec<StepInfo>,
    pub conclusions: Option<ConclusionReport>,
    pub error: Option<String>,
}

/// Run the three-direction improvement on a patch of the formal solution at
/// a fixed time. Experimental: the outcome is reported, not judged.
pub fn corrugate_patch<T: Real>(cfg: SphereRelationConfig<T>, opts: &CorrugateOptions<T>) -> Result<CorrugateReport> {
    cfg.validate()?;
    let rel = sphere_relation(cfg);
    let f0 = rotation_section(opts.t);
    let cube = |h: T| {
        Region::bounded(
            opts.center.iter().map(|&c| c - h).collect(),
            opts.center.iter().map(|&c| c + h).collect(),
        )
    };
    let domain = Domain::new(
        opts.center.iter().map(|&c| c - opts.box_half).collect(),
        opts.center.iter().map(|&c| c + opts.box_half).collect(),
    );
    let l = Landscape::new(
        Region::empty(),
        cube(opts.k0_half),
        cube(opts.k1_half),
        domain,
        T::lit(0.05),
    )?;
    let basis: Vec<Vec<T>> = (0..3).map(|i| linalg::unit(3, i)).collect();
    let mut report = CorrugateReport {
        t: opts.t.to_f64_lossy(),
        steps: Vec::new(),
        conclusions: None,
        error: None,
    };
    match hprinciple::improve(&rel, &f0, &l, opts.eps, &basis, &opts.step) {
        Ok(h) => {
            report.steps = h.steps.clone();
            report.conclusions = Some(hprinciple::verify_conclusions(
                &h,
                &f0,
                &rel,
                &l,
                &basis,
                opts.eps,
                &opts.verify,
            ));
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_examples() {
        let r = sphere_relation(SphereRelationConfig::<f64>::default());
        let x = vec![1.0, 0.0, 0.0];
        assert!(r.member(&OneJet {
            x: x.clone(),
            y: x.clone(),
            phi: Matrix::identity(3)
        }));
        let proj = Matrix::outer(&x, &x);
        assert!(!r.member(&OneJet {
            x: x.clone(),
            y: x.clone(),
            phi: proj
        }));
        assert!(r.member(&OneJet {
            x: vec![0.0; 3],
            y: vec![0.0; 3],
            phi: Matrix::zeros(3, 3)
        }));
    }

    #[test]
    fn rotation_endpoints() {
        let x = [0.0f64, 0.6, 0.8];
        let j0 = rotation_formal_solution(0.0, &x);
        assert!(j0.phi.sub(&Matrix::identity(3)).max_abs() < 1e-15);
        let j1 = rotation_formal_solution(1.0, &x);
        assert_eq!(j1.y, vec![0.0, -0.6, -0.8]);
        let q = perp_basis(&x);
        let on_perp = j1.phi.matmul(&q).add(&q);
        assert!(on_perp.max_abs() < 1e-12);
        assert!((j1.phi.mul_vec(&x)[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn immersion_examples() {
        let grid = sphere_grid::<f64>(6, 12);
        assert!(immersion_check(&|x: &[f64]| x.to_vec(), &grid, 0.5));
        assert!(immersion_check(&|x: &[f64]| linalg::scale(x, -1.0), &grid, 0.5));
        assert!(!immersion_check(&|_: &[f64]| vec![1.0, 2.0, 3.0], &grid, 1e-6));
    }

    #[test]
    fn slice_cases() {
        let cfg = SphereRelationConfig::default();
        let g = SliceGrid::new(1.0, 9, 3);
        let inside = rotation_formal_solution(0.3, &[0.1, 0.2, 0.3]);
        let p = DualPair::coordinate(3, 1);
        assert_eq!(
            slice_case_analysis(cfg, &inside, &p, &g).unwrap().case,
            SliceCase::FullSpace
        );
        let sigma = OneJet {
            x: vec![1.0, 0.0, 0.0],
            y: vec![1.0, 0.0, 0.0],
            phi: Matrix::identity(3),
        };
        let aligned = DualPair::coordinate(3, 0);
        assert_eq!(
            slice_case_analysis(cfg, &sigma, &aligned, &g).unwrap().case,
            SliceCase::FullSpace
        );
        let generic = DualPair::new(vec![0.3, 1.0, -0.4], vec![0.0, 1.0, 0.0]).unwrap();
        let a = slice_case_analysis(cfg, &sigma, &generic, &g).unwrap();
        assert!(matches!(a.case, SliceCase::ComplementOfLine { .. }));
        assert_eq!(a.hull_hits, 8);
        let b = slice_case_analysis(cfg, &sigma, &generic, &g.refined()).unwrap();
        assert!(a.case.same_kind(&b.case));
    }
}

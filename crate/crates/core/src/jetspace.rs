//! 1-jets, dual pairs, the rank-one update map, relations and their slices,
//! and the parametric reduction that turns a family of sections over `P`
//! into a single section over `E × P`.

use std::sync::Arc;

use crate::diff;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Tolerance on `π(v) = 1` for a dual pair.
pub const DUAL_PAIR_TOL: f64 = 1e-12;

pub type VecFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type MatFn<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;

/// A covector `π` on `E` and a vector `v` with `π(v) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPair<T> {
    pi: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> DualPair<T> {
    pub fn new(pi: Vec<T>, v: Vec<T>) -> Result<Self> {
        if pi.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: pi.len(),
                found: v.len(),
                what: "dual pair",
            });
        }
        let pairing = linalg::dot(&pi, &v);
        if (pairing - T::one()).abs().to_f64_lossy() > DUAL_PAIR_TOL {
            return Err(Error::InvalidDualPair {
                pairing: pairing.to_f64_lossy(),
            });
        }
        Ok(Self { pi, v })
    }

    /// `(e_i^*, e_i)` in `R^n`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let e = linalg::unit(n, i);
        Self { pi: e.clone(), v: e }
    }

    pub fn pi(&self) -> &[T] {
        &self.pi
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    #[inline]
    pub fn apply_pi(&self, x: &[T]) -> T {
        linalg::dot(&self.pi, x)
    }

    /// The linear map agreeing with `phi` on `ker π` and sending `v` to `w`.
    pub fn update(&self, phi: &Matrix<T>, w: &[T]) -> Result<Matrix<T>> {
        if phi.cols() != self.dim() || phi.rows() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.rows(),
                found: w.len(),
                what: "update",
            });
        }
        let phi_v = phi.mul_vec(&self.v);
        let delta = linalg::sub(w, &phi_v);
        Ok(phi.add(&Matrix::outer(&delta, &self.pi)))
    }

    /// A basis of `ker π` (orthonormal).
    pub fn kernel_basis(&self) -> Vec<Vec<T>> {
        linalg::orthonormal_complement(&self.pi)
    }
}

/// Free-function form of [`DualPair::update`].
pub fn update<T: Real>(p: &DualPair<T>, phi: &Matrix<T>, w: &[T]) -> Result<Matrix<T>> {
    p.update(phi, w)
}

/// A point `(x, y, φ)` of `J¹(E, F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneJet<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub phi: Matrix<T>,
}

impl<T: Real> OneJet<T> {
    pub fn new(x: Vec<T>, y: Vec<T>, phi: Matrix<T>) -> Result<Self> {
        if phi.cols() != x.len() || phi.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: phi.cols(),
                what: "one-jet",
            });
        }
        Ok(Self { x, y, phi })
    }

    pub fn source_dim(&self) -> usize {
        self.x.len()
    }

    pub fn target_dim(&self) -> usize {
        self.y.len()
    }
}

/// A section `x ↦ (f(x), φ(x))` of `J¹(E, F)`.
#[derive(Clone)]
pub struct JetSection<T> {
    pub source_dim: usize,
    pub target_dim: usize,
    pub f: VecFn<T>,
    pub phi: MatFn<T>,
    /// Analytic derivative of `f`, when known.
    pub df: Option<MatFn<T>>,
}

impl<T: Real> JetSection<T> {
    pub fn new(
        source_dim: usize,
        target_dim: usize,
        f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        phi: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            source_dim,
            target_dim,
            f: Arc::new(f),
            phi: Arc::new(phi),
            df: None,
        }
    }

    pub fn with_derivative(mut self, df: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    /// The holonomic section `(f, Df)` of a map with known derivative.
    pub fn holonomic(
        source_dim: usize,
        target_dim: usize,
        f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
        df: impl Fn(&[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        let df: MatFn<T> = Arc::new(df);
        Self {
            source_dim,
            target_dim,
            f: Arc::new(f),
            phi: df.clone(),
            df: Some(df),
        }
    }

    pub fn eval(&self, x: &[T]) -> OneJet<T> {
        OneJet {
            x: x.to_vec(),
            y: (self.f)(x),
            phi: (self.phi)(x),
        }
    }

    /// `Df(x)`: analytic if available, central differences otherwise.
    pub fn derivative(&self, x: &[T]) -> Matrix<T> {
        match &self.df {
            Some(df) => df(x),
            None => {
                let f = self.f.clone();
                diff::jacobian(&move |y: &[T]| f(y), x)
            }
        }
    }

    /// `Df(x)·u` (analytic or by a single central difference).
    pub fn derivative_along(&self, x: &[T], u: &[T]) -> Vec<T> {
        match &self.df {
            Some(df) => df(x).mul_vec(u),
            None => {
                let f = self.f.clone();
                let h = diff::default_step(x) / linalg::norm(u).max(T::min_positive_value());
                diff::directional(&move |y: &[T]| f(y), x, u, h)
            }
        }
    }

    /// Max over the basis of `‖(Df(x) − φ(x))·u‖ / (1 + ‖u‖)`.
    pub fn holonomy_residual(&self, x: &[T], basis: &[Vec<T>]) -> T {
        if basis.is_empty() {
            return T::zero();
        }
        let phi = (self.phi)(x);
        let mut worst = T::zero();
        for u in basis {
            let df_u = self.derivative_along(x, u);
            let r = linalg::norm(&linalg::sub(&df_u, &phi.mul_vec(u)));
            worst = worst.max(r / (T::one() + linalg::norm(u)));
        }
        worst
    }
}

impl<T: Real> std::fmt::Debug for JetSection<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "JetSection(R^{} -> R^{}, analytic df: {})",
            self.source_dim,
            self.target_dim,
            self.df.is_some()
        )
    }
}

/// True iff `Df(x)` and `φ(x)` agree on `span(basis)` up to
/// `tol·(1 + ‖u‖)` on every basis vector.
pub fn is_holonomic_at<T: Real>(sec: &JetSection<T>, x: &[T], basis: &[Vec<T>], tol: T) -> bool {
    sec.holonomy_residual(x, basis) <= tol
}

pub type FamilyVecFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
pub type FamilyMatFn<T> = Arc<dyn Fn(&[T], &[T]) -> Matrix<T> + Send + Sync>;

/// A family of sections `(p, x) ↦ (f_p(x), φ_{p,x})` parametrised by `P`.
#[derive(Clone)]
pub struct FamilyOfSections<T> {
    pub param_dim: usize,
    pub source_dim: usize,
    pub target_dim: usize,
    pub f: FamilyVecFn<T>,
    pub phi: FamilyMatFn<T>,
    /// Analytic `∂f/∂p` (target × param), when known.
    pub df_dp: Option<FamilyMatFn<T>>,
    /// Analytic `∂f/∂x` (target × source), when known.
    pub df_dx: Option<FamilyMatFn<T>>,
}

impl<T: Real> FamilyOfSections<T> {
    pub fn new(
        param_dim: usize,
        source_dim: usize,
        target_dim: usize,
        f: impl Fn(&[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        phi: impl Fn(&[T], &[T]) -> Matrix<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            param_dim,
            source_dim,
            target_dim,
            f: Arc::new(f),
            phi: Arc::new(phi),
            df_dp: None,
            df_dx: None,
        }
    }

    pub fn with_df_dp(mut self, d: impl Fn(&[T], &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.df_dp = Some(Arc::new(d));
        self
    }

    pub fn with_df_dx(mut self, d: impl Fn(&[T], &[T]) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.df_dx = Some(Arc::new(d));
        self
    }

    /// The section `F_p` for a fixed parameter.
    pub fn section_at(&self, p: &[T]) -> JetSection<T> {
        let p1 = p.to_vec();
        let p2 = p.to_vec();
        let f = self.f.clone();
        let phi = self.phi.clone();
        let mut sec = JetSection::new(
            self.source_dim,
            self.target_dim,
            move |x| f(&p1, x),
            move |x| phi(&p2, x),
        );
        if let Some(d) = &self.df_dx {
            let d = d.clone();
            let p3 = p.to_vec();
            sec = sec.with_derivative(move |x| d(&p3, x));
        }
        sec
    }
}

impl<T: Real> std::fmt::Debug for FamilyOfSections<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "FamilyOfSections(P = R^{}, R^{} -> R^{})",
            self.param_dim, self.source_dim, self.target_dim
        )
    }
}

pub type JetPredicate<T> = Arc<dyn Fn(&OneJet<T>) -> bool + Send + Sync>;
pub type JetMargin<T> = Arc<dyn Fn(&OneJet<T>) -> T + Send + Sync>;

/// An open subset of `J¹(E, F)`, given by a membership predicate and a
/// margin: the radius of a ball (in `max(|Δy|, ‖Δφ‖_op)` at fixed `x`)
/// certified to lie inside the relation, `0` when outside.
#[derive(Clone)]
pub struct Relation<T> {
    pub source_dim: usize,
    pub target_dim: usize,
    member: JetPredicate<T>,
    margin: JetMargin<T>,
}

impl<T: Real> Relation<T> {
    pub fn new(
        source_dim: usize,
        target_dim: usize,
        member: impl Fn(&OneJet<T>) -> bool + Send + Sync + 'static,
        margin: impl Fn(&OneJet<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            source_dim,
            target_dim,
            member: Arc::new(member),
            margin: Arc::new(margin),
        }
    }

    /// The whole jet space.
    pub fn full(source_dim: usize, target_dim: usize) -> Self {
        Self::new(source_dim, target_dim, |_| true, |_| T::infinity())
    }

    /// Immersions: `φ` injective. The margin is the smallest singular value.
    pub fn immersion(source_dim: usize, target_dim: usize) -> Self {
        let margin = |j: &OneJet<T>| j.phi.sigma_min();
        Self::new(source_dim, target_dim, move |j| margin(j) > T::zero(), margin)
    }

    pub fn member(&self, j: &OneJet<T>) -> bool {
        (self.member)(j)
    }

    pub fn margin(&self, j: &OneJet<T>) -> T {
        if self.member(j) {
            (self.margin)(j).max(T::zero())
        } else {
            T::zero()
        }
    }
}

impl<T: Real> std::fmt::Debug for Relation<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Relation(J1(R^{}, R^{}))", self.source_dim, self.target_dim)
    }
}

/// The slice `R(σ, p) = { w | (x, y, update(p, φ, w)) ∈ R }`.
#[derive(Clone)]
pub struct Slice<T> {
    relation: Relation<T>,
    sigma: OneJet<T>,
    pair: DualPair<T>,
}

impl<T: Real> Slice<T> {
    pub fn jet_for(&self, w: &[T]) -> OneJet<T> {
        OneJet {
            x: self.sigma.x.clone(),
            y: self.sigma.y.clone(),
            phi: self
                .pair
                .update(&self.sigma.phi, w)
                .expect("slice dimensions validated at construction"),
        }
    }

    pub fn contains(&self, w: &[T]) -> bool {
        self.relation.member(&self.jet_for(w))
    }

    /// Radius of a ball around `w` inside the slice. A change `δw` moves the
    /// updated map by `δw ⊗ π`, of operator norm `|δw| |π|`.
    pub fn margin(&self, w: &[T]) -> T {
        let pi_norm = linalg::norm(self.pair.pi()).max(T::min_positive_value());
        self.relation.margin(&self.jet_for(w)) / pi_norm
    }

    pub fn dim(&self) -> usize {
        self.sigma.target_dim()
    }

    pub fn sigma(&self) -> &OneJet<T> {
        &self.sigma
    }
}

pub fn slice<T: Real>(r: &Relation<T>, sigma: &OneJet<T>, p: &DualPair<T>) -> Result<Slice<T>> {
    if sigma.source_dim() != r.source_dim || sigma.target_dim() != r.target_dim {
        return Err(Error::DimensionMismatch {
            expected: r.source_dim,
            found: sigma.source_dim(),
            what: "slice jet",
        });
    }
    if p.dim() != r.source_dim {
        return Err(Error::DimensionMismatch {
            expected: r.source_dim,
            found: p.dim(),
            what: "slice dual pair",
        });
    }
    Ok(Slice {
        relation: r.clone(),
        sigma: sigma.clone(),
        pair: p.clone(),
    })
}

/// `Ψ(x, p, y, ψ) = (x, y, ψ ∘ ι)`: keep the first `e_dim` source coordinates
/// and the corresponding columns.
pub fn psi_project<T: Real>(sigma_bar: &OneJet<T>, e_dim: usize) -> Result<OneJet<T>> {
    if e_dim > sigma_bar.source_dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma_bar.source_dim(),
            found: e_dim,
            what: "E/P splitting",
        });
    }
    Ok(OneJet {
        x: sigma_bar.x[..e_dim].to_vec(),
        y: sigma_bar.y.clone(),
        phi: sigma_bar.phi.column_block(0, e_dim),
    })
}

/// `R^P = Ψ⁻¹(R)` on `J¹(E × P, F)`.
pub fn parametric_relation<T: Real>(r: &Relation<T>, param_dim: usize) -> Relation<T> {
    let e_dim = r.source_dim;
    let inner = r.clone();
    let inner2 = r.clone();
    Relation::new(
        e_dim + param_dim,
        r.target_dim,
        move |j| psi_project(j, e_dim).is_ok_and(|jj| inner.member(&jj)),
        move |j| psi_project(j, e_dim).map_or(T::zero(), |jj| inner2.margin(&jj)),
    )
}

/// `F̄(x, p) = (f_p(x), φ_{p,x} ⊕ ∂f/∂p(x, p))` on `E × P`, coordinates
/// ordered `(x, p)`.
pub fn bar_family<T: Real>(fam: &FamilyOfSections<T>) -> JetSection<T> {
    let e = fam.source_dim;
    let np = fam.param_dim;
    let f = fam.f.clone();
    let f_for_phi = fam.f.clone();
    let phi = fam.phi.clone();
    let df_dp = fam.df_dp.clone();
    let dp = move |x: &[T], p: &[T]| -> Matrix<T> {
        match &df_dp {
            Some(d) => d(p, x),
            None => {
                let xs = x.to_vec();
                let ff = f_for_phi.clone();
                diff::jacobian(&move |q: &[T]| ff(q, &xs), p)
            }
        }
    };
    let dp = Arc::new(dp);
    let dp2 = dp.clone();
    let mut sec = JetSection::new(
        e + np,
        fam.target_dim,
        move |z| f(&z[e..], &z[..e]),
        move |z| {
            let (x, p) = z.split_at(e);
            let a = phi(p, x);
            if np == 0 {
                return a;
            }
            a.hstack(&dp(x, p)).expect("matching target dims")
        },
    );
    if let Some(dx) = &fam.df_dx {
        let dx = dx.clone();
        sec = sec.with_derivative(move |z| {
            let (x, p) = z.split_at(e);
            let a = dx(p, x);
            if np == 0 {
                return a;
            }
            a.hstack(&dp2(x, p)).expect("matching target dims")
        });
    }
    sec
}

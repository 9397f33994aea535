//! Affine bases, barycentric coordinates, the "surrounds" predicate, hull
//! membership with Carathéodory selection, and grid flood fill.

use std::collections::VecDeque;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Real;

/// Affine independence threshold on `|det|` of the lifted basis matrix.
pub const BASIS_DET_TOL: f64 = 1e-10;
/// Default positivity floor for [`surrounds`].
pub const DEFAULT_MU: f64 = 1e-6;
/// Residual accepted for a hull certificate.
pub const HULL_TOL: f64 = 1e-9;

/// `d + 1` affinely independent points of `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineBasis<T> {
    points: Vec<Vec<T>>,
    lu: LiftedLu<T>,
}

#[derive(Clone, Debug, PartialEq)]
struct LiftedLu<T> {
    // Columns are (p_i, 1); kept as a plain matrix, solved on demand.
    m: Matrix<T>,
}

impl<T: Real> AffineBasis<T> {
    pub fn new(points: Vec<Vec<T>>) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if points.len() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: d + 1,
                found: points.len(),
                what: "affine basis size",
            });
        }
        if let Some(bad) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
                what: "affine basis point",
            });
        }
        let m = lifted(&points);
        let det = m.determinant();
        if det.abs().to_f64_lossy() <= BASIS_DET_TOL || !det.is_finite() {
            return Err(Error::SingularBasis {
                det: det.to_f64_lossy(),
            });
        }
        Ok(Self {
            points,
            lu: LiftedLu { m },
        })
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.points.len() - 1
    }

    /// Smallest singular value of the matrix with columns `p_i - p_0`.
    pub fn sigma_min(&self) -> T {
        let d = self.dim();
        if d == 0 {
            return T::infinity();
        }
        let cols: Vec<Vec<T>> = self.points[1..]
            .iter()
            .map(|p| linalg::sub(p, &self.points[0]))
            .collect();
        Matrix::from_cols(&cols).map_or(T::zero(), |m| m.sigma_min())
    }
}

fn lifted<T: Real>(points: &[Vec<T>]) -> Matrix<T> {
    let cols: Vec<Vec<T>> = points
        .iter()
        .map(|p| {
            let mut c = p.clone();
            c.push(T::one());
            c
        })
        .collect();
    Matrix::from_cols(&cols).expect("uniform point dimension")
}

/// Weights `w` with `Σ w_i = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BarycentricCoords<T> {
    pub weights: Vec<T>,
}

impl<T: Real> BarycentricCoords<T> {
    pub fn min(&self) -> T {
        self.weights.iter().fold(T::infinity(), |a, &b| a.min(b))
    }
}

/// Solve `Σ w_i p_i = q`, `Σ w_i = 1`.
pub fn barycentric_coords<T: Real>(basis: &AffineBasis<T>, q: &[T]) -> Result<BarycentricCoords<T>> {
    if q.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: q.len(),
            what: "barycentric query",
        });
    }
    let mut rhs = q.to_vec();
    rhs.push(T::one());
    let w = basis.lu.m.solve(&rhs).map_err(|_| Error::SingularBasis {
        det: basis.lu.m.determinant().to_f64_lossy(),
    })?;
    Ok(BarycentricCoords { weights: w })
}

/// All barycentric coordinates at least `mu`.
pub fn is_interior_of_hull<T: Real>(basis: &AffineBasis<T>, q: &[T], mu: T) -> Result<bool> {
    Ok(barycentric_coords(basis, q)?.min() >= mu)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surround<T> {
    pub indices: Vec<usize>,
    pub coords: BarycentricCoords<T>,
}

/// First (lexicographic) `d + 1`-subset of `points` forming an affine basis
/// in which `v` has all coordinates `≥ mu`.
pub fn surrounds<T: Real>(points: &[Vec<T>], v: &[T], mu: T) -> Option<Surround<T>> {
    let d = v.len();
    let mut found = None;
    for_each_combination(points.len(), d + 1, |idx| {
        if let Some(s) = try_subset(points, idx, v) {
            if s.coords.min() >= mu {
                found = Some(s);
                return false;
            }
        }
        true
    });
    found
}

/// The subset maximising the smallest coordinate (ties: lexicographic).
pub fn best_surround<T: Real>(points: &[Vec<T>], v: &[T]) -> Option<Surround<T>> {
    let d = v.len();
    let mut best: Option<Surround<T>> = None;
    for_each_combination(points.len(), d + 1, |idx| {
        if let Some(s) = try_subset(points, idx, v) {
            let better = best.as_ref().is_none_or(|b| s.coords.min() > b.coords.min());
            if better && s.coords.min() > T::zero() {
                best = Some(s);
            }
        }
        true
    });
    best
}

fn try_subset<T: Real>(points: &[Vec<T>], idx: &[usize], v: &[T]) -> Option<Surround<T>> {
    let pts: Vec<Vec<T>> = idx.iter().map(|&i| points[i].clone()).collect();
    let basis = AffineBasis::new(pts).ok()?;
    let coords = barycentric_coords(&basis, v).ok()?;
    Some(Surround {
        indices: idx.to_vec(),
        coords,
    })
}

/// Visit the `k`-subsets of `0..n` in lexicographic order until `f` returns
/// `false`.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return;
        }
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// A nonnegative affine combination of a subset of points equal to `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct HullCertificate<T> {
    pub indices: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Real> HullCertificate<T> {
    /// `‖Σ w_i p_i − v‖ + |Σ w_i − 1|`.
    pub fn residual(&self, points: &[Vec<T>], v: &[T]) -> T {
        let mut acc = vec![T::zero(); v.len()];
        let mut total = T::zero();
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            linalg::axpy(&mut acc, w, &points[i]);
            total = total + w;
        }
        linalg::dist(&acc, v) + (total - T::one()).abs()
    }
}

/// Decide `v ∈ CH(points)` by nonnegative least squares, then reduce the
/// support to at most `d + 1` points witnessing it.
pub fn caratheodory_select<T: Real>(points: &[Vec<T>], v: &[T]) -> Option<HullCertificate<T>> {
    if points.is_empty() {
        return None;
    }
    nnls_hull(points, v)
}

/// Exhaustive search over affinely independent subsets of size `1..=d+1`.
pub fn exhaustive_hull<T: Real>(points: &[Vec<T>], v: &[T]) -> Option<HullCertificate<T>> {
    let d = v.len();
    let tol = T::lit(HULL_TOL);
    for k in 1..=(d + 1).min(points.len()) {
        let mut found = None;
        for_each_combination(points.len(), k, |idx| {
            if let Some(c) = affine_fit(points, idx, v) {
                if c.weights.iter().all(|&w| w >= -tol) && c.residual(points, v) <= tol {
                    found = Some(c);
                    return false;
                }
            }
            true
        });
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Least-squares affine combination of `points[idx]` closest to `v`, when
/// the subset is affinely independent.
fn affine_fit<T: Real>(points: &[Vec<T>], idx: &[usize], v: &[T]) -> Option<HullCertificate<T>> {
    let sub: Vec<Vec<T>> = idx.iter().map(|&i| points[i].clone()).collect();
    let a = lifted(&sub);
    if idx.len() > 1 && a.sigma_min().to_f64_lossy() < 1e-10 {
        return None;
    }
    let mut rhs = v.to_vec();
    rhs.push(T::one());
    let w = a.least_squares(&rhs).ok()?;
    Some(HullCertificate {
        indices: idx.to_vec(),
        weights: w,
    })
}

fn nnls_hull<T: Real>(points: &[Vec<T>], v: &[T]) -> Option<HullCertificate<T>> {
    // Sum-to-one row scaled up so it dominates the fit.
    let d = v.len();
    let scale = points
        .iter()
        .map(|p| linalg::max_abs(p))
        .fold(linalg::max_abs(v), |a, b| a.max(b))
        .max(T::one())
        * T::lit(1e3);
    let cols: Vec<Vec<T>> = points
        .iter()
        .map(|p| {
            let mut c = p.clone();
            c.push(scale);
            c
        })
        .collect();
    let a = Matrix::from_cols(&cols).ok()?;
    let mut b = v.to_vec();
    b.push(scale);
    let w = nnls(&a, &b, 3 * points.len() + 10);
    let mut support: Vec<usize> = (0..points.len()).filter(|&i| w[i] > T::zero()).collect();
    let mut weights: Vec<T> = support.iter().map(|&i| w[i]).collect();
    caratheodory_reduce(points, &mut support, &mut weights, d);
    let cert = HullCertificate {
        indices: support,
        weights,
    };
    // Renormalise and refit on the reduced support for a clean residual.
    let refit = affine_fit(points, &cert.indices, v).filter(|c| c.weights.iter().all(|&x| x >= -T::lit(HULL_TOL)));
    let best = match refit {
        Some(r) if r.residual(points, v) <= cert.residual(points, v) => r,
        _ => cert,
    };
    (best.residual(points, v) <= T::lit(1e-8)).then_some(best)
}

/// Lawson–Hanson active-set nonnegative least squares.
pub fn nnls<T: Real>(a: &Matrix<T>, b: &[T], max_iter: usize) -> Vec<T> {
    let n = a.cols();
    let at = a.transpose();
    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let tol = T::lit(1e-12) * a.frobenius().max(T::one());
    for _ in 0..max_iter {
        let r = linalg::sub(b, &a.mul_vec(&x));
        let grad = at.mul_vec(&r);
        let cand = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| grad[i].partial_cmp(&grad[j]).unwrap_or(std::cmp::Ordering::Equal));
        let Some(j) = cand else { break };
        if grad[j] <= tol {
            break;
        }
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let sub =
                Matrix::from_cols(&idx.iter().map(|&k| a.column(k)).collect::<Vec<_>>()).expect("uniform columns");
            let z = match sub.least_squares(b) {
                Ok(z) => z,
                Err(_) => {
                    passive[j] = false;
                    return x;
                }
            };
            if z.iter().all(|&zi| zi > T::zero()) {
                for (k, &i) in idx.iter().enumerate() {
                    x[i] = z[k];
                }
                break;
            }
            let mut alpha = T::one();
            for (k, &i) in idx.iter().enumerate() {
                if z[k] <= T::zero() {
                    let denom = x[i] - z[k];
                    if denom > T::zero() {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            for (k, &i) in idx.iter().enumerate() {
                x[i] = x[i] + alpha * (z[k] - x[i]);
                if x[i] <= tol {
                    x[i] = T::zero();
                    passive[i] = false;
                }
            }
        }
    }
    x
}

/// Shrink a positive affine combination to at most `d + 1` points.
fn caratheodory_reduce<T: Real>(points: &[Vec<T>], support: &mut Vec<usize>, weights: &mut Vec<T>, d: usize) {
    while support.len() > d + 1 {
        let sub: Vec<Vec<T>> = support.iter().map(|&i| points[i].clone()).collect();
        let z = match null_vector(&lifted(&sub)) {
            Some(z) => z,
            None => break,
        };
        let z = if z.iter().any(|&zi| zi > T::zero()) {
            z
        } else {
            z.iter().map(|&zi| -zi).collect()
        };
        let mut alpha = T::infinity();
        let mut kill = 0;
        for (k, &zk) in z.iter().enumerate() {
            if zk > T::zero() && weights[k] / zk < alpha {
                alpha = weights[k] / zk;
                kill = k;
            }
        }
        for k in 0..weights.len() {
            weights[k] = weights[k] - alpha * z[k];
        }
        support.remove(kill);
        weights.remove(kill);
        let mut k = 0;
        while k < weights.len() {
            if weights[k] <= T::zero() {
                support.remove(k);
                weights.remove(k);
            } else {
                k += 1;
            }
        }
    }
}

/// A nonzero kernel vector of a wide matrix, by Gauss–Jordan elimination.
fn null_vector<T: Real>(m: &Matrix<T>) -> Option<Vec<T>> {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<T>> = (0..rows).map(|r| m.row(r).to_vec()).collect();
    let scale = m.max_abs().max(T::min_positive_value());
    let tol = T::lit(1e-12) * scale;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (p, pv) = (r..rows)
            .map(|i| (i, a[i][c].abs()))
            .fold((r, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv <= tol {
            continue;
        }
        a.swap(r, p);
        let inv = T::one() / a[r][c];
        for j in 0..cols {
            a[r][j] = a[r][j] * inv;
        }
        for i in 0..rows {
            if i != r {
                let f = a[i][c];
                if f != T::zero() {
                    for j in 0..cols {
                        a[i][j] = a[i][j] - f * a[r][j];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free = (0..cols).find(|c| !pivots.contains(c))?;
    let mut z = vec![T::zero(); cols];
    z[free] = T::one();
    for (row, &pc) in pivots.iter().enumerate() {
        z[pc] = -a[row][free];
    }
    Some(z)
}

/// Grid points of a box reachable from a seed through points satisfying a
/// predicate, moving along axes.
#[derive(Clone, Debug)]
pub struct GridComponent<T> {
    pub h: T,
    pub lo: Vec<T>,
    pub counts: Vec<usize>,
    inside: Vec<bool>,
    len: usize,
}

impl<T: Real> GridComponent<T> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn point(&self, idx: &[usize]) -> Vec<T> {
        idx.iter()
            .zip(&self.lo)
            .map(|(&i, &l)| l + self.h * T::from_usize_lossy(i))
            .collect()
    }

    pub fn contains_index(&self, idx: &[usize]) -> bool {
        self.linear(idx).is_some_and(|k| self.inside[k])
    }

    /// Cell indices in lexicographic order.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        (0..self.inside.len())
            .filter(|&k| self.inside[k])
            .map(|k| self.unlinear(k))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        self.indices().iter().map(|i| self.point(i)).collect()
    }

    /// The member cell closest to `y`.
    pub fn nearest(&self, y: &[T]) -> Option<Vec<usize>> {
        let mut best: Option<(T, usize)> = None;
        for k in 0..self.inside.len() {
            if self.inside[k] {
                let d = linalg::dist(&self.point(&self.unlinear(k)), y);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, k));
                }
            }
        }
        best.map(|(_, k)| self.unlinear(k))
    }

    /// Shortest axis path between two member cells.
    pub fn shortest_path(&self, from: &[usize], to: &[usize]) -> Option<Vec<Vec<usize>>> {
        let start = self.linear(from).filter(|&k| self.inside[k])?;
        let goal = self.linear(to).filter(|&k| self.inside[k])?;
        let mut prev = vec![usize::MAX; self.inside.len()];
        prev[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            if k == goal {
                break;
            }
            for nb in self.neighbours(k) {
                if self.inside[nb] && prev[nb] == usize::MAX {
                    prev[nb] = k;
                    queue.push_back(nb);
                }
            }
        }
        if prev[goal] == usize::MAX {
            return None;
        }
        let mut path = vec![goal];
        let mut k = goal;
        while k != start {
            k = prev[k];
            path.push(k);
        }
        path.reverse();
        Some(path.into_iter().map(|k| self.unlinear(k)).collect())
    }

    fn linear(&self, idx: &[usize]) -> Option<usize> {
        let mut k = 0;
        for (&i, &n) in idx.iter().zip(&self.counts) {
            if i >= n {
                return None;
            }
            k = k * n + i;
        }
        Some(k)
    }

    fn unlinear(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for a in (0..self.counts.len()).rev() {
            idx[a] = k % self.counts[a];
            k /= self.counts[a];
        }
        idx
    }

    fn neighbours(&self, k: usize) -> Vec<usize> {
        let idx = self.unlinear(k);
        let mut out = Vec::with_capacity(2 * idx.len());
        for a in 0..idx.len() {
            for up in [false, true] {
                let mut j = idx.clone();
                if up {
                    j[a] += 1;
                } else if j[a] == 0 {
                    continue;
                } else {
                    j[a] -= 1;
                }
                if let Some(l) = self.linear(&j) {
                    out.push(l);
                }
            }
        }
        out
    }
}

/// Flood fill from the grid point nearest `seed` over `lo + h·i` in `bx`.
pub fn flood_fill_component<T: Real>(
    member: impl Fn(&[T]) -> bool,
    seed: &[T],
    bx: &Domain<T>,
    h: T,
) -> Result<GridComponent<T>> {
    if !member(seed) || !bx.contains(seed) {
        return Err(Error::SeedOutside);
    }
    let counts: Vec<usize> = (0..bx.dim())
        .map(|i| {
            let n = (bx.width(i) / h + T::lit(1e-9)).floor().to_f64_lossy();
            n.max(0.0) as usize + 1
        })
        .collect();
    let total: usize = counts.iter().product();
    let mut comp = GridComponent {
        h,
        lo: bx.lo.clone(),
        counts,
        inside: vec![false; total],
        len: 0,
    };
    let mut tested = vec![false; total];
    let mut ok = vec![false; total];
    let mut check = |comp: &GridComponent<T>, k: usize| -> bool {
        if !tested[k] {
            tested[k] = true;
            ok[k] = member(&comp.point(&comp.unlinear(k)));
        }
        ok[k]
    };
    // Nearest grid point, or the best member among the enclosing corners.
    let base: Vec<usize> = (0..bx.dim())
        .map(|i| {
            let r = ((seed[i] - bx.lo[i]) / h).floor().to_f64_lossy().max(0.0) as usize;
            r.min(comp.counts[i] - 1)
        })
        .collect();
    let mut corners: Vec<(T, usize)> = Vec::new();
    for mask in 0..(1usize << bx.dim()) {
        let idx: Vec<usize> = base
            .iter()
            .enumerate()
            .map(|(a, &b)| (b + ((mask >> a) & 1)).min(comp.counts[a] - 1))
            .collect();
        let k = comp.linear(&idx).expect("clamped");
        corners.push((linalg::dist(&comp.point(&idx), seed), k));
    }
    corners.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let start = corners
        .iter()
        .map(|&(_, k)| k)
        .find(|&k| check(&comp, k))
        .ok_or(Error::SeedOutside)?;
    let mut queue = VecDeque::from([start]);
    comp.inside[start] = true;
    comp.len = 1;
    while let Some(k) = queue.pop_front() {
        for nb in comp.neighbours(k) {
            if !comp.inside[nb] && check(&comp, nb) {
                comp.inside[nb] = true;
                comp.len += 1;
                queue.push_back(nb);
            }
        }
    }
    Ok(comp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> AffineBasis<f64> {
        AffineBasis::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn barycentric_by_hand() {
        let w = barycentric_coords(&tri(), &[0.25, 0.25]).unwrap().weights;
        for (a, b) in w.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
        let w = barycentric_coords(&tri(), &[1.0, 0.0]).unwrap().weights;
        assert!((w[1] - 1.0).abs() < 1e-12 && w[0].abs() < 1e-12);
    }

    #[test]
    fn interior_floors() {
        assert!(is_interior_of_hull(&tri(), &[0.25, 0.25], 0.2).unwrap());
        assert!(!is_interior_of_hull(&tri(), &[0.25, 0.25], 0.3).unwrap());
        assert!(!is_interior_of_hull(&tri(), &[0.0, 0.0], 1e-3).unwrap());
    }

    #[test]
    fn degenerate_basis_rejected() {
        let e = AffineBasis::new(vec![vec![0.0f64, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(matches!(e, Err(Error::SingularBasis { .. })));
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| {
            seen.push(c.to_vec());
            true
        });
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn surrounds_triangle_and_square() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = surrounds(&pts, &[0.25, 0.25], 0.2).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2]);
        let sq = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert!(surrounds(&sq, &[0.5, 0.5], 1e-6).is_none());
        assert!(caratheodory_select(&sq, &[0.5, 0.5]).is_some());
    }

    #[test]
    fn nnls_path_matches_exhaustive_on_a_cloud() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.7;
                vec![a.cos() * (1.0 + 0.1 * i as f64), a.sin()]
            })
            .collect();
        for v in [[0.1, 0.2], [0.0, -0.3], [5.0, 5.0]] {
            let n = nnls_hull(&pts, &v);
            let e = exhaustive_hull(&pts, &v);
            assert_eq!(n.is_some(), e.is_some(), "v={v:?}");
            if let Some(c) = n {
                assert!(c.indices.len() <= 3);
                assert!(c.residual(&pts, &v) < 1e-8);
            }
        }
    }

    #[test]
    fn flood_fill_half_plane() {
        let bx = Domain::cube(2, -1.0f64, 1.0);
        let c = flood_fill_component(|y: &[f64]| y[1] != 0.0, &[0.0, 1.0], &bx, 0.25).unwrap();
        assert_eq!(c.len(), 9 * 4);
        assert!(c.points().iter().all(|p| p[1] > 0.0));
        let e = flood_fill_component(|y: &[f64]| y[1] > 0.0, &[0.0, -1.0], &bx, 0.25);
        assert!(matches!(e, Err(Error::SeedOutside)));
    }
}

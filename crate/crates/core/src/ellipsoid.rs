//! Solid ellipsoids in any dimension: membership, support function, nearest
//! and farthest points, and the Euclidean distance between two ellipsoids.
//!
//! An ellipsoid is `{c + E diag(a) u : |u| <= 1}` where the columns of `E`
//! are orthonormal axes and `a` holds the semi-axis lengths.

use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::geometry::checked_covariance;

pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;
/// Convergence tolerance of [`closest_points`], relative to the problem scale.
pub const DISTANCE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 10_000;
const REFINE_AFTER: usize = 32;
const JACOBI_SWEEPS: usize = 8;
const DUAL_ITERATIONS: usize = 200;
/// Relative tolerance of the Lagrange-multiplier root finds.
pub const ROOT_TOLERANCE: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    center: DVector<f64>,
    axes: DMatrix<f64>,
    semi_lengths: DVector<f64>,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, axes: DMatrix<f64>, semi_lengths: DVector<f64>) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(invalid("center", "ellipsoid needs at least one dimension"));
        }
        if axes.nrows() != n || axes.ncols() != n {
            return Err(Error::DimensionMismatch { context: "ellipsoid axes", expected: n, found: axes.nrows() });
        }
        if semi_lengths.len() != n {
            return Err(Error::DimensionMismatch { context: "semi-axis lengths", expected: n, found: semi_lengths.len() });
        }
        if center.iter().chain(axes.iter()).chain(semi_lengths.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ellipsoid"));
        }
        if semi_lengths.iter().any(|&a| a <= 0.0) {
            return Err(invalid("semi_lengths", "must be positive"));
        }
        if (axes.tr_mul(&axes) - DMatrix::identity(n, n)).amax() > ORTHONORMAL_TOLERANCE {
            return Err(invalid("axes", "columns must be orthonormal"));
        }
        Ok(Self { center, axes, semi_lengths })
    }

    pub fn sphere(center: DVector<f64>, radius: f64) -> Result<Self> {
        let n = center.len();
        Self::new(center, DMatrix::identity(n, n), DVector::from_element(n, radius))
    }

    /// The `k`-sigma ellipsoid of a Gaussian with the given covariance:
    /// `{x : |Lambda^{-1/2} E^T (center - x)| <= k}`.
    pub fn from_covariance(center: DVector<f64>, cov: &DMatrix<f64>, k: f64) -> Result<Self> {
        ensure_finite(k, "k")?;
        if k <= 0.0 {
            return Err(invalid("k", "sigma multiple must be positive"));
        }
        let n = center.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch { context: "ellipsoid covariance", expected: n, found: cov.nrows() });
        }
        let cov = checked_covariance(cov.clone(), "ellipsoid covariance")?;
        let (values, vectors) = polished_eigen(&cov);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        let smallest = values[order[n - 1]];
        if smallest <= 0.0 {
            return Err(Error::Singular { what: "ellipsoid covariance", eigenvalue: smallest });
        }
        let axes = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
        let semi = DVector::from_fn(n, |i, _| k * libm::sqrt(values[order[i]]));
        Self::new(center, axes, semi)
    }

    /// Same shape, moved to a new center.
    pub fn recentered(&self, center: DVector<f64>) -> Self {
        assert_eq!(center.len(), self.dim());
        Self { center, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
    pub fn axes(&self) -> &DMatrix<f64> {
        &self.axes
    }
    pub fn semi_lengths(&self) -> &DVector<f64> {
        &self.semi_lengths
    }
    pub fn max_semi_length(&self) -> f64 {
        self.semi_lengths.max()
    }

    /// Coordinates of `p` along the axes, relative to the center.
    pub fn local(&self, p: &DVector<f64>) -> DVector<f64> {
        self.axes.tr_mul(&(p - &self.center))
    }

    pub fn to_global(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.axes * y
    }

    /// Gauge of `p`: 1 on the boundary, below 1 inside.
    pub fn level(&self, p: &DVector<f64>) -> f64 {
        let y = self.local(p);
        libm::sqrt(y.iter().zip(self.semi_lengths.iter()).map(|(y, a)| (y / a) * (y / a)).sum())
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        self.level(p) <= 1.0
    }

    /// Support function `max_{x in E} n . x`.
    pub fn support(&self, direction: &DVector<f64>) -> f64 {
        let m = self.axes.tr_mul(direction);
        let spread: f64 = m.iter().zip(self.semi_lengths.iter()).map(|(m, a)| (m * a) * (m * a)).sum();
        direction.dot(&self.center) + libm::sqrt(spread)
    }

    /// Closest point of the solid ellipsoid to `p` (`p` itself when inside).
    pub fn nearest_point(&self, p: &DVector<f64>) -> DVector<f64> {
        let y = self.local(p);
        let a = self.semi_lengths.as_slice();
        let z = nearest_local(a, y.as_slice());
        self.to_global(&DVector::from_vec(z))
    }

    /// Largest distance from `p` to a point of the ellipsoid.
    pub fn farthest_distance(&self, p: &DVector<f64>) -> f64 {
        let y = self.local(p);
        farthest_local(self.semi_lengths.as_slice(), y.as_slice())
    }

    /// Image under the affine map `x -> W (x - origin)`.
    pub(crate) fn transformed(&self, w: &DMatrix<f64>, origin: &DVector<f64>) -> Result<Self> {
        let center = w * (&self.center - origin);
        let shape = w * &self.axes * DMatrix::from_diagonal(&self.semi_lengths);
        let gram = &shape * shape.transpose();
        let gram = (&gram + gram.transpose()) * 0.5;
        let n = self.dim();
        let eig = gram.symmetric_eigen();
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::Singular { what: "transformed ellipsoid", eigenvalue: eig.eigenvalues.min() });
        }
        let semi = DVector::from_fn(n, |i, _| libm::sqrt(eig.eigenvalues[i]));
        Self::new(center, eig.eigenvectors, semi)
    }

    /// Whitening map `x -> diag(1/a) E^T x` sending this ellipsoid (about
    /// its center) to the unit ball.
    pub(crate) fn whitening(&self) -> DMatrix<f64> {
        let inv = self.semi_lengths.map(|a| 1.0 / a);
        DMatrix::from_diagonal(&inv) * self.axes.transpose()
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let lex = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        };
        lex(self.center.as_slice(), other.center.as_slice())
            .then_with(|| lex(self.semi_lengths.as_slice(), other.semi_lengths.as_slice()))
            .then_with(|| lex(self.axes.as_slice(), other.axes.as_slice()))
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Safeguarded Newton for a convex decreasing function on `[lo, hi]` with a
/// root inside, started from `lo`.
fn decreasing_root<F>(f: F, mut lo: f64, mut hi: f64) -> f64
where
    F: Fn(f64) -> (f64, f64),
{
    let mut t = lo;
    for _ in 0..ROOT_MAX_ITER {
        let (g, dg) = f(t);
        if g == 0.0 {
            return t;
        }
        if g > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let scale = if next.abs() > 0.0 { next.abs() } else { hi };
        if (next - t).abs() <= ROOT_TOLERANCE * scale * 1e-3 || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        t = next;
    }
    t
}

fn nearest_local(a: &[f64], y: &[f64]) -> Vec<f64> {
    let level: f64 = y.iter().zip(a).map(|(y, a)| (y / a) * (y / a)).sum();
    if level <= 1.0 {
        return y.to_vec();
    }
    // Closest point x_i = a_i^2 y_i / (a_i^2 + t), t >= 0 solving
    // sum (a_i y_i / (a_i^2 + t))^2 = 1.
    let a_max = a.iter().cloned().fold(0.0, f64::max);
    let lo = a.iter().zip(y).map(|(a, y)| a * y.abs() - a * a).fold(0.0, f64::max);
    let hi = a_max * norm(y);
    let t = decreasing_root(
        |t| {
            let mut g = -1.0;
            let mut dg = 0.0;
            for (a, y) in a.iter().zip(y) {
                let q = a * y / (a * a + t);
                g += q * q;
                dg -= 2.0 * q * q / (a * a + t);
            }
            (g, dg)
        },
        lo,
        hi.max(lo),
    );
    a.iter().zip(y).map(|(a, y)| a * a * y / (a * a + t)).collect()
}

fn farthest_local(a: &[f64], y: &[f64]) -> f64 {
    let a_max = a.iter().cloned().fold(0.0, f64::max);
    let a2 = a_max * a_max;
    let top: Vec<bool> = a.iter().map(|&ai| ai == a_max).collect();
    let y_top = norm(&y.iter().zip(&top).filter(|(_, t)| **t).map(|(y, _)| *y).collect::<Vec<_>>());
    if y_top == 0.0 {
        // Multiplier pinned at a_max^2 when the remaining terms cannot reach
        // the boundary; the slack goes to a longest axis.
        let mut h0 = -1.0;
        let mut dist2 = 0.0;
        for ((&ai, &yi), &t) in a.iter().zip(y).zip(&top) {
            if !t {
                let z = ai * ai * yi / (ai * ai - a2);
                h0 += (z / ai) * (z / ai);
                dist2 += (z - yi) * (z - yi);
            }
        }
        if h0 <= 0.0 {
            return libm::sqrt(dist2 - a2 * h0);
        }
    }
    // Farthest point z_i = a_i^2 y_i / (a_i^2 - a_max^2 - w), w > 0 solving
    // sum (a_i y_i / (a_max^2 + w - a_i^2))^2 = 1.
    let lo = a
        .iter()
        .zip(y)
        .map(|(ai, yi)| ai * yi.abs() - (a2 - ai * ai))
        .fold(0.0, f64::max);
    let hi = a_max * norm(y);
    let w = decreasing_root(
        |w| {
            let mut g = -1.0;
            let mut dg = 0.0;
            for (ai, yi) in a.iter().zip(y) {
                let den = a2 + w - ai * ai;
                let q = ai * yi / den;
                g += q * q;
                dg -= 2.0 * q * q / den;
            }
            (g, dg)
        },
        lo,
        hi.max(lo),
    );
    let d2: f64 = a
        .iter()
        .zip(y)
        .map(|(ai, yi)| {
            let z = ai * ai * yi / (ai * ai - a2 - w);
            (z - yi) * (z - yi)
        })
        .sum();
    libm::sqrt(d2)
}

/// Result of the ellipsoid distance search.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosestPoints {
    pub first: DVector<f64>,
    pub second: DVector<f64>,
    /// 0 when the solids intersect.
    pub distance: f64,
    /// Separating-hyperplane lower bound on the distance.
    pub lower_bound: f64,
    pub iterations: usize,
    /// Index of the start that produced the result.
    pub start: usize,
}

/// Symmetric eigendecomposition finished with cyclic Jacobi sweeps.
///
/// The QR-based solver's stopping rule can leave relative errors near 1e-8
/// in the smaller eigenpairs of ill-conditioned matrices; a few sweeps bring
/// the off-diagonal part down to rounding level.
fn polished_eigen(cov: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = cov.nrows();
    let eig = cov.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    let mut a = v.transpose() * cov * &v;
    let norm = a.norm();
    for _ in 0..JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if libm::sqrt(off) <= f64::EPSILON * 1e-2 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

struct Run {
    first: DVector<f64>,
    second: DVector<f64>,
    upper: f64,
    lower: f64,
    iterations: usize,
    converged: bool,
}

fn alternate(e1: &Ellipsoid, e2: &Ellipsoid, start: DVector<f64>, tol: f64) -> Run {
    let mut p1 = start;
    let mut best = Run {
        first: p1.clone(),
        second: p1.clone(),
        upper: f64::INFINITY,
        lower: f64::NEG_INFINITY,
        iterations: 0,
        converged: false,
    };
    for it in 1..=MAX_ITERATIONS {
        let p2 = e2.nearest_point(&p1);
        p1 = e1.nearest_point(&p2);
        let diff = &p2 - &p1;
        let upper = diff.norm();
        let lower = if upper > 0.0 {
            let n = &diff / upper;
            -e2.support(&(-&n)) - e1.support(&n)
        } else {
            0.0
        };
        let done = upper <= tol || upper - lower <= tol;
        if upper < best.upper || done {
            best.first = p1.clone();
            best.second = p2;
            best.upper = upper;
        }
        best.lower = best.lower.max(lower);
        best.iterations = it;
        if done {
            best.converged = true;
            break;
        }
        if it == REFINE_AFTER && upper > 0.0 {
            if let Some(mut refined) = dual_refine(e1, e2, &(&diff / upper), tol) {
                refined.iterations += it;
                return refined;
            }
        }
    }
    best
}

/// Newton ascent of `g(n) = n.(c2 - c1) - |A1^T n| - |A2^T n|` on the unit
/// sphere. Every unit `n` gives `g(n) <= distance`; the support points in
/// direction `n` give the matching upper bound.
fn dual_refine(e1: &Ellipsoid, e2: &Ellipsoid, n0: &DVector<f64>, tol: f64) -> Option<Run> {
    let dim = e1.dim();
    let factor = |e: &Ellipsoid| DMatrix::from_diagonal(e.semi_lengths()) * e.axes().transpose();
    let (b1, b2) = (factor(e1), factor(e2));
    let d = e2.center() - e1.center();
    let g = |n: &DVector<f64>| n.dot(&d) - (&b1 * n).norm() - (&b2 * n).norm();
    let mut n = n0.normalize();
    let mut value = g(&n);
    for it in 1..=DUAL_ITERATIONS {
        let (y1, y2) = (&b1 * &n, &b2 * &n);
        let (r1, r2) = (y1.norm(), y2.norm());
        let (w1, w2) = (b1.tr_mul(&y1), b2.tr_mul(&y2));
        let first = e1.center() + &w1 / r1;
        let second = e2.center() - &w2 / r2;
        let upper = (&second - &first).norm();
        if upper - value <= tol {
            return Some(Run { first, second, upper, lower: value, iterations: it, converged: true });
        }
        let grad = &d - &w1 / r1 - &w2 / r2;
        let proj = DMatrix::identity(dim, dim) - &n * n.transpose();
        let rgrad = &proj * &grad;
        let hess = -(b1.tr_mul(&b1) / r1 - &w1 * w1.transpose() / (r1 * r1 * r1))
            - (b2.tr_mul(&b2) / r2 - &w2 * w2.transpose() / (r2 * r2 * r2));
        let system = -(&proj * hess * &proj - &proj * value - &n * n.transpose());
        let step = match (value > 0.0).then(|| system.cholesky()).flatten() {
            Some(chol) => chol.solve(&rgrad),
            None => &rgrad / (r1 + r2).max(f64::MIN_POSITIVE),
        };
        let mut t = 1.0;
        loop {
            let cand = (&n + &step * t).normalize();
            let cv = g(&cand);
            if cv > value {
                n = cand;
                value = cv;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return None;
            }
        }
    }
    None
}

/// Closest pair of points between two solid ellipsoids.
///
/// Intersection is detected first (either center inside the other solid, or
/// the center-line segment crossing both). Otherwise alternating projection
/// runs from deterministic starts: the two center-line boundary points and
/// the axis extremes of the first ellipsoid. Runs that have not settled after
/// a few sweeps switch to Newton ascent on the separating direction, which
/// stays fast for nearly touching pairs. A start stops once the
/// separating-hyperplane bound certifies the distance to within
/// [`DISTANCE_TOLERANCE`] times the problem scale.
pub fn closest_points(e1: &Ellipsoid, e2: &Ellipsoid) -> Result<ClosestPoints> {
    if e1.dim() != e2.dim() {
        return Err(Error::DimensionMismatch { context: "ellipsoid pair", expected: e1.dim(), found: e2.dim() });
    }
    if e2.canonical_cmp(e1) == Ordering::Less {
        let mut res = closest_points_ordered(e2, e1)?;
        core::mem::swap(&mut res.first, &mut res.second);
        return Ok(res);
    }
    closest_points_ordered(e1, e2)
}

/// Point minimizing the larger of the two gauges, when that gauge is at most 1.
///
/// For `M(s) = s Q1 + (1 - s) Q2` with `Qi = Ei diag(ai^2) Ei^T`, the weighted
/// sum `(1 - s) g1(x)^2 + s g2(x)^2` has minimum `f(s) = s (1 - s) d^T M^-1 d`
/// at `x(s) = c1 + s Q1 M^-1 d`. `f` is concave and its maximum equals
/// `min_x max(g1, g2)^2`, so the solids intersect exactly when `max f <= 1`.
fn common_point(e1: &Ellipsoid, e2: &Ellipsoid, d: &DVector<f64>) -> Option<DVector<f64>> {
    let shape = |e: &Ellipsoid| {
        let a2 = e.semi_lengths().map(|a| a * a);
        e.axes() * DMatrix::from_diagonal(&a2) * e.axes().transpose()
    };
    let (q1, q2) = (shape(e1), shape(e2));
    let solve = |s: f64| -> Option<DVector<f64>> { (&q1 * s + &q2 * (1.0 - s)).cholesky().map(|c| c.solve(d)) };
    let f = |s: f64| solve(s).map_or(f64::NEG_INFINITY, |m| s * (1.0 - s) * d.dot(&m));

    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-13 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let s = 0.5 * (lo + hi);
    if f(s) > 1.0 {
        return None;
    }
    solve(s).map(|m| e1.center() + &q1 * m * s)
}

fn touching(p: DVector<f64>) -> ClosestPoints {
    ClosestPoints { first: p.clone(), second: p, distance: 0.0, lower_bound: 0.0, iterations: 0, start: 0 }
}

fn closest_points_ordered(e1: &Ellipsoid, e2: &Ellipsoid) -> Result<ClosestPoints> {
    let (c1, c2) = (e1.center(), e2.center());
    if e1.contains(c2) {
        return Ok(touching(c2.clone()));
    }
    if e2.contains(c1) {
        return Ok(touching(c1.clone()));
    }
    let d = c2 - c1;
    // Gauges scale linearly along rays from each center.
    let exit1 = 1.0 / e1.level(c2);
    let entry2 = 1.0 - 1.0 / e2.level(c1);
    if exit1 >= entry2 {
        return Ok(touching(c1 + &d * exit1));
    }
    if let Some(common) = common_point(e1, e2, &d) {
        return Ok(touching(common));
    }
    let scale = d.norm().max(e1.max_semi_length()).max(e2.max_semi_length());
    let tol = DISTANCE_TOLERANCE * scale;

    let mut starts = Vec::with_capacity(2 + 2 * e1.dim());
    starts.push(c1 + &d * exit1);
    starts.push(e1.nearest_point(&(c1 + &d * entry2)));
    for i in 0..e1.dim() {
        let axis = e1.axes().column(i) * e1.semi_lengths()[i];
        starts.push(c1 + &axis);
        starts.push(c1 - &axis);
    }

    let mut best: Option<(usize, Run)> = None;
    let mut total = 0;
    for (index, start) in starts.into_iter().enumerate() {
        let run = alternate(e1, e2, start, tol);
        total += run.iterations;
        let better = match &best {
            None => true,
            Some((_, b)) => run.upper < b.upper || (run.converged && !b.converged),
        };
        let converged = run.converged;
        if better {
            best = Some((index, run));
        }
        // A certified start bounds every other start's answer from below.
        if converged {
            break;
        }
    }
    let (start, run) = best.expect("at least one start");
    if !run.converged {
        return Err(Error::NoConvergence { iterations: total, lower: run.lower.max(0.0), upper: run.upper });
    }
    let distance = if run.upper <= tol && run.lower <= 0.0 { 0.0 } else { run.upper };
    Ok(ClosestPoints {
        first: run.first,
        second: run.second,
        distance,
        lower_bound: run.lower.max(0.0),
        iterations: run.iterations,
        start,
    })
}

/// Euclidean distance between two solid ellipsoids (0 when they intersect).
pub fn min_distance(e1: &Ellipsoid, e2: &Ellipsoid) -> Result<f64> {
    closest_points(e1, e2).map(|c| c.distance)
}

//! Belief and plausibility of confidence regions, and a Monte Carlo harness
//! for the validity criterion `Pro(Bel(A) >= 1 - alpha) <= alpha` over
//! false propositions `A`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::detection::ncx2_cdf;
use crate::ellipsoid::{min_distance, Ellipsoid};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::geometry::checked_covariance;
use crate::sim::{binomial_stderr, run_trials, TrialRng, GENERATOR_NAME};
use crate::special::{chi2_cdf, chi2_quantile, normal_cdf, normal_interval};

/// Relative slack in containment and intersection tests.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-12;
/// Standard errors allowed above `alpha` before a level fails.
pub const VERDICT_SIGMAS: f64 = 3.0;

/// Subsets of parameter space with decidable relations to ellipsoidal regions.
/// Balls and ellipsoids are closed; a half-space is `{x : normal . x <= offset}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposition {
    Full,
    Empty,
    Ball { center: DVector<f64>, radius: f64 },
    Ellipsoid(Ellipsoid),
    HalfSpace { normal: DVector<f64>, offset: f64 },
    Complement(Box<Proposition>),
    Union(Vec<Proposition>),
    Intersection(Vec<Proposition>),
}

impl Proposition {
    pub fn complement(&self) -> Proposition {
        match self {
            Proposition::Full => Proposition::Empty,
            Proposition::Empty => Proposition::Full,
            Proposition::Complement(inner) => (**inner).clone(),
            other => Proposition::Complement(Box::new(other.clone())),
        }
    }

    /// Complement of the closed ball, the usual false proposition about a
    /// parameter known to sit at `center`.
    pub fn outside_ball(center: DVector<f64>, radius: f64) -> Proposition {
        Proposition::Ball { center, radius }.complement()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        let mismatch = |found| Err(Error::DimensionMismatch { context: "proposition", expected: n, found });
        match self {
            Proposition::Full | Proposition::Empty => Ok(()),
            Proposition::Ball { center, .. } if center.len() != n => mismatch(center.len()),
            Proposition::HalfSpace { normal, .. } if normal.len() != n => mismatch(normal.len()),
            Proposition::Ellipsoid(e) if e.dim() != n => mismatch(e.dim()),
            Proposition::Complement(inner) => inner.check_dim(n),
            Proposition::Union(parts) | Proposition::Intersection(parts) => parts.iter().try_for_each(|p| p.check_dim(n)),
            _ => Ok(()),
        }
    }

    pub fn contains_point(&self, p: &DVector<f64>) -> bool {
        match self {
            Proposition::Full => true,
            Proposition::Empty => false,
            Proposition::Ball { center, radius } => (p - center).norm() <= *radius,
            Proposition::Ellipsoid(e) => e.contains(p),
            Proposition::HalfSpace { normal, offset } => normal.dot(p) <= *offset,
            Proposition::Complement(inner) => !inner.contains_point(p),
            Proposition::Union(parts) => parts.iter().any(|q| q.contains_point(p)),
            Proposition::Intersection(parts) => parts.iter().all(|q| q.contains_point(p)),
        }
    }

    /// Whether the proposition contains the whole (nonempty) region.
    pub fn contains_region(&self, region: &Ellipsoid) -> Result<bool> {
        self.check_dim(region.dim())?;
        self.contains_unchecked(region)
    }

    /// Whether the proposition meets the region.
    pub fn intersects_region(&self, region: &Ellipsoid) -> Result<bool> {
        self.check_dim(region.dim())?;
        self.intersects_unchecked(region)
    }

    fn contains_unchecked(&self, region: &Ellipsoid) -> Result<bool> {
        Ok(match self {
            Proposition::Full => true,
            Proposition::Empty => false,
            Proposition::Ball { center, radius } => {
                region.farthest_distance(center) <= radius * (1.0 + CONTAINMENT_TOLERANCE)
            }
            Proposition::Ellipsoid(e) => {
                let inner = region.transformed(&e.whitening(), e.center())?;
                inner.farthest_distance(&DVector::zeros(region.dim())) <= 1.0 + CONTAINMENT_TOLERANCE
            }
            Proposition::HalfSpace { normal, offset } => {
                region.support(normal) <= offset + CONTAINMENT_TOLERANCE * slack(normal, region)
            }
            Proposition::Complement(inner) => !inner.intersects_unchecked(region)?,
            Proposition::Intersection(parts) => {
                for p in parts {
                    if !p.contains_unchecked(region)? {
                        return Ok(false);
                    }
                }
                true
            }
            Proposition::Union(parts) => {
                let mut meeting = Vec::new();
                for p in parts {
                    if p.contains_unchecked(region)? {
                        return Ok(true);
                    }
                    if p.intersects_unchecked(region)? {
                        meeting.push(p);
                    }
                }
                match meeting.as_slice() {
                    [] => false,
                    [only] => only.contains_unchecked(region)?,
                    _ => return Err(Error::Unsupported("region split across several union members")),
                }
            }
        })
    }

    fn intersects_unchecked(&self, region: &Ellipsoid) -> Result<bool> {
        Ok(match self {
            Proposition::Full => true,
            Proposition::Empty => false,
            Proposition::Ball { center, radius } => {
                (region.nearest_point(center) - center).norm() <= radius * (1.0 + CONTAINMENT_TOLERANCE)
            }
            Proposition::Ellipsoid(e) => min_distance(e, region)? == 0.0,
            Proposition::HalfSpace { normal, offset } => {
                -region.support(&(-normal)) <= offset + CONTAINMENT_TOLERANCE * slack(normal, region)
            }
            Proposition::Complement(inner) => !inner.contains_unchecked(region)?,
            Proposition::Union(parts) => {
                for p in parts {
                    if p.intersects_unchecked(region)? {
                        return Ok(true);
                    }
                }
                false
            }
            Proposition::Intersection(parts) => {
                let mut binding = Vec::new();
                for p in parts {
                    if !p.intersects_unchecked(region)? {
                        return Ok(false);
                    }
                    if !p.contains_unchecked(region)? {
                        binding.push(p);
                    }
                }
                match binding.as_slice() {
                    [] => true,
                    [only] => only.intersects_unchecked(region)?,
                    _ => return Err(Error::Unsupported("intersection of several partially overlapping members")),
                }
            }
        })
    }
}

fn slack(normal: &DVector<f64>, region: &Ellipsoid) -> f64 {
    normal.norm() * (region.center().norm() + region.max_semi_length())
}

/// Belief and plausibility that a confidence region at level `1 - alpha`
/// assigns to a proposition: `1 - alpha` if the proposition contains the
/// region (else 0), and 1 if it meets the region (else `alpha`).
pub fn region_belief(region: &Ellipsoid, alpha: f64, proposition: &Proposition) -> Result<(f64, f64)> {
    ensure_finite(alpha, "alpha")?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", "must lie in [0, 1]"));
    }
    let bel = if proposition.contains_region(region)? { 1.0 - alpha } else { 0.0 };
    let pls = if proposition.intersects_region(region)? { 1.0 } else { alpha };
    Ok((bel, pls))
}

/// A data-dependent belief assignment over propositions.
pub trait BeliefRule: Sync {
    type Data;

    fn belief(&self, data: &Self::Data, proposition: &Proposition) -> Result<f64>;

    fn plausibility(&self, data: &Self::Data, proposition: &Proposition) -> Result<f64> {
        Ok(1.0 - self.belief(data, &proposition.complement())?)
    }

    /// `Bel(A) >= 1 - alpha`, the event counted by [`validity_check`].
    fn assigns_high_belief(&self, data: &Self::Data, proposition: &Proposition, alpha: f64) -> Result<bool> {
        Ok(self.belief(data, proposition)? >= 1.0 - alpha)
    }
}

/// Which confidence regions a [`ConfidenceRegionRule`] uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionLevel {
    /// A single region at level `1 - alpha`.
    Fixed(f64),
    /// The nested family over all levels: `Bel(A) = sup {1 - a : region_a ⊆ A}`.
    Nested,
}

/// Beliefs from the k-sigma regions `{theta : |x - theta|_C <= k}` of a
/// Gaussian observation with known covariance `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRegionRule {
    cov: DMatrix<f64>,
    level: RegionLevel,
}

const NESTED_K_MAX: f64 = 40.0;

impl ConfidenceRegionRule {
    pub fn new(cov: DMatrix<f64>, level: RegionLevel) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
            return Err(invalid("cov", "must be a nonempty square matrix"));
        }
        let cov = checked_covariance(cov, "region covariance")?;
        if let RegionLevel::Fixed(a) = level {
            ensure_finite(a, "alpha")?;
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid("alpha", "must lie in (0, 1)"));
            }
        }
        Ok(Self { cov, level })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// Sigma multiple whose region has coverage `1 - alpha`.
    pub fn k_for(&self, alpha: f64) -> f64 {
        libm::sqrt(chi2_quantile(self.dim() as f64, 1.0 - alpha))
    }

    /// Region at coverage `1 - alpha`, centred on the observation.
    pub fn region(&self, x: &DVector<f64>, alpha: f64) -> Result<Ellipsoid> {
        Ellipsoid::from_covariance(x.clone(), &self.cov, self.k_for(alpha))
    }

    fn nested_belief(&self, x: &DVector<f64>, proposition: &Proposition) -> Result<f64> {
        if !proposition.contains_point(x) {
            return Ok(0.0);
        }
        let within = |k: f64| proposition.contains_region(&Ellipsoid::from_covariance(x.clone(), &self.cov, k)?);
        let n = self.dim() as f64;
        if within(NESTED_K_MAX)? {
            return Ok(chi2_cdf(n, NESTED_K_MAX * NESTED_K_MAX));
        }
        let (mut lo, mut hi) = (0.0, NESTED_K_MAX);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if mid > 0.0 && within(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(chi2_cdf(n, lo * lo))
    }
}

impl BeliefRule for ConfidenceRegionRule {
    type Data = DVector<f64>;

    fn belief(&self, x: &DVector<f64>, proposition: &Proposition) -> Result<f64> {
        match self.level {
            RegionLevel::Fixed(alpha) => Ok(region_belief(&self.region(x, alpha)?, alpha, proposition)?.0),
            RegionLevel::Nested => self.nested_belief(x, proposition),
        }
    }

    fn assigns_high_belief(&self, x: &DVector<f64>, proposition: &Proposition, alpha: f64) -> Result<bool> {
        match self.level {
            RegionLevel::Fixed(_) => Ok(self.belief(x, proposition)? >= 1.0 - alpha),
            RegionLevel::Nested => {
                if alpha >= 1.0 {
                    Ok(true)
                } else if alpha <= 0.0 {
                    Ok(matches!(proposition, Proposition::Full))
                } else {
                    proposition.contains_region(&self.region(x, alpha)?)
                }
            }
        }
    }
}

/// Additive epistemic rule: belief is the mass of `N(x, C)`.
///
/// Supported: half-spaces, balls when `C` is isotropic, ellipsoids whose
/// shape is a multiple of `C`, and complements of these.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosteriorRule {
    cov: DMatrix<f64>,
    cov_inv: DMatrix<f64>,
}

impl GaussianPosteriorRule {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
            return Err(invalid("cov", "must be a nonempty square matrix"));
        }
        let cov = checked_covariance(cov, "posterior covariance")?;
        let cov_inv = cov
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or(Error::Singular { what: "posterior covariance", eigenvalue: 0.0 })?;
        Ok(Self { cov, cov_inv })
    }

    fn isotropic_sigma(&self) -> Option<f64> {
        let n = self.cov.nrows();
        let v = self.cov[(0, 0)];
        let scaled = &self.cov / v - DMatrix::identity(n, n);
        (scaled.amax() <= 1e-12).then(|| libm::sqrt(v))
    }

    /// Posterior mass of a proposition.
    pub fn mass(&self, x: &DVector<f64>, proposition: &Proposition) -> Result<f64> {
        proposition.check_dim(x.len())?;
        let n = x.len();
        Ok(match proposition {
            Proposition::Full => 1.0,
            Proposition::Empty => 0.0,
            Proposition::HalfSpace { normal, offset } => {
                let spread = libm::sqrt((normal.transpose() * &self.cov * normal)[0]);
                normal_cdf((offset - normal.dot(x)) / spread)
            }
            Proposition::Ball { center, radius } => {
                let sigma = self
                    .isotropic_sigma()
                    .ok_or(Error::Unsupported("ball under a non-isotropic posterior"))?;
                if n == 1 {
                    normal_interval((center[0] - radius - x[0]) / sigma, (center[0] + radius - x[0]) / sigma)
                } else {
                    let lambda = (x - center).norm_squared() / (sigma * sigma);
                    ncx2_cdf(n as u32, lambda, (radius / sigma) * (radius / sigma))?
                }
            }
            Proposition::Ellipsoid(e) => {
                let a2 = e.semi_lengths().map(|a| a * a);
                let shape = e.axes() * DMatrix::from_diagonal(&a2) * e.axes().transpose();
                let ratio = &shape * &self.cov_inv;
                let k2 = ratio.trace() / n as f64;
                if (ratio / k2 - DMatrix::identity(n, n)).amax() > 1e-9 {
                    return Err(Error::Unsupported("ellipsoid not aligned with the posterior covariance"));
                }
                let d = x - e.center();
                let lambda = (d.transpose() * &self.cov_inv * &d)[0];
                ncx2_cdf(n as u32, lambda, k2)?
            }
            Proposition::Complement(inner) => 1.0 - self.mass(x, inner)?,
            Proposition::Union(_) | Proposition::Intersection(_) => {
                return Err(Error::Unsupported("posterior mass of a union or intersection"))
            }
        })
    }
}

impl BeliefRule for GaussianPosteriorRule {
    type Data = DVector<f64>;

    fn belief(&self, x: &DVector<f64>, proposition: &Proposition) -> Result<f64> {
        self.mass(x, proposition)
    }

    fn plausibility(&self, x: &DVector<f64>, proposition: &Proposition) -> Result<f64> {
        self.mass(x, proposition)
    }

    fn assigns_high_belief(&self, x: &DVector<f64>, proposition: &Proposition, alpha: f64) -> Result<bool> {
        // Compare the small complementary mass directly to keep precision.
        match proposition {
            Proposition::Complement(inner) => Ok(self.mass(x, inner)? <= alpha),
            other => Ok(self.mass(x, other)? >= 1.0 - alpha),
        }
    }
}

/// Generator of data given the true parameter.
pub trait SamplingModel: Sync {
    type Data: Send;

    fn dim(&self) -> usize;
    fn sample(&self, theta: &DVector<f64>, rng: &mut TrialRng) -> Self::Data;
}

/// `x ~ N(theta, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    factor: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
            return Err(invalid("cov", "must be a nonempty square matrix"));
        }
        let cov = checked_covariance(cov, "sampling covariance")?;
        let factor = cov
            .cholesky()
            .map(|c| c.l())
            .ok_or(Error::Singular { what: "sampling covariance", eigenvalue: 0.0 })?;
        Ok(Self { factor })
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim) * (sigma * sigma))
    }
}

impl SamplingModel for GaussianModel {
    type Data = DVector<f64>;

    fn dim(&self) -> usize {
        self.factor.nrows()
    }

    fn sample(&self, theta: &DVector<f64>, rng: &mut TrialRng) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        theta + &self.factor * xi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn of(rate: f64, stderr: f64, alpha: f64) -> Self {
        if rate <= alpha + VERDICT_SIGMAS * stderr {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

/// High-belief rate for one `(alpha, proposition)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidityCell {
    pub alpha: f64,
    pub proposition: usize,
    pub rate: f64,
    pub stderr: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ValidityReport {
    pub alpha_grid: Vec<f64>,
    /// Per level, the proposition with the highest rate.
    pub rates: Vec<ValidityCell>,
    /// Every `(alpha, proposition)` pair, level-major.
    pub cells: Vec<ValidityCell>,
    /// Pair with the largest excess of rate over `alpha`.
    pub worst: ValidityCell,
    pub n_trials: u64,
    pub seed: u64,
    pub generator: &'static str,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.rates.iter().all(|c| c.verdict == Verdict::Pass)
    }
}

/// Simulates data at `theta_true` and records, for every level and false
/// proposition, how often the rule assigns belief at least `1 - alpha`.
/// A level passes when the rate is within [`VERDICT_SIGMAS`] binomial
/// standard errors of `alpha`.
pub fn validity_check<R, M>(
    rule: &R,
    model: &M,
    theta_true: &DVector<f64>,
    family: &[Proposition],
    alpha_grid: &[f64],
    n_trials: u64,
    seed: u64,
) -> Result<ValidityReport>
where
    M: SamplingModel,
    R: BeliefRule<Data = M::Data>,
{
    if n_trials < 1000 {
        return Err(invalid("n_trials", "at least 1000 trials required"));
    }
    if family.is_empty() || alpha_grid.is_empty() {
        return Err(invalid("family", "need at least one proposition and one level"));
    }
    if theta_true.len() != model.dim() {
        return Err(Error::DimensionMismatch { context: "true parameter", expected: model.dim(), found: theta_true.len() });
    }
    for &a in alpha_grid {
        ensure_finite(a, "alpha")?;
        if !(a > 0.0 && a <= 1.0) {
            return Err(invalid("alpha", "levels must lie in (0, 1]"));
        }
    }
    for (index, p) in family.iter().enumerate() {
        p.check_dim(model.dim())?;
        if p.contains_point(theta_true) {
            return Err(Error::TrueProposition { index });
        }
    }
    let m = family.len();
    let counts = run_trials(
        seed,
        n_trials,
        || vec![0u64; alpha_grid.len() * m],
        |counts, rng| {
            let data = model.sample(theta_true, rng);
            for (i, &alpha) in alpha_grid.iter().enumerate() {
                for (j, p) in family.iter().enumerate() {
                    if rule.assigns_high_belief(&data, p, alpha)? {
                        counts[i * m + j] += 1;
                    }
                }
            }
            Ok(())
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    )?;

    let cells: Vec<ValidityCell> = counts
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            let alpha = alpha_grid[idx / m];
            let rate = c as f64 / n_trials as f64;
            let stderr = binomial_stderr(rate, n_trials);
            ValidityCell { alpha, proposition: idx % m, rate, stderr, verdict: Verdict::of(rate, stderr, alpha) }
        })
        .collect();
    let rates = cells
        .chunks(m)
        .map(|row| *row.iter().max_by(|a, b| a.rate.total_cmp(&b.rate)).expect("nonempty row"))
        .collect();
    let worst = *cells
        .iter()
        .max_by(|a, b| (a.rate - a.alpha).total_cmp(&(b.rate - b.alpha)))
        .expect("nonempty grid");
    Ok(ValidityReport { alpha_grid: alpha_grid.to_vec(), rates, cells, worst, n_trials, seed, generator: GENERATOR_NAME })
}

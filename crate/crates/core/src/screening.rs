//! K-sigma uncertainty-ellipsoid screening: confidence levels, the
//! combined-radius overlap rule, joint confidence bounds, and a coverage
//! simulation of the resulting missed-maneuver rate.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Vector3};
use rand_distr::{Distribution, StandardNormal};

use crate::ellipsoid::{min_distance, Ellipsoid};
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::geometry::JointState;
use crate::sim::{binomial_stderr, count_events, GENERATOR_NAME};
use crate::special::{chi2_cdf, chi2_sf};

fn check_k(k: f64, dim: usize) -> Result<()> {
    ensure_finite(k, "k")?;
    if k <= 0.0 {
        return Err(invalid("k", "sigma multiple must be positive"));
    }
    if dim == 0 {
        return Err(invalid("dim", "at least one dimension required"));
    }
    Ok(())
}

/// Coverage `F_chi2(dim)(k^2)` of the k-sigma region of a `dim`-variate Gaussian.
pub fn ksigma_confidence(k: f64, dim: usize) -> Result<f64> {
    check_k(k, dim)?;
    Ok(chi2_cdf(dim as f64, k * k))
}

/// Miss probability `1 - F_chi2(dim)(k^2)`, computed on the upper tail.
pub fn ksigma_alpha(k: f64, dim: usize) -> Result<f64> {
    check_k(k, dim)?;
    Ok(chi2_sf(dim as f64, k * k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JointConfidence {
    /// `(1 - alpha)^2`, valid when the two estimates are independent.
    pub independent: f64,
    /// `max(0, 1 - 2 alpha)`, valid under any dependence.
    pub frechet: f64,
}

pub fn joint_confidence(alpha: f64) -> Result<JointConfidence> {
    ensure_finite(alpha, "alpha")?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", "must lie in [0, 1]"));
    }
    Ok(JointConfidence {
        independent: (1.0 - alpha) * (1.0 - alpha),
        frechet: (1.0 - 2.0 * alpha).max(0.0),
    })
}

/// Upper bound `min(2 alpha, 1)` on the rate of missed maneuvers.
pub fn collision_risk_cap(alpha: f64) -> f64 {
    (2.0 * alpha).min(1.0)
}

/// Solid k-sigma position ellipsoid `{x : |Lambda^{-1/2} E^T (center - x)| <= k}`.
pub fn build_ellipsoid(center: &Vector3<f64>, cov3: &Matrix3<f64>, k: f64) -> Result<Ellipsoid> {
    check_k(k, 3)?;
    Ellipsoid::from_covariance(
        DVector::from_column_slice(center.as_slice()),
        &DMatrix::from_column_slice(3, 3, cov3.as_slice()),
        k,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScreeningDecision {
    /// Distance between the two k-sigma position ellipsoids, m.
    pub min_distance: f64,
    /// Maneuver indicated: `min_distance <= r1 + r2`.
    pub overlap: bool,
    pub k: f64,
    pub per_object_confidence: f64,
    pub joint_confidence_independent: f64,
    pub joint_confidence_frechet: f64,
    pub collision_risk_cap: f64,
}

/// Screens a conjunction by the overlap of the two objects' k-sigma position
/// ellipsoids, each built from its own 3x3 position covariance block.
pub fn screen_conjunction(js: &JointState, k: f64) -> Result<ScreeningDecision> {
    let e1 = build_ellipsoid(&js.position(0), &js.position_covariance(0), k)?;
    let e2 = build_ellipsoid(&js.position(1), &js.position_covariance(1), k)?;
    let distance = min_distance(&e1, &e2)?;
    decision(distance, js.combined_radius(), k)
}

fn decision(distance: f64, r_combined: f64, k: f64) -> Result<ScreeningDecision> {
    let alpha = ksigma_alpha(k, 3)?;
    let joint = joint_confidence(alpha)?;
    Ok(ScreeningDecision {
        min_distance: distance,
        overlap: distance <= r_combined,
        k,
        per_object_confidence: 1.0 - alpha,
        joint_confidence_independent: joint.independent,
        joint_confidence_frechet: joint.frechet,
        collision_risk_cap: collision_risk_cap(alpha),
    })
}

/// Known true positions and estimation covariances for a coverage simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageScenario {
    pub truth1: Vector3<f64>,
    pub truth2: Vector3<f64>,
    pub cov1: Matrix3<f64>,
    pub cov2: Matrix3<f64>,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoverageReport {
    pub k: f64,
    /// Fraction of trials screened as safe although the truths collide.
    pub rate: f64,
    pub stderr: f64,
    /// `2 alpha`.
    pub bound: f64,
    /// `rate <= bound + 3 stderr`.
    pub passes: bool,
    pub missed: u64,
    pub n_trials: u64,
    pub seed: u64,
    pub generator: &'static str,
}

/// Monte Carlo missed-maneuver rate: each trial draws estimates from
/// `normal(truth_i, cov_i)`, screens them with k-sigma ellipsoids, and counts
/// a miss when no overlap is reported for a pair on a collision course.
pub fn missed_maneuver_rate(scenario: &CoverageScenario, k: f64, n_trials: u64, seed: u64) -> Result<CoverageReport> {
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be positive"));
    }
    let r_combined = scenario.r1 + scenario.r2;
    ensure_finite(r_combined, "radii")?;
    if scenario.r1 <= 0.0 || scenario.r2 <= 0.0 {
        return Err(invalid("radii", "hard-body radius must be positive"));
    }
    if (scenario.truth1 - scenario.truth2).norm() > r_combined {
        return Err(invalid("truth", "true positions must be on a collision course"));
    }
    let shape1 = build_ellipsoid(&scenario.truth1, &scenario.cov1, k)?;
    let shape2 = build_ellipsoid(&scenario.truth2, &scenario.cov2, k)?;
    let factor = |cov: &Matrix3<f64>| {
        Cholesky::new(*cov)
            .map(|c| c.l())
            .ok_or(Error::Singular { what: "position covariance", eigenvalue: 0.0 })
    };
    let (l1, l2) = (factor(&scenario.cov1)?, factor(&scenario.cov2)?);
    let draw = |rng: &mut crate::sim::TrialRng, truth: &Vector3<f64>, l: &Matrix3<f64>| {
        let xi = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let est = truth + l * xi;
        DVector::from_column_slice(est.as_slice())
    };
    let missed = count_events(seed, n_trials, |rng| {
        let e1 = shape1.recentered(draw(rng, &scenario.truth1, &l1));
        let e2 = shape2.recentered(draw(rng, &scenario.truth2, &l2));
        Ok(min_distance(&e1, &e2)? > r_combined)
    })?;
    let rate = missed as f64 / n_trials as f64;
    let stderr = binomial_stderr(rate, n_trials);
    let bound = collision_risk_cap(ksigma_alpha(k, 3)?);
    Ok(CoverageReport {
        k,
        rate,
        stderr,
        bound,
        passes: rate <= bound + 3.0 * stderr,
        missed,
        n_trials,
        seed,
        generator: GENERATOR_NAME,
    })
}

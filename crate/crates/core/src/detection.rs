//! Aleatory performance of collision-probability thresholds under the
//! non-central chi displacement model, and a constructive demonstration of
//! false confidence for additive beliefs.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, invalid, Result};
use crate::geometry::StandardizedEncounter;
use crate::probability::{max_pc_head_on, pc_circular};
use crate::sim::{binomial_stderr, count_events, run_trials, GENERATOR_NAME};
use crate::special::{chi2_cdf, normal_cdf, normal_interval};

/// Poisson tail mass at which the non-central series is truncated.
pub const SERIES_TAIL: f64 = 1e-13;
/// Relative tolerance of the critical-displacement bisection.
pub const BISECTION_TOLERANCE: f64 = 1e-12;

/// Thresholds in current operational use.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdPolicy {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self { lower: 1e-7, upper: 4.4e-4 }
    }
}

impl ThresholdPolicy {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        ensure_finite(lower, "lower")?;
        ensure_finite(upper, "upper")?;
        if !(0.0 < lower && lower < upper && upper < 1.0) {
            return Err(invalid("thresholds", "require 0 < lower < upper < 1"));
        }
        Ok(Self { lower, upper })
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    ensure_finite(threshold, "threshold")?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid("threshold", "must lie in (0, 1)"));
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(value, name)?;
    if value <= 0.0 {
        return Err(invalid(name, "must be positive"));
    }
    Ok(())
}

fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    ensure_finite(value, name)?;
    if value < 0.0 {
        return Err(invalid(name, "must be non-negative"));
    }
    Ok(())
}

/// Non-central chi-squared CDF as a Poisson(`lambda / 2`) mixture of central
/// CDFs, summed outward from the Poisson mode.
pub fn ncx2_cdf(dof: u32, noncentrality: f64, x: f64) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("dof", "at least one degree of freedom required"));
    }
    check_nonnegative("noncentrality", noncentrality)?;
    check_nonnegative("x", x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let k = dof as f64;
    if noncentrality == 0.0 {
        return Ok(chi2_cdf(k, x));
    }
    let mu = 0.5 * noncentrality;
    let log_mu = libm::log(mu);
    let weight = |j: f64| libm::exp(j * log_mu - mu - libm::lgamma(j + 1.0));
    let mode = libm::floor(mu);

    let mut total = 0.0;
    let mut mass = 0.0;
    let mut up = mode;
    let mut down = mode - 1.0;
    loop {
        let w = weight(up);
        total += w * chi2_cdf(k + 2.0 * up, x);
        mass += w;
        up += 1.0;
        if down >= 0.0 {
            let w = weight(down);
            total += w * chi2_cdf(k + 2.0 * down, x);
            mass += w;
            down -= 1.0;
        }
        if 1.0 - mass < SERIES_TAIL || (down < 0.0 && weight(up) == 0.0) {
            break;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Standardized miss distance `d* = D/S` at which the circular collision
/// probability equals `threshold`; `None` when even a zero miss distance
/// falls short of it.
pub fn critical_displacement(threshold: f64, s_over_r: f64) -> Result<Option<f64>> {
    check_threshold(threshold)?;
    check_positive("s_over_r", s_over_r)?;
    if threshold > max_pc_head_on(s_over_r)? {
        return Ok(None);
    }
    let excess = |d: f64| pc_circular(d * s_over_r, s_over_r).map(|pc| pc - threshold);
    if excess(0.0)? <= 0.0 {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while excess(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > BISECTION_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// `S/R` above which no miss distance can produce a collision probability of
/// `threshold`: the inverse of [`max_pc_head_on`].
pub fn dilution_boundary(threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    Ok(1.0 / libm::sqrt(-2.0 * libm::log1p(-threshold)))
}

/// Geometric-mean `sqrt(S1 S2) / R` of an encounter.
///
/// Approximate: feeding it to [`detection_rate`] treats an elliptical
/// encounter as circular, which is only a rough estimate when the aspect
/// ratio is far from 1.
pub fn effective_s_over_r(enc: &StandardizedEncounter) -> f64 {
    libm::sqrt(enc.s1() * enc.s2()) / enc.r_combined()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case", tag = "method"))]
pub enum DetectionMethod {
    /// Non-central chi-squared CDF at the critical displacement.
    SemiAnalytic,
    /// Sampled miss distances, each evaluated with the full collision integral.
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionPoint {
    pub threshold: f64,
    /// Probability that the computed Pc reaches the threshold.
    pub detection_rate: f64,
    /// `1 - detection_rate`.
    pub failure_probability: f64,
    /// Binomial standard error; 0 for the semi-analytic method.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionCurve {
    pub s_over_r: f64,
    pub d_true_over_r: f64,
    pub method: DetectionMethod,
    /// Ascending thresholds.
    pub points: Vec<DetectionPoint>,
}

/// Probability that a true miss distance `D_T` yields a computed collision
/// probability at or above `threshold`, with the estimated miss distance
/// drawn as `D/S = |D_T/S + xi|`, `xi ~ N(0, I_2)`.
pub fn detection_rate(threshold: f64, s_over_r: f64, d_true_over_r: f64, method: DetectionMethod) -> Result<DetectionPoint> {
    let curve = detection_curve(&[threshold], s_over_r, d_true_over_r, method)?;
    Ok(curve.points[0])
}

/// Detection rates over a set of thresholds. The Monte Carlo method reuses
/// one set of samples for every threshold, so its curve is monotone.
pub fn detection_curve(thresholds: &[f64], s_over_r: f64, d_true_over_r: f64, method: DetectionMethod) -> Result<DetectionCurve> {
    if thresholds.is_empty() {
        return Err(invalid("thresholds", "at least one threshold required"));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    check_positive("s_over_r", s_over_r)?;
    check_nonnegative("d_true_over_r", d_true_over_r)?;
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let peak = max_pc_head_on(s_over_r)?;
    let offset = d_true_over_r / s_over_r;
    let (rates, n) = match method {
        DetectionMethod::SemiAnalytic => {
            let rates = sorted
                .iter()
                .map(|&t| match critical_displacement(t, s_over_r)? {
                    Some(d) => ncx2_cdf(2, offset * offset, d * d),
                    None => Ok(0.0),
                })
                .collect::<Result<Vec<_>>>()?;
            (rates, None)
        }
        DetectionMethod::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(invalid("trials", "must be positive"));
            }
            let m = sorted.len();
            let counts = run_trials(
                seed,
                trials,
                || vec![0u64; m],
                |counts, rng| {
                    let x: f64 = StandardNormal.sample(rng);
                    let y: f64 = StandardNormal.sample(rng);
                    let d_over_s = libm::hypot(offset + x, y);
                    let pc = pc_circular(d_over_s * s_over_r, s_over_r)?;
                    for (c, &t) in counts.iter_mut().zip(&sorted) {
                        if pc >= t && t <= peak {
                            *c += 1;
                        }
                    }
                    Ok(())
                },
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )?;
            (counts.into_iter().map(|c| c as f64 / trials as f64).collect(), Some(trials))
        }
    };
    let points = sorted
        .iter()
        .zip(rates)
        .map(|(&threshold, rate)| DetectionPoint {
            threshold,
            detection_rate: rate,
            failure_probability: 1.0 - rate,
            stderr: n.map_or(0.0, |n| binomial_stderr(rate, n)),
        })
        .collect();
    Ok(DetectionCurve { s_over_r, d_true_over_r, method, points })
}

/// Ten thresholds per decade from 1e-10 to 1e-1, plus the two operational
/// thresholds exactly.
pub fn default_threshold_grid() -> Vec<f64> {
    let policy = ThresholdPolicy::default();
    let mut grid: Vec<f64> = (0..=90).map(|i| libm::pow(10.0, -10.0 + i as f64 / 10.0)).collect();
    grid.retain(|&t| (t / policy.lower - 1.0).abs() > 1e-9);
    grid.push(policy.lower);
    grid.push(policy.upper);
    grid.sort_by(f64::total_cmp);
    grid
}

/// Half-width `alpha sigma sqrt(2 pi) / 2` of a neighbourhood whose
/// posterior mass never exceeds `alpha`, for any observation.
pub fn proof_halfwidth(sigma: f64, alpha: f64) -> f64 {
    0.5 * alpha * sigma * libm::sqrt(2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FalseConfidenceReport {
    pub alpha: f64,
    /// Exact probability of assigning belief at least `1 - alpha` to the
    /// false proposition.
    pub p_target: f64,
    pub neighborhood_halfwidth: f64,
    pub empirical_rate: f64,
    pub stderr: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub generator: &'static str,
}

/// One-dimensional false-confidence experiment: the true parameter is 0,
/// `x ~ N(0, sigma^2)`, the epistemic distribution is `N(x, sigma^2)`, and the
/// false proposition is the complement of `(-h, h)`. Counts how often that
/// proposition receives belief at least `1 - alpha`.
pub fn false_confidence_demo(sigma: f64, halfwidth: f64, alpha: f64, n_trials: u64, seed: u64) -> Result<FalseConfidenceReport> {
    check_positive("sigma", sigma)?;
    check_positive("halfwidth", halfwidth)?;
    ensure_finite(alpha, "alpha")?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    if n_trials < 1000 {
        return Err(invalid("n_trials", "at least 1000 trials required"));
    }
    // Posterior mass of the neighbourhood; the proposition's belief is its complement.
    let mass = |x: f64| normal_interval((-halfwidth - x) / sigma, (halfwidth - x) / sigma);
    let hits = count_events(seed, n_trials, |rng| {
        let xi: f64 = StandardNormal.sample(rng);
        Ok(mass(sigma * xi) <= alpha)
    })?;

    // The mass falls monotonically in |x|; find where it crosses alpha.
    let p_target = if mass(0.0) <= alpha {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0, halfwidth + 40.0 * sigma);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2.0 * normal_cdf(-0.5 * (lo + hi) / sigma)
    };
    let rate = hits as f64 / n_trials as f64;
    Ok(FalseConfidenceReport {
        alpha,
        p_target,
        neighborhood_halfwidth: halfwidth,
        empirical_rate: rate,
        stderr: binomial_stderr(rate, n_trials),
        n_trials,
        seed,
        generator: GENERATOR_NAME,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::stream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn ncx2_central_and_origin() {
        for x in [0.1, 1.0, 3.0, 10.0, 40.0] {
            assert!((ncx2_cdf(2, 0.0, x).unwrap() + libm::expm1(-x / 2.0)).abs() < 1e-12);
        }
        assert_eq!(ncx2_cdf(2, 3.0, 0.0).unwrap(), 0.0);
        assert!(ncx2_cdf(0, 1.0, 1.0).is_err());
        assert!(ncx2_cdf(2, -1.0, 1.0).is_err());
        assert!(ncx2_cdf(2, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn ncx2_matches_sampling() {
        let n = 2_000_000;
        let mut rng = stream(77, 0);
        let shift = 2.0_f64.sqrt();
        let mut hits = 0u64;
        for _ in 0..n {
            let a: f64 = rng.sample::<f64, _>(StandardNormal) + shift;
            let b: f64 = rng.sample::<f64, _>(StandardNormal) + shift;
            if a * a + b * b <= 6.0 {
                hits += 1;
            }
        }
        let rate = hits as f64 / n as f64;
        let exact = ncx2_cdf(2, 4.0, 6.0).unwrap();
        assert!((rate - exact).abs() < 3.0 * binomial_stderr(exact, n), "{rate} vs {exact}");
    }

    #[test]
    fn ncx2_dof2_matches_rice_integral() {
        // P(|offset + xi| <= r) by quadrature over the radius of the Rice density.
        let (nu, r) = (1.7_f64, 2.3_f64);
        let m = 20000;
        let h = r / m as f64;
        let bessel_i0 = |z: f64| {
            let steps = 2000;
            (0..steps).map(|k| libm::exp(z * libm::cos(PI * (k as f64 + 0.5) / steps as f64))).sum::<f64>() / steps as f64
        };
        let density = |t: f64| t * libm::exp(-(t * t + nu * nu) / 2.0) * bessel_i0(t * nu);
        let mut integral = 0.0;
        for i in 0..m {
            let t = (i as f64 + 0.5) * h;
            integral += density(t) * h;
        }
        assert!((ncx2_cdf(2, nu * nu, r * r).unwrap() - integral).abs() < 1e-7);
    }

    #[test]
    fn critical_displacement_examples() {
        let s = 10.0;
        let peak = max_pc_head_on(s).unwrap();
        assert_eq!(critical_displacement(peak, s).unwrap(), Some(0.0));
        let d = critical_displacement(4.4e-4, s).unwrap().unwrap();
        let approx = libm::sqrt(-2.0 * libm::log(4.4e-4 * 2.0 * s * s));
        assert!((d - approx).abs() < 0.01, "{d} vs {approx}");
        assert!((pc_circular(d * s, s).unwrap() - 4.4e-4).abs() < 1e-14);
        assert_eq!(critical_displacement(4.4e-4, 40.0).unwrap(), None);
    }

    #[test]
    fn boundary_closed_form() {
        let b = dilution_boundary(4.4e-4).unwrap();
        assert!(b > 33.6 && b < 33.8);
        assert!((dilution_boundary(-libm::expm1(-0.5)).unwrap() - 1.0).abs() < 1e-14);
        assert!((max_pc_head_on(b).unwrap() - 4.4e-4).abs() < 1e-16);
        let rate = |s: f64| detection_rate(4.4e-4, s, 0.0, DetectionMethod::SemiAnalytic).unwrap().detection_rate;
        assert_eq!(rate(b * 1.0001), 0.0);
        assert!(rate(b * 0.999) > 0.0);
    }

    #[test]
    fn quoted_detection_rates() {
        let rate = |s: f64, dt: f64| detection_rate(4.4e-4, s, dt, DetectionMethod::SemiAnalytic).unwrap().detection_rate;
        assert!((rate(10.0, 0.0) - 0.912).abs() < 0.002);
        assert!((rate(10.0, 1.0) - 0.911).abs() < 0.002);
        assert!((rate(20.0, 0.0) - 0.648).abs() < 0.002);
    }

    #[test]
    fn monte_carlo_curve_is_monotone_and_reproducible() {
        let method = DetectionMethod::MonteCarlo { trials: 20_000, seed: 5 };
        let a = detection_curve(&default_threshold_grid(), 5.0, 1.0, method).unwrap();
        let b = detection_curve(&default_threshold_grid(), 5.0, 1.0, method).unwrap();
        assert_eq!(a, b);
        for w in a.points.windows(2) {
            assert!(w[0].detection_rate >= w[1].detection_rate);
        }
    }

    #[test]
    fn default_grid_contains_policy() {
        let g = default_threshold_grid();
        assert!(g.contains(&1e-7) && g.contains(&4.4e-4));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] >= 1e-10 && *g.last().unwrap() <= 0.1 + 1e-12);
    }

    #[test]
    fn false_confidence_at_proof_width() {
        let h = proof_halfwidth(1.0, 0.05);
        assert!((h - 0.0627).abs() < 1e-4);
        let r = false_confidence_demo(1.0, h, 0.05, 10_000, 3).unwrap();
        assert_eq!(r.p_target, 1.0);
        assert_eq!(r.empirical_rate, 1.0);
        let wide = false_confidence_demo(1.0, 50.0, 0.05, 10_000, 3).unwrap();
        assert_eq!(wide.empirical_rate, 0.0);
    }

    #[test]
    fn false_confidence_matches_resimulation() {
        let (h, alpha) = (0.5, 0.05);
        let r = false_confidence_demo(1.0, h, alpha, 100_000, 11).unwrap();
        // Independent re-simulation, direct from the definition.
        let mut rng = stream(999, 0);
        let n = 1_000_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let bel_a = 1.0 - (normal_cdf(h - x) - normal_cdf(-h - x));
            if bel_a >= 1.0 - alpha {
                hits += 1;
            }
        }
        let oracle = hits as f64 / n as f64;
        let se = (r.stderr * r.stderr + binomial_stderr(oracle, n).powi(2)).sqrt();
        assert!((r.empirical_rate - oracle).abs() < 3.0 * se, "{} vs {oracle}", r.empirical_rate);
        assert!((r.p_target - oracle).abs() < 3.0 * binomial_stderr(oracle, n));
    }

    #[test]
    fn false_confidence_rejects_bad_input() {
        assert!(false_confidence_demo(0.0, 1.0, 0.05, 1000, 1).is_err());
        assert!(false_confidence_demo(1.0, 1.0, 1.0, 1000, 1).is_err());
        assert!(false_confidence_demo(1.0, 1.0, 0.05, 999, 1).is_err());
    }

    proptest! {
        #[test]
        fn ncx2_monotone(k in 1u32..6, lambda in 0.0f64..30.0, x in 0.0f64..40.0, dx in 0.0f64..5.0, dl in 0.0f64..5.0) {
            let base = ncx2_cdf(k, lambda, x).unwrap();
            prop_assert!(ncx2_cdf(k, lambda, x + dx).unwrap() >= base - 1e-14);
            prop_assert!(ncx2_cdf(k, lambda + dl, x).unwrap() <= base + 1e-14);
        }

        #[test]
        fn head_on_never_harder_than_glancing(s in 1.0f64..40.0, t in prop::sample::select(vec![1e-7, 4.4e-4, 1e-2])) {
            let r0 = detection_rate(t, s, 0.0, DetectionMethod::SemiAnalytic).unwrap().detection_rate;
            let r1 = detection_rate(t, s, 1.0, DetectionMethod::SemiAnalytic).unwrap().detection_rate;
            prop_assert!(r0 >= r1 - 1e-12);
        }
    }
}

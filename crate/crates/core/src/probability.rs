//! Epistemic probability of collision by the contour-integral transform,
//! evaluated with the periodic trapezoidal rule, and dilution curves.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::geometry::StandardizedEncounter;

/// Smallest automatic quadrature size.
pub const QUADRATURE_FLOOR: usize = 64;
/// Quadrature points per unit of principal-axis aspect ratio.
pub const POINTS_PER_ASPECT: f64 = 10.0;
/// Below this radius the integrand kernel is replaced by its limit.
pub const SINGULAR_RADIUS: f64 = 1e-8;
/// Relative tolerance of the golden-section peak refinement.
pub const PEAK_TOLERANCE: f64 = 1e-6;
/// Automatic quadrature doubles until `|Pc(n) - Pc(n/2)|` is below this.
pub const AUTO_TOLERANCE: f64 = 1e-13;
/// Largest point count the automatic rule will try.
pub const MAX_AUTO_POINTS: usize = 1 << 22;

/// Number of evenly spaced trapezoid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Starts at `max(floor, ceil(10 * aspect))`, rounded up to even, and
    /// doubles until the halving estimate falls below [`AUTO_TOLERANCE`].
    /// Doubling matters when the hard-body circle is wide compared with the
    /// minor deviation.
    Auto { floor: usize },
    Fixed(usize),
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Auto { floor: QUADRATURE_FLOOR }
    }
}

/// Point count below which the trapezoidal error is no longer negligible.
pub fn minimum_points(aspect_ratio: f64) -> usize {
    libm::ceil(POINTS_PER_ASPECT * aspect_ratio) as usize
}

impl Quadrature {
    pub fn points(&self, aspect_ratio: f64) -> usize {
        match *self {
            Quadrature::Auto { floor } => {
                let n = minimum_points(aspect_ratio).max(floor).max(2);
                n + n % 2
            }
            Quadrature::Fixed(n) => n,
        }
    }
}

/// Collision probability with quadrature metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcResult {
    pub pc: f64,
    pub n_quad: usize,
    /// `|Pc(n) - Pc(n/2)|`.
    pub quad_error_est: f64,
    /// Set when an explicit point count is below `ceil(10 * aspect)`.
    pub below_minimum: bool,
}

#[inline]
fn kernel(r2: f64) -> f64 {
    // (1 - exp(-r^2/2)) / r^2, with limit 1/2 at the origin.
    if r2 < SINGULAR_RADIUS * SINGULAR_RADIUS {
        0.5
    } else {
        -libm::expm1(-0.5 * r2) / r2
    }
}

/// Trapezoidal sums of the contour integrand on `n` points and on its
/// even-indexed subset (when `n` is even).
fn trapezoid(u: f64, v: f64, s1: f64, s2: f64, r: f64, n: usize) -> Result<(f64, Option<f64>)> {
    let scale = r / (s1 * s2);
    let mut full = 0.0;
    let mut even = 0.0;
    for k in 0..n {
        let psi = TAU * k as f64 / n as f64;
        let (sin, cos) = (libm::sin(psi), libm::cos(psi));
        let x = (u + r * cos) / s1;
        let y = (v + r * sin) / s2;
        let weight = scale * (r + u * cos + v * sin);
        let f = kernel(x * x + y * y) * weight;
        if !f.is_finite() {
            return Err(Error::NumericalFailure { psi });
        }
        full += f;
        if k % 2 == 0 {
            even += f;
        }
    }
    // The 1/(2 pi) of the integrand cancels the 2 pi of the period.
    let full = full / n as f64;
    let half = n.is_multiple_of(2).then(|| even / (n / 2) as f64);
    Ok((full, half))
}

/// Contour integral over `psi` in `[0, 2 pi)` for arbitrary principal
/// coordinates (no ordering of `s1`, `s2` required).
pub fn contour_integral(u_hat: f64, v_hat: f64, s1: f64, s2: f64, r: f64, n: usize) -> Result<f64> {
    if n < 1 {
        return Err(invalid("n_quad", "at least one quadrature point required"));
    }
    Ok(trapezoid(u_hat, v_hat, s1, s2, r, n)?.0)
}

/// Probability that the true encounter-plane miss distance is within the
/// combined radius.
pub fn pc_contour(enc: &StandardizedEncounter, quadrature: Quadrature) -> Result<PcResult> {
    let aspect = enc.aspect_ratio();
    let n = quadrature.points(aspect);
    if n < 2 {
        return Err(invalid("n_quad", "at least two quadrature points required"));
    }
    let (u, v, s1, s2, r) = (enc.u_hat(), enc.v_hat(), enc.s1(), enc.s2(), enc.r_combined());
    let mut n = n;
    let (full, half) = loop {
        let (full, half) = trapezoid(u, v, s1, s2, r, n)?;
        let half = match half {
            Some(h) => h,
            None => trapezoid(u, v, s1, s2, r, n / 2)?.0,
        };
        if matches!(quadrature, Quadrature::Fixed(_)) || (full - half).abs() <= AUTO_TOLERANCE {
            break (full, half);
        }
        if 2 * n > MAX_AUTO_POINTS {
            return Err(Error::NoConvergence { iterations: n, lower: full.min(half), upper: full.max(half) });
        }
        n *= 2;
    };
    Ok(PcResult {
        pc: full.clamp(0.0, 1.0),
        n_quad: n,
        quad_error_est: (full - half).abs(),
        below_minimum: matches!(quadrature, Quadrature::Fixed(_)) && n < minimum_points(aspect),
    })
}

fn check_ratio(name: &'static str, value: f64) -> Result<f64> {
    ensure_finite(value, name)?;
    if value <= 0.0 {
        return Err(invalid(name, "must be positive"));
    }
    Ok(value)
}

/// Collision probability for equal principal deviations, as a function of
/// `D/R` and `S/R`.
pub fn pc_circular(d_over_r: f64, s_over_r: f64) -> Result<f64> {
    ensure_finite(d_over_r, "d_over_r")?;
    if d_over_r < 0.0 {
        return Err(invalid("d_over_r", "must be non-negative"));
    }
    check_ratio("s_over_r", s_over_r)?;
    let enc = StandardizedEncounter::from_principal(d_over_r, 0.0, s_over_r, s_over_r, 1.0)?;
    Ok(pc_contour(&enc, Quadrature::default())?.pc)
}

/// Largest collision probability attainable at a given `S/R`, reached when
/// the estimated miss distance is zero: `1 - exp(-1 / (2 (S/R)^2))`.
/// Strictly decreasing in `S/R`.
pub fn max_pc_head_on(s_over_r: f64) -> Result<f64> {
    check_ratio("s_over_r", s_over_r)?;
    Ok(-libm::expm1(-0.5 / (s_over_r * s_over_r)))
}

/// Collision probability over a logarithmic `S/R` grid at fixed `D/R`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DilutionCurve {
    pub d_over_r: f64,
    /// Ascending `(s_over_r, pc)` pairs.
    pub grid: Vec<(f64, f64)>,
    pub peak_s_over_r: f64,
    pub peak_pc: f64,
}

pub fn dilution_curve(d_over_r: f64, s_over_r_min: f64, s_over_r_max: f64, n_points: usize) -> Result<DilutionCurve> {
    ensure_finite(d_over_r, "d_over_r")?;
    if d_over_r < 0.0 {
        return Err(invalid("d_over_r", "must be non-negative"));
    }
    check_ratio("s_over_r_min", s_over_r_min)?;
    check_ratio("s_over_r_max", s_over_r_max)?;
    if s_over_r_min >= s_over_r_max {
        return Err(invalid("s_over_r_max", "must exceed s_over_r_min"));
    }
    if n_points < 16 {
        return Err(invalid("n_points", "at least 16 grid points required"));
    }
    let (lo, hi) = (libm::log(s_over_r_min), libm::log(s_over_r_max));
    let step = (hi - lo) / (n_points - 1) as f64;
    let grid = (0..n_points)
        .map(|i| {
            let s = if i == 0 {
                s_over_r_min
            } else if i == n_points - 1 {
                s_over_r_max
            } else {
                libm::exp(lo + step * i as f64)
            };
            pc_circular(d_over_r, s).map(|pc| (s, pc))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, &(_, pc)) in grid.iter().enumerate() {
        if pc > grid[best].1 {
            best = i;
        }
    }
    let (peak_s_over_r, peak_pc) = if best == 0 || best == n_points - 1 {
        grid[best]
    } else {
        let (s, pc) = golden_section_max(
            |log_s| pc_circular(d_over_r, libm::exp(log_s)),
            libm::log(grid[best - 1].0),
            libm::log(grid[best + 1].0),
            PEAK_TOLERANCE,
        )?;
        if pc >= grid[best].1 {
            (libm::exp(s), pc)
        } else {
            grid[best]
        }
    };
    Ok(DilutionCurve { d_over_r, grid, peak_s_over_r, peak_pc })
}

fn golden_section_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    // Bracket width in log space is the relative width in S/R.
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn head_on(s: f64) -> f64 {
        1.0 - libm::exp(-1.0 / (2.0 * s * s))
    }

    #[test]
    fn head_on_at_ten() {
        let pc = pc_circular(0.0, 10.0).unwrap();
        assert!((pc - 4.987_520_807_317_687e-3).abs() < 1e-12);
        assert!((pc - head_on(10.0)).abs() < 1e-9);
        assert!(1.0 - pc >= 0.995);
    }

    #[test]
    fn wide_circle_forces_refinement() {
        // r / s2 = 220: the aspect rule alone gives 184 points and overshoots 1.
        let s1 = 0.3;
        let s2 = s1 / 18.212080121440156;
        let r = 3.634577652736831;
        let enc = StandardizedEncounter::from_principal(0.0, 0.0, s1, s2, r).unwrap();
        let naive = contour_integral(0.0, 0.0, s1, s2, r, 184).unwrap();
        assert!(naive > 1.0 + 1e-5);
        let res = pc_contour(&enc, Quadrature::default()).unwrap();
        assert!(res.n_quad > 184);
        // Head-on with the circle covering many deviations: essentially certain.
        assert!((res.pc - 1.0).abs() < 1e-9, "{}", res.pc);
        assert!(res.quad_error_est <= AUTO_TOLERANCE);
    }

    #[test]
    fn max_pc_closed_form() {
        assert!((max_pc_head_on(1.0).unwrap() - 0.393_469_340_287_366_6).abs() < 1e-15);
        assert!(max_pc_head_on(1e9).unwrap() < 1e-18);
        assert!(max_pc_head_on(0.0).is_err());
        let mut prev = 1.0;
        for i in 1..200 {
            let v = max_pc_head_on(0.05 * i as f64).unwrap();
            assert!(v < prev || v == 1.0, "{v} {prev}");
            prev = v;
        }
    }

    #[test]
    fn vanishing_radius_and_far_miss() {
        let enc = StandardizedEncounter::from_principal(3.0, 0.0, 1.0, 1.0, 1e-9).unwrap();
        assert!(pc_contour(&enc, Quadrature::default()).unwrap().pc < 1e-17);
        assert!(pc_circular(500.0, 10.0).unwrap() < 1e-12);
        assert!(pc_circular(1e4, 0.5).unwrap() < 1e-12);
    }

    #[test]
    fn auto_points_rule() {
        assert_eq!(Quadrature::default().points(1.0), 64);
        assert_eq!(Quadrature::default().points(6.45), 66);
        assert_eq!(Quadrature::default().points(20.0), 200);
        let enc = StandardizedEncounter::from_principal(1.0, 1.0, 8.0, 1.0, 1.0).unwrap();
        let res = pc_contour(&enc, Quadrature::Fixed(40)).unwrap();
        assert!(res.below_minimum);
        assert_eq!(res.n_quad, 40);
        let res = pc_contour(&enc, Quadrature::Fixed(81)).unwrap();
        assert!(!res.below_minimum);
        assert!(res.quad_error_est >= 0.0);
    }

    #[test]
    fn singular_point_uses_limit() {
        // A quadrature node sits exactly on the origin when u = -R, v = 0.
        let enc = StandardizedEncounter::from_principal(-1.0, 0.0, 2.0, 2.0, 1.0).unwrap();
        let res = pc_contour(&enc, Quadrature::Fixed(64)).unwrap();
        assert!(res.pc.is_finite() && res.pc > 0.0);
    }

    #[test]
    fn circular_case_matches_monte_carlo() {
        // Direct sampling of the integration condition, D/R = 5, S/R = 3.5.
        let (d, s) = (5.0, 3.5);
        let n = 2_000_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut hits = 0u64;
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let (du, dv) = (s * x - d, s * y);
            if du * du + dv * dv <= 1.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let pc = pc_circular(d, s).unwrap();
        assert!((pc - p).abs() < 3.0 * se, "pc {pc} vs mc {p} +- {se}");
    }

    #[test]
    fn dilution_curve_head_on_is_decreasing() {
        let curve = dilution_curve(0.0, 0.1, 1000.0, 64).unwrap();
        assert_eq!(curve.grid.len(), 64);
        assert!(curve.grid.windows(2).all(|w| w[1].1 < w[0].1));
        assert_eq!(curve.peak_s_over_r, 0.1);
    }

    #[test]
    fn dilution_curve_rises_then_falls() {
        let curve = dilution_curve(5.0, 0.5, 1000.0, 200).unwrap();
        let peak = curve.grid.iter().position(|p| p.1 == curve.grid.iter().map(|p| p.1).fold(0.0, f64::max)).unwrap();
        assert!(curve.grid[..=peak].windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(curve.grid[peak..].windows(2).all(|w| w[1].1 <= w[0].1));
        let at = |s: f64| pc_circular(5.0, s).unwrap();
        let (a, b, c, d) = (at(1.6), at(3.5), at(20.0), at(160.0));
        assert!(a < b && b > c && c > d);
    }

    #[test]
    fn dilution_peak_matches_fine_grid() {
        let (lo, hi) = (0.5f64, 1000.0f64);
        let curve = dilution_curve(5.0, lo, hi, 64).unwrap();
        let n = 10_000;
        let brute = (0..n)
            .map(|i| {
                let s = (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp();
                pc_circular(5.0, s).unwrap()
            })
            .fold(0.0, f64::max);
        assert!((curve.peak_pc - brute).abs() < 1e-8, "{} vs {}", curve.peak_pc, brute);
        assert!(curve.peak_pc >= brute);
    }

    #[test]
    fn dilution_curve_rejects_bad_ranges() {
        assert!(dilution_curve(1.0, 2.0, 1.0, 32).is_err());
        assert!(dilution_curve(1.0, 0.0, 1.0, 32).is_err());
        assert!(dilution_curve(1.0, 1.0, 2.0, 8).is_err());
        assert!(dilution_curve(-1.0, 1.0, 2.0, 32).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_relabellings(
            u in -20.0f64..20.0, v in -20.0f64..20.0,
            s1 in 0.3f64..30.0, s2 in 0.3f64..30.0, r in 0.1f64..5.0,
        ) {
            let n = Quadrature::default().points(s1.max(s2) / s1.min(s2));
            let base = contour_integral(u, v, s1, s2, r, n).unwrap();
            let negated = contour_integral(-u, -v, s1, s2, r, n).unwrap();
            let exchanged = contour_integral(v, u, s2, s1, r, n).unwrap();
            prop_assert!((base - negated).abs() < 1e-10);
            prop_assert!((base - exchanged).abs() < 1e-10);
        }

        #[test]
        fn quadrature_converges_at_rule(
            u in -20.0f64..20.0, v in -20.0f64..20.0,
            s1 in 0.3f64..30.0, ratio in 1.0f64..20.0, r in 0.1f64..5.0,
        ) {
            let enc = StandardizedEncounter::from_principal(u, v, s1, s1 / ratio, r).unwrap();
            let res = pc_contour(&enc, Quadrature::default()).unwrap();
            let n = res.n_quad;
            prop_assert!(n >= Quadrature::default().points(enc.aspect_ratio()));
            let a = contour_integral(enc.u_hat(), enc.v_hat(), enc.s1(), enc.s2(), r, n).unwrap();
            let b = contour_integral(enc.u_hat(), enc.v_hat(), enc.s1(), enc.s2(), r, 2 * n).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "n = {}, {} vs {}", n, a, b);
            prop_assert!(res.quad_error_est <= AUTO_TOLERANCE);
        }

        #[test]
        fn circular_is_decreasing_in_distance(s in 0.2f64..200.0) {
            let mut prev = pc_circular(0.0, s).unwrap();
            for i in 1..60 {
                let pc = pc_circular(0.25 * i as f64 * s.max(1.0), s).unwrap();
                prop_assert!(pc <= prev + 1e-12);
                prev = pc;
            }
        }

        #[test]
        fn head_on_matches_closed_form(log_s in -1.0f64..3.0) {
            let s = 10f64.powf(log_s);
            prop_assert!((pc_circular(0.0, s).unwrap() - head_on(s)).abs() < 1e-9);
        }
    }
}

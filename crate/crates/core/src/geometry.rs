//! Reduction of the 12-dimensional joint state to the standardized
//! two-dimensional encounter plane.
//!
//! State ordering is `(x1, y1, z1, vx1, vy1, vz1, x2, y2, z2, vx2, vy2, vz2)`
//! in metres and metres per second. Relative quantities are object 2 minus
//! object 1.

use nalgebra::{DMatrix, Matrix2, Matrix3, SMatrix, SVector, Vector2, Vector3};

use crate::error::{ensure_finite, invalid, Error, Result};

pub type StateVector = SVector<f64, 12>;
pub type StateCovariance = SMatrix<f64, 12, 12>;

/// Relative asymmetry above which a covariance is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
/// Negative eigenvalues down to `-PSD_TOLERANCE * trace` are clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-9;
/// Minimum angle (rad) between relative velocity and displacement for the
/// displacement-based in-plane axis.
pub const ALIGNMENT_ANGLE: f64 = 1e-6;

/// Symmetrizes and PSD-checks a covariance, clamping tiny negative eigenvalues.
pub(crate) fn checked_covariance(m: DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(m);
    }
    let transpose = m.transpose();
    let asymmetry = (&m - &transpose).amax() / scale;
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric { what, asymmetry });
    }
    let sym = (&m + &transpose) * 0.5;
    let trace = sym.trace();
    let eig = sym.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(sym);
    }
    if min < -PSD_TOLERANCE * trace.abs() {
        return Err(Error::NotPositiveSemidefinite { what, eigenvalue: min });
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

fn checked_fixed<const N: usize>(m: &SMatrix<f64, N, N>, what: &'static str) -> Result<SMatrix<f64, N, N>> {
    let dynamic = checked_covariance(DMatrix::from_column_slice(N, N, m.as_slice()), what)?;
    Ok(SMatrix::<f64, N, N>::from_column_slice(dynamic.as_slice()))
}

/// Joint estimate of both objects' states with its covariance and hard-body radii.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    theta_hat: StateVector,
    c_theta: StateCovariance,
    r1: f64,
    r2: f64,
}

impl JointState {
    pub fn new(theta_hat: StateVector, c_theta: StateCovariance, r1: f64, r2: f64) -> Result<Self> {
        if theta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state estimate"));
        }
        for (name, r) in [("r1", r1), ("r2", r2)] {
            ensure_finite(r, name)?;
            if r <= 0.0 {
                return Err(invalid(name, "hard-body radius must be positive"));
            }
        }
        let c_theta = checked_fixed(&c_theta, "joint covariance")?;
        Ok(Self { theta_hat, c_theta, r1, r2 })
    }

    pub fn theta_hat(&self) -> &StateVector {
        &self.theta_hat
    }

    pub fn covariance(&self) -> &StateCovariance {
        &self.c_theta
    }

    pub fn radii(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    pub fn combined_radius(&self) -> f64 {
        self.r1 + self.r2
    }

    /// Position estimate of object `0` or `1`.
    pub fn position(&self, object: usize) -> Vector3<f64> {
        self.theta_hat.fixed_rows::<3>(6 * object).into_owned()
    }

    pub fn velocity(&self, object: usize) -> Vector3<f64> {
        self.theta_hat.fixed_rows::<3>(6 * object + 3).into_owned()
    }

    /// 3x3 position covariance block of object `0` or `1`.
    pub fn position_covariance(&self, object: usize) -> Matrix3<f64> {
        self.c_theta.fixed_view::<3, 3>(6 * object, 6 * object).into_owned()
    }

    /// The same conjunction with the two objects relabelled.
    pub fn swapped(&self) -> Self {
        let mut perm = StateCovariance::zeros();
        for i in 0..6 {
            perm[(i, i + 6)] = 1.0;
            perm[(i + 6, i)] = 1.0;
        }
        Self {
            theta_hat: perm * self.theta_hat,
            c_theta: perm * self.c_theta * perm.transpose(),
            r1: self.r2,
            r2: self.r1,
        }
    }
}

/// Relative position and velocity at closest approach.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeState {
    pub delta_pos_hat: Vector3<f64>,
    pub c_delta: Matrix3<f64>,
    pub delta_v_hat: Vector3<f64>,
}

impl RelativeState {
    pub fn new(delta_pos_hat: Vector3<f64>, c_delta: Matrix3<f64>, delta_v_hat: Vector3<f64>) -> Result<Self> {
        if delta_pos_hat.iter().chain(delta_v_hat.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("relative state"));
        }
        let c_delta = checked_fixed(&c_delta, "relative covariance")?;
        Ok(Self { delta_pos_hat, c_delta, delta_v_hat })
    }
}

/// `A C A^T` for the difference operator `A = [-I 0 I 0]`.
pub fn relative_covariance(js: &JointState) -> Result<RelativeState> {
    let c = &js.c_theta;
    let c11 = c.fixed_view::<3, 3>(0, 0);
    let c22 = c.fixed_view::<3, 3>(6, 6);
    let c12 = c.fixed_view::<3, 3>(0, 6);
    let c_delta = c11 + c22 - c12 - c12.transpose();
    RelativeState::new(
        js.position(1) - js.position(0),
        c_delta,
        js.velocity(1) - js.velocity(0),
    )
}

/// How the first in-plane axis is chosen. Any choice yields the same
/// probabilities; the convention only fixes the reported coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PlaneAxis {
    /// `i_dv x displacement`, falling back to [`PlaneAxis::Canonical`] when
    /// the two are within [`ALIGNMENT_ANGLE`] of each other.
    #[default]
    Displacement,
    /// `i_dv x e_k` with `e_k` the canonical axis least aligned with `i_dv`.
    Canonical,
}

/// Relative displacement projected onto the plane normal to the relative velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct EncounterPlane {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    /// Rows are `i_u'`, `i_v'`, `i_dv`.
    pub rotation: Matrix3<f64>,
}

fn canonical_axis(i_dv: &Vector3<f64>) -> Vector3<f64> {
    let mut k = 0;
    for j in 1..3 {
        if i_dv[j].abs() < i_dv[k].abs() {
            k = j;
        }
    }
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    i_dv.cross(&e).normalize()
}

pub fn encounter_projection(rs: &RelativeState) -> Result<EncounterPlane> {
    encounter_projection_with(rs, PlaneAxis::default())
}

pub fn encounter_projection_with(rs: &RelativeState, axis: PlaneAxis) -> Result<EncounterPlane> {
    let speed = rs.delta_v_hat.norm();
    if speed == 0.0 {
        return Err(Error::DegenerateEncounter);
    }
    let i_dv = rs.delta_v_hat / speed;
    let i_u = match axis {
        PlaneAxis::Displacement => {
            let cross = i_dv.cross(&rs.delta_pos_hat);
            let dist = rs.delta_pos_hat.norm();
            if dist > 0.0 && cross.norm() > libm::sin(ALIGNMENT_ANGLE) * dist {
                cross.normalize()
            } else {
                canonical_axis(&i_dv)
            }
        }
        PlaneAxis::Canonical => canonical_axis(&i_dv),
    };
    let i_v = i_dv.cross(&i_u);
    let rotation = Matrix3::from_rows(&[i_u.transpose(), i_v.transpose(), i_dv.transpose()]);
    let mean3 = rotation * rs.delta_pos_hat;
    let cov3 = rotation * rs.c_delta * rotation.transpose();
    let cov = cov3.fixed_view::<2, 2>(0, 0).into_owned();
    Ok(EncounterPlane {
        mean: Vector2::new(mean3[0], mean3[1]),
        cov: (cov + cov.transpose()) * 0.5,
        rotation,
    })
}

/// Encounter in principal (eigen) coordinates of the plane covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedEncounter {
    u_hat: f64,
    v_hat: f64,
    s1: f64,
    s2: f64,
    rot_m: Matrix3<f64>,
    rot_es: Matrix2<f64>,
    r_combined: f64,
}

impl StandardizedEncounter {
    /// Builds an encounter directly from principal-axis quantities. When
    /// `s1 < s2` the axes are exchanged so that `s1 >= s2` holds.
    pub fn from_principal(u_hat: f64, v_hat: f64, s1: f64, s2: f64, r_combined: f64) -> Result<Self> {
        for (name, v) in [("u_hat", u_hat), ("v_hat", v_hat), ("s1", s1), ("s2", s2), ("r_combined", r_combined)] {
            ensure_finite(v, name)?;
        }
        if s1 <= 0.0 || s2 <= 0.0 {
            return Err(invalid("s", "principal deviations must be positive"));
        }
        if r_combined <= 0.0 {
            return Err(invalid("r_combined", "combined radius must be positive"));
        }
        let (u_hat, v_hat, s1, s2, rot_es) = if s1 >= s2 {
            (u_hat, v_hat, s1, s2, Matrix2::identity())
        } else {
            (v_hat, u_hat, s2, s1, Matrix2::new(0.0, 1.0, 1.0, 0.0))
        };
        Ok(Self { u_hat, v_hat, s1, s2, rot_m: Matrix3::identity(), rot_es, r_combined })
    }

    pub fn u_hat(&self) -> f64 {
        self.u_hat
    }
    pub fn v_hat(&self) -> f64 {
        self.v_hat
    }
    pub fn s1(&self) -> f64 {
        self.s1
    }
    pub fn s2(&self) -> f64 {
        self.s2
    }
    pub fn rot_m(&self) -> &Matrix3<f64> {
        &self.rot_m
    }
    pub fn rot_es(&self) -> &Matrix2<f64> {
        &self.rot_es
    }
    pub fn r_combined(&self) -> f64 {
        self.r_combined
    }

    /// Estimated miss distance in the encounter plane.
    pub fn d(&self) -> f64 {
        libm::hypot(self.u_hat, self.v_hat)
    }

    /// `max(s1/s2, s2/s1)`.
    pub fn aspect_ratio(&self) -> f64 {
        self.s1 / self.s2
    }
}

/// Eigen-decomposes the plane covariance and rotates the mean into its principal axes.
pub fn standardize(plane: &EncounterPlane, r_combined: f64) -> Result<StandardizedEncounter> {
    ensure_finite(r_combined, "r_combined")?;
    if r_combined <= 0.0 {
        return Err(invalid("r_combined", "combined radius must be positive"));
    }
    let c = &plane.cov;
    if c.iter().chain(plane.mean.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encounter plane"));
    }
    let (a, b, d) = (c[(0, 0)], 0.5 * (c[(0, 1)] + c[(1, 0)]), c[(1, 1)]);
    let half_sum = 0.5 * (a + d);
    let radius = libm::hypot(0.5 * (a - d), b);
    let l1 = half_sum + radius;
    if l1 <= 0.0 {
        return Err(Error::Singular { what: "encounter-plane covariance", eigenvalue: l1 });
    }
    // Product form avoids cancellation in the small eigenvalue.
    let l2 = (a * d - b * b) / l1;
    if l2 <= 0.0 {
        return Err(Error::Singular { what: "encounter-plane covariance", eigenvalue: l2 });
    }
    let theta = 0.5 * libm::atan2(2.0 * b, a - d);
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let rot_es = Matrix2::new(cos, -sin, sin, cos);
    let principal = rot_es.transpose() * plane.mean;
    Ok(StandardizedEncounter {
        u_hat: principal[0],
        v_hat: principal[1],
        s1: libm::sqrt(l1),
        s2: libm::sqrt(l2),
        rot_m: plane.rotation,
        rot_es,
        r_combined,
    })
}

/// Full reduction from a joint state to a standardized encounter.
pub fn standardized_encounter(js: &JointState) -> Result<StandardizedEncounter> {
    standardized_encounter_with(js, PlaneAxis::default())
}

pub fn standardized_encounter_with(js: &JointState, axis: PlaneAxis) -> Result<StandardizedEncounter> {
    let rs = relative_covariance(js)?;
    let plane = encounter_projection_with(&rs, axis)?;
    standardize(&plane, js.combined_radius())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use nalgebra::Rotation3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd<const N: usize>(rng: &mut ChaCha8Rng) -> SMatrix<f64, N, N> {
        let a = SMatrix::<f64, N, N>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        a * a.transpose() + SMatrix::<f64, N, N>::identity() * 0.05
    }

    fn state(rng: &mut ChaCha8Rng) -> JointState {
        let theta = StateVector::from_fn(|i, _| {
            if (i / 3) % 2 == 0 {
                rng.gen_range(-500.0..500.0)
            } else {
                rng.gen_range(-7000.0..7000.0)
            }
        });
        JointState::new(theta, random_psd::<12>(rng) * 100.0, 2.0, 3.0).unwrap()
    }

    // Explicit 3x12 difference operator, independent of the block formula.
    fn difference_operator() -> SMatrix<f64, 3, 12> {
        let mut a = SMatrix::<f64, 3, 12>::zeros();
        for i in 0..3 {
            a[(i, i)] = -1.0;
            a[(i, i + 6)] = 1.0;
        }
        a
    }

    #[test]
    fn identity_joint_covariance_doubles() {
        let js = JointState::new(StateVector::zeros(), StateCovariance::identity(), 1.0, 1.0).unwrap();
        let rs = relative_covariance(&js).unwrap();
        assert!((rs.c_delta - Matrix3::identity() * 2.0).amax() < 1e-15);
    }

    #[test]
    fn correlated_blocks_reduce_relative_covariance() {
        for &rho in &[-0.5, 0.0, 0.3, 0.9] {
            let mut c = StateCovariance::identity();
            for i in 0..3 {
                c[(i, i + 6)] = rho;
                c[(i + 6, i)] = rho;
            }
            let js = JointState::new(StateVector::zeros(), c, 1.0, 1.0).unwrap();
            let rs = relative_covariance(&js).unwrap();
            let oracle = difference_operator() * c * difference_operator().transpose();
            assert!((rs.c_delta - oracle).amax() < 1e-14);
            assert!((rs.c_delta - Matrix3::identity() * (2.0 - 2.0 * rho)).amax() < 1e-14);
        }
    }

    #[test]
    fn swapping_objects_negates_displacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let js = state(&mut rng);
        let a = relative_covariance(&js).unwrap();
        let b = relative_covariance(&js.swapped()).unwrap();
        assert!((a.c_delta - b.c_delta).amax() < 1e-9);
        assert!((a.delta_pos_hat + b.delta_pos_hat).amax() < 1e-12);
        assert!((a.delta_v_hat + b.delta_v_hat).amax() < 1e-12);
    }

    #[test]
    fn block_formula_matches_difference_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let js = state(&mut rng);
            let a = difference_operator();
            let oracle = a * js.covariance() * a.transpose();
            let rs = relative_covariance(&js).unwrap();
            assert!((rs.c_delta - oracle).amax() <= 1e-12 * oracle.amax());
        }
    }

    #[test]
    fn rejects_bad_joint_states() {
        let mut c = StateCovariance::identity();
        c[(0, 0)] = -1.0;
        assert!(matches!(
            JointState::new(StateVector::zeros(), c, 1.0, 1.0),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        let mut c = StateCovariance::identity();
        c[(0, 1)] = 0.1;
        assert!(matches!(
            JointState::new(StateVector::zeros(), c, 1.0, 1.0),
            Err(Error::NotSymmetric { .. })
        ));
        let mut c = StateCovariance::identity();
        c[(3, 3)] = f64::NAN;
        assert!(matches!(
            JointState::new(StateVector::zeros(), c, 1.0, 1.0),
            Err(Error::NonFinite(_))
        ));
        assert!(JointState::new(StateVector::zeros(), StateCovariance::identity(), 0.0, 1.0).is_err());
    }

    #[test]
    fn clamps_tiny_negative_eigenvalues() {
        let mut c = StateCovariance::identity();
        c[(11, 11)] = -1e-12;
        let js = JointState::new(StateVector::zeros(), c, 1.0, 1.0).unwrap();
        let min = js.covariance().symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-15);
    }

    #[test]
    fn axis_aligned_projection() {
        let (p, q) = (3.0, -4.0);
        let rs = RelativeState::new(
            Vector3::new(p, q, 0.0),
            Matrix3::from_diagonal(&Vector3::new(2.0, 5.0, 7.0)),
            Vector3::new(0.0, 0.0, 10.0),
        )
        .unwrap();
        let plane = encounter_projection(&rs).unwrap();
        assert!((plane.mean.norm() - 5.0).abs() < 1e-12);
        let eig = plane.cov.symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_covariance_stays_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let dv = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let rs = RelativeState::new(Vector3::new(1.0, 2.0, 3.0), Matrix3::identity() * 9.0, dv).unwrap();
            let plane = encounter_projection(&rs).unwrap();
            assert!((plane.cov - Matrix2::identity() * 9.0).amax() < 1e-12);
        }
    }

    #[test]
    fn projection_matches_direct_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c = random_psd::<3>(&mut rng);
            let dv = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let dp = Vector3::from_fn(|_, _| rng.gen_range(-10.0..10.0));
            let rs = RelativeState::new(dp, c, dv).unwrap();
            let plane = encounter_projection(&rs).unwrap();
            let m = plane.rotation;
            assert!((m * m.transpose() - Matrix3::identity()).amax() < 1e-10);
            // Row by row products, written out without the crate's code path.
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            acc += m[(i, k)] * c[(k, l)] * m[(j, l)];
                        }
                    }
                    assert!((plane.cov[(i, j)] - acc).abs() < 1e-12);
                }
            }
            let perp = dp - dv.normalize() * dp.dot(&dv.normalize());
            assert!((plane.mean.norm() - perp.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_relative_velocity_is_degenerate() {
        let rs = RelativeState::new(Vector3::new(1.0, 0.0, 0.0), Matrix3::identity(), Vector3::zeros()).unwrap();
        assert_eq!(encounter_projection(&rs), Err(Error::DegenerateEncounter));
    }

    #[test]
    fn parallel_displacement_uses_fallback_axis() {
        let rs = RelativeState::new(Vector3::new(0.0, 0.0, 5.0), Matrix3::identity(), Vector3::new(0.0, 0.0, 2.0)).unwrap();
        let plane = encounter_projection(&rs).unwrap();
        assert!(plane.mean.norm() < 1e-12);
        let m = plane.rotation;
        assert!((m * m.transpose() - Matrix3::identity()).amax() < 1e-12);
    }

    #[test]
    fn standardize_isotropic() {
        let plane = EncounterPlane {
            mean: Vector2::new(4.0, 0.0),
            cov: Matrix2::identity() * 4.0,
            rotation: Matrix3::identity(),
        };
        let enc = standardize(&plane, 1.0).unwrap();
        assert!((enc.s1() - 2.0).abs() < 1e-15 && (enc.s2() - 2.0).abs() < 1e-15);
        assert!((enc.u_hat().abs() - 4.0).abs() < 1e-15 && enc.v_hat().abs() < 1e-15);
        assert!((enc.d() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_diagonal() {
        let plane = EncounterPlane {
            mean: Vector2::new(1.0, 1.0),
            cov: Matrix2::new(9.0, 0.0, 0.0, 4.0),
            rotation: Matrix3::identity(),
        };
        let enc = standardize(&plane, 1.0).unwrap();
        assert!((enc.s1() - 3.0).abs() < 1e-15);
        assert!((enc.s2() - 2.0).abs() < 1e-15);
        assert!((enc.d() - 2f64.sqrt()).abs() < 1e-15);
        let diag = Matrix2::new(4.0, 0.0, 0.0, 9.0);
        let swapped = standardize(&EncounterPlane { cov: diag, ..plane }, 1.0).unwrap();
        assert!((swapped.s1() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_rejects_singular() {
        let plane = EncounterPlane {
            mean: Vector2::new(1.0, 1.0),
            cov: Matrix2::new(1.0, 1.0, 1.0, 1.0),
            rotation: Matrix3::identity(),
        };
        assert!(matches!(standardize(&plane, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn from_principal_orders_deviations() {
        let enc = StandardizedEncounter::from_principal(1.0, 2.0, 3.0, 5.0, 1.0).unwrap();
        assert_eq!((enc.s1(), enc.s2()), (5.0, 3.0));
        assert_eq!((enc.u_hat(), enc.v_hat()), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn standardize_preserves_norm(
            a in 0.1f64..100.0, d in 0.1f64..100.0, rho in -0.99f64..0.99,
            mx in -50.0f64..50.0, my in -50.0f64..50.0,
        ) {
            let b = rho * (a * d).sqrt();
            let plane = EncounterPlane {
                mean: Vector2::new(mx, my),
                cov: Matrix2::new(a, b, b, d),
                rotation: Matrix3::identity(),
            };
            let enc = standardize(&plane, 1.0).unwrap();
            let direct = mx * mx + my * my;
            let got = enc.u_hat() * enc.u_hat() + enc.v_hat() * enc.v_hat();
            prop_assert!((got - direct).abs() <= 1e-12 * direct.max(1e-300));
            prop_assert!(enc.s1() >= enc.s2());
            let e = enc.rot_es();
            prop_assert!((e.transpose() * e - Matrix2::identity()).amax() < 1e-12);
            // Columns are eigenvectors with eigenvalues s1^2, s2^2.
            let v1 = e.column(0).into_owned();
            prop_assert!((plane.cov * v1 - v1 * enc.s1() * enc.s1()).amax() < 1e-9 * a.max(d));
        }

        #[test]
        fn pipeline_is_rotation_invariant(seed in 0u64..1000, rx in -3.0f64..3.0, ry in -3.0f64..3.0, rz in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let js = state(&mut rng);
            let rot = Rotation3::from_euler_angles(rx, ry, rz).into_inner();
            let mut q = StateCovariance::zeros();
            for b in 0..4 {
                q.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(&rot);
            }
            let rotated = JointState::new(q * js.theta_hat(), q * js.covariance() * q.transpose(), 2.0, 3.0).unwrap();
            let a = standardized_encounter(&js).unwrap();
            let b = standardized_encounter(&rotated).unwrap();
            prop_assert!((a.d() - b.d()).abs() <= 1e-10 * a.d().max(1.0));
            prop_assert!((a.s1() - b.s1()).abs() <= 1e-10 * a.s1());
            prop_assert!((a.s2() - b.s2()).abs() <= 1e-10 * a.s1());
        }

        #[test]
        fn axis_convention_does_not_change_ratios(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let js = state(&mut rng);
            let a = standardized_encounter_with(&js, PlaneAxis::Displacement).unwrap();
            let b = standardized_encounter_with(&js, PlaneAxis::Canonical).unwrap();
            let ra = [a.d() / a.s1(), a.d() / a.s2(), a.s1() / a.s2()];
            let rb = [b.d() / b.s1(), b.d() / b.s2(), b.s1() / b.s2()];
            let diffs: Vec<f64> = ra.iter().zip(rb.iter()).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)).collect();
            prop_assert!(diffs.iter().all(|&d| d < 1e-10), "{:?} vs {:?}", ra, rb);
        }
    }
}

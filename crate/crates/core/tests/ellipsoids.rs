use conjunct_core::{build_ellipsoid, closest_points, min_distance, Ellipsoid};
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

fn ellipsoid(center: [f64; 3], angles: [f64; 3], semi: [f64; 3]) -> Ellipsoid {
    let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]);
    Ellipsoid::new(
        DVector::from_column_slice(&center),
        DMatrix::from_column_slice(3, 3, rot.matrix().as_slice()),
        DVector::from_column_slice(&semi),
    )
    .unwrap()
}

fn arb_ellipsoid() -> impl Strategy<Value = Ellipsoid> {
    (
        proptest::array::uniform3(-20.0f64..20.0),
        proptest::array::uniform3(-3.1f64..3.1),
        proptest::array::uniform3(0.05f64..8.0),
    )
        .prop_map(|(c, a, s)| ellipsoid(c, a, s))
}

fn scale_of(a: &Ellipsoid, b: &Ellipsoid) -> f64 {
    (a.center() - b.center()).norm().max(a.max_semi_length()).max(b.max_semi_length())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn closest_points_are_feasible_and_certified(a in arb_ellipsoid(), b in arb_ellipsoid()) {
        let cp = closest_points(&a, &b).unwrap();
        prop_assert!(a.level(&cp.first) <= 1.0 + 1e-9);
        prop_assert!(b.level(&cp.second) <= 1.0 + 1e-9);
        prop_assert!(cp.lower_bound <= cp.distance + 1e-12);
        prop_assert!(cp.distance - cp.lower_bound <= 1e-9 * scale_of(&a, &b));
        prop_assert!(((&cp.second - &cp.first).norm() - cp.distance).abs() <= 1e-9 * scale_of(&a, &b));
        prop_assert_eq!(cp.distance, min_distance(&b, &a).unwrap());
    }

    #[test]
    fn distance_is_rigid_motion_invariant_and_homogeneous(
        a in arb_ellipsoid(),
        b in arb_ellipsoid(),
        shift in proptest::array::uniform3(-100.0f64..100.0),
        lambda in 0.1f64..10.0,
    ) {
        let d = min_distance(&a, &b).unwrap();
        let tol = 1e-8 * scale_of(&a, &b);
        let t = DVector::from_column_slice(&shift);
        let moved = |e: &Ellipsoid| e.recentered(e.center() + &t);
        prop_assert!((min_distance(&moved(&a), &moved(&b)).unwrap() - d).abs() <= tol + 1e-9 * shift.iter().map(|x| x.abs()).sum::<f64>());
        let scaled = |e: &Ellipsoid| Ellipsoid::new(e.center() * lambda, e.axes().clone(), e.semi_lengths() * lambda).unwrap();
        prop_assert!((min_distance(&scaled(&a), &scaled(&b)).unwrap() - lambda * d).abs() <= lambda * tol);
    }

    #[test]
    fn growing_an_ellipsoid_never_increases_distance(a in arb_ellipsoid(), b in arb_ellipsoid(), grow in 1.0f64..3.0) {
        let bigger = Ellipsoid::new(a.center().clone(), a.axes().clone(), a.semi_lengths() * grow).unwrap();
        let tol = 1e-9 * scale_of(&bigger, &b);
        prop_assert!(min_distance(&bigger, &b).unwrap() <= min_distance(&a, &b).unwrap() + tol);
    }

    #[test]
    fn ksigma_boundary_solves_quadratic_form(
        sd in proptest::array::uniform3(1.0f64..200.0),
        angles in proptest::array::uniform3(-3.1f64..3.1),
        k in 0.5f64..6.0,
        dir in proptest::array::uniform3(-1.0f64..1.0),
    ) {
        prop_assume!(dir.iter().map(|x| x * x).sum::<f64>() > 1e-6);
        let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]).into_inner();
        let cov: Matrix3<f64> = rot * Matrix3::from_diagonal(&Vector3::from(sd).map(|s| s * s)) * rot.transpose();
        let center = Vector3::new(7.0e6, -3.0e3, 40.0);
        let e = build_ellipsoid(&center, &cov, k).unwrap();
        // Boundary point along `dir` through the center, then checked against
        // a directly inverted covariance by Gaussian elimination.
        let u = DVector::from_column_slice(&dir).normalize();
        prop_assert_eq!(e.center().as_slice(), center.as_slice());
        let at_origin = e.recentered(DVector::zeros(3));
        let along = &u / at_origin.level(&u);
        let offset = Vector3::new(along[0], along[1], along[2]);
        let q = offset.dot(&cov.lu().solve(&offset).unwrap());
        prop_assert!((q.sqrt() - k).abs() <= 1e-9 * k, "q^0.5 = {} vs k = {}", q.sqrt(), k);
        prop_assert!((at_origin.level(&along) - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn axis_aligned_separated_boxes_of_known_distance() {
    // Two axis-aligned ellipsoids facing along x: distance is the gap between
    // their x extremes.
    let a = ellipsoid([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [3.0, 1.0, 0.5]);
    let b = ellipsoid([10.0, 0.0, 0.0], [0.0, 0.0, 0.0], [2.0, 4.0, 1.0]);
    assert!((min_distance(&a, &b).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn works_in_two_and_five_dimensions() {
    let a = Ellipsoid::sphere(DVector::zeros(2), 1.0).unwrap();
    let b = Ellipsoid::sphere(DVector::from_vec(vec![3.0, 4.0]), 2.0).unwrap();
    assert!((min_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    let mut far = DVector::zeros(5);
    far[4] = 10.0;
    let c = Ellipsoid::new(DVector::zeros(5), DMatrix::identity(5, 5), DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0])).unwrap();
    let d = Ellipsoid::sphere(far, 1.0).unwrap();
    assert!((min_distance(&c, &d).unwrap() - 4.0).abs() < 1e-10);
}

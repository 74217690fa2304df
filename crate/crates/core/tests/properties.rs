use manifold_icp::baseline::{nearest_brute_force, rmse, LogEigIndex};
use manifold_icp::kinematics::{builtin_model, DatasetFile};
use manifold_icp::{dist, exp_map, geodesic, log_map, RigidSpdTransform, Rotation, SpdCloud, SpdMatrix};
use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spd(dim: usize) -> impl Strategy<Value = SpdMatrix> {
    prop::collection::vec(-2.0..2.0f64, dim * dim).prop_map(move |v| {
        let a = DMatrix::from_vec(dim, dim, v);
        SpdMatrix::new(&a * a.transpose() + DMatrix::identity(dim, dim) * 0.1).unwrap()
    })
}

fn invertible(dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, dim * dim)
        .prop_map(move |v| DMatrix::from_vec(dim, dim, v) + DMatrix::identity(dim, dim) * 2.5)
}

fn cloud(dim: usize, len: std::ops::Range<usize>) -> impl Strategy<Value = SpdCloud> {
    prop::collection::vec(spd(dim), len).prop_map(|p| SpdCloud::new(p).unwrap())
}

fn close(a: &SpdMatrix, b: &SpdMatrix, tol: f64) -> bool {
    a.frobenius_distance(b) <= tol * (1.0 + a.matrix().norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_congruence_invariant((a, b, g) in (spd(3), spd(3), invertible(3))) {
        let d = dist(&a, &b).unwrap();
        let dg = dist(&a.congruence(&g), &b.congruence(&g)).unwrap();
        prop_assert!((d - dg).abs() <= 1e-8 * (1.0 + d));
    }

    #[test]
    fn distance_is_symmetric_and_zero_on_the_diagonal((a, b) in (spd(2), spd(2))) {
        prop_assert_eq!(dist(&a, &a).unwrap(), 0.0);
        let (ab, ba) = (dist(&a, &b).unwrap(), dist(&b, &a).unwrap());
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab));
    }

    #[test]
    fn exp_undoes_log((base, x) in (spd(3), spd(3))) {
        let back = exp_map(&log_map(&x, &base).unwrap());
        prop_assert!(close(&back, &x, 1e-9));
    }

    #[test]
    fn geodesic_midpoint_is_equidistant((a, b) in (spd(3), spd(3))) {
        let mid = geodesic(&a, &b, 0.5).unwrap().point;
        let (da, db) = (dist(&mid, &a).unwrap(), dist(&mid, &b).unwrap());
        prop_assert!((da - db).abs() <= 1e-8 * (1.0 + da));
        prop_assert!((da + db - dist(&a, &b).unwrap()).abs() <= 1e-8 * (1.0 + da));
    }

    #[test]
    fn pruned_search_equals_brute_force((points, queries) in (prop::collection::vec(spd(3), 1..40), prop::collection::vec(spd(3), 1..10))) {
        let index = LogEigIndex::new(&points);
        for q in &queries {
            prop_assert_eq!(index.nearest(&points, q), nearest_brute_force(&points, q));
        }
    }

    #[test]
    fn rmse_ignores_a_shared_congruence((p, g) in (cloud(3, 3..12), invertible(3)), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Rotation::random(3, &mut rng);
        let q = p.map(|m| m.congruence(r.matrix()));
        let plain = rmse(&p, &q).unwrap();
        let moved = rmse(&p.map(|m| m.congruence(&g)), &q.map(|m| m.congruence(&g))).unwrap();
        prop_assert!((plain.rmse - moved.rmse).abs() <= 1e-7 * (1.0 + plain.rmse));
    }

    #[test]
    fn transform_json_round_trip_preserves_apply(
        (tm, sm, pts) in (spd(3), spd(3), cloud(3, 1..8)),
        s in 0.5..2.0f64,
        seed in any::<u64>(),
        with_pt in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pt = with_pt.then(|| sm.sqrt().matrix() * tm.inv_sqrt().matrix());
        let recenter = match &pt {
            Some(e) => tm.congruence(e),
            None => tm.clone(),
        };
        let t = RigidSpdTransform::new(tm, recenter, sm, s, Rotation::random(3, &mut rng), pt).unwrap();
        let back = RigidSpdTransform::from_json(&t.to_json()).unwrap();
        for (a, b) in t.apply(&pts).unwrap().iter().zip(back.apply(&pts).unwrap().iter()) {
            prop_assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn base_rotation_acts_by_congruence(q in prop::collection::vec(-1.5..1.5f64, 7), angle in -3.0..3.0f64) {
        let arm = builtin_model("panda7").unwrap();
        let r: Matrix3<f64> = *Rotation3::from_axis_angle(&Vector3::y_axis(), angle).matrix();
        let turned = arm.with_base_rotation("turned", r).unwrap();
        let rd = DMatrix::from_iterator(3, 3, r.iter().copied());
        let expected = arm.manipulability(&q, 1e-12).unwrap().congruence(&rd);
        let got = turned.manipulability(&q, 1e-12).unwrap();
        prop_assert!(close(&got, &expected, 1e-12));
    }

    #[test]
    fn dataset_files_round_trip_exactly(c in cloud(3, 1..6), seed in any::<u64>()) {
        let file = DatasetFile::new("panda7", Some(seed), None, &c);
        let back = DatasetFile::from_json(&file.to_json()).unwrap();
        prop_assert_eq!(back.cloud().unwrap(), c);
        prop_assert_eq!(back.seed, Some(seed));
    }
}

mod common;

use common::*;
use morsecr::model::forward_kinematics;
use morsecr::morse::{direction_max_search, direction_max_search_seeded, morse_number, Thresholds};
use morsecr::{Configuration, Direction, Vec3};
use proptest::prelude::*;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn direction() -> impl Strategy<Value = Direction> {
    vec3(1.0)
        .prop_filter("non-zero", |v| v.norm() > 1e-3)
        .prop_map(|v| Direction::new(v).unwrap())
}

fn bent_robot() -> impl Strategy<Value = (usize, Configuration)> {
    (2usize..60).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(vec3(0.4), n).prop_map(|j| Configuration::new(j).unwrap()),
        )
    })
}

proptest! {
    #[test]
    fn opposite_direction_gives_same_descriptor((n, theta) in bent_robot(), v in direction()) {
        prop_assert!(sign_symmetric(&random_robot(n, 0.01), &theta, &v));
    }

    #[test]
    fn descriptor_is_rotation_equivariant((n, theta) in bent_robot(), v in direction(), w in vec3(3.0)) {
        prop_assert!(rotation_equivariant(&random_robot(n, 0.01), &theta, &v, w));
    }

    #[test]
    fn descriptor_is_scale_invariant((n, theta) in bent_robot(), v in direction(), f in 0.01f64..100.0) {
        prop_assert!(scale_invariant(&random_robot(n, 0.01), &theta, &v, f));
    }

    #[test]
    fn count_is_bounded_by_interior_joints((n, theta) in bent_robot(), v in direction()) {
        let shape = forward_kinematics(&random_robot(n, 0.01), &theta).unwrap();
        let m = morse_number(&shape, &v, Thresholds::default());
        prop_assert!(m.count < n);
        prop_assert_eq!(m.critical_joints.len(), m.degenerate_flags.len());
        prop_assert!(m.critical_joints.iter().all(|&j| j >= 1 && j < n));
        prop_assert!(m.critical_joints.windows(2).all(|w| w[0] < w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn seeded_max_search_dominates_its_seeds((n, theta) in bent_robot(), v in direction()) {
        let shape = forward_kinematics(&random_robot(n, 0.01), &theta).unwrap();
        let (_, best) = direction_max_search_seeded(&shape, 128, &[v], Thresholds::default()).unwrap();
        let fixed = morse_number(&shape, &v, Thresholds::default());
        prop_assert!(best.count >= fixed.count);
        let (_, plain) = direction_max_search(&shape, 128).unwrap();
        prop_assert!(best.count >= plain.count);
        prop_assert_eq!(direction_max_search(&shape, 128).unwrap().1, plain);
    }
}

#[test]
fn straight_robot_is_j_along_its_axis() {
    let model = random_robot(10, 0.01);
    let shape = forward_kinematics(&model, &Configuration::zeros(10)).unwrap();
    let m = morse_number(
        &shape,
        &Direction::new(Vec3::z()).unwrap(),
        Thresholds::default(),
    );
    assert_eq!((m.count, m.label().as_str(), m.generic), (0, "J", true));
}

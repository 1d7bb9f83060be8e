mod common;

use common::*;
use ndarray::{array, Array1};
use projection_pursuit::projection::{project, project_betamin, project_l0, project_quadratic, NullSet, QuadraticGrid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn l0_matches_support_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..500 {
        let p = rng.gen_range(1..=6);
        let s0 = rng.gen_range(0..=p);
        let v = random_vector(&mut rng, p, 3.0);
        assert_eq!(project_l0(v.view(), s0).distance, l0_bruteforce(v.view(), s0), "{v} s0={s0}");
    }
}

#[test]
fn betamin_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let p = rng.gen_range(1..=6);
        let c = rng.gen_range(0.1..2.0);
        let v = random_vector(&mut rng, p, 3.0);
        let proj = project_betamin(v.view(), c).unwrap();
        for j in 0..p {
            let (d, _) = betamin_grid(v[j], c);
            assert!(((proj.point[j] - v[j]).abs() - d).abs() <= 1e-8, "{} {c}", v[j]);
        }
    }
}

#[test]
fn quadratic_matches_subgradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let grid = QuadraticGrid::default();
    for _ in 0..60 {
        let p = rng.gen_range(2..=10);
        let q = random_pd(&mut rng, p);
        let v = random_vector(&mut rng, p, 2.0);
        let c = rng.gen_range(0.2..1.5);
        let ours = project_quadratic(v.view(), Some(q.view()), c, &grid).unwrap();
        let oracle = quadratic_subgradient(v.view(), q.view(), c, 200_000);
        let rel = (ours.distance - oracle) / oracle.max(1e-12);
        assert!(rel.abs() <= 1e-3, "ours {} oracle {oracle} rel {rel}", ours.distance);
    }
}

#[test]
fn quadratic_identity_examples() {
    let p = project(array![3.0, 0.0].view(), &NullSet::QuadraticBall { q: None, c: 2.0 }).unwrap();
    assert!((p.point[0] - 2.0).abs() < 1e-8 && p.point[1] == 0.0);
    let p = project(array![2.0, 2.0].view(), &NullSet::QuadraticBall { q: None, c: 2.0 }).unwrap();
    assert!((p.distance - 2.0 * (2.0 - 2f64.sqrt())).abs() < 1e-7);
    // identity ball: l1 projection clips large entries to a common level
    let p = project(array![3.0, 1.0].view(), &NullSet::QuadraticBall { q: None, c: 2.0 }).unwrap();
    assert!((p.point[0] - 3f64.sqrt()).abs() < 1e-7 && (p.point[1] - 1.0).abs() < 1e-9);
}

fn family() -> impl Strategy<Value = NullSet> {
    prop_oneof![
        (0usize..6).prop_map(|s0| NullSet::L0Ball { s0 }),
        (0.1f64..2.0).prop_map(|c| NullSet::BetaMin { c }),
        (0.1f64..3.0).prop_map(|c| NullSet::QuadraticBall { q: None, c }),
    ]
}

/// A point of `set`, built from an arbitrary vector.
fn member(set: &NullSet, raw: &Array1<f64>) -> Array1<f64> {
    match set {
        NullSet::L0Ball { s0 } => raw.iter().enumerate().map(|(j, &x)| if j < *s0 { x } else { 0.0 }).collect(),
        NullSet::BetaMin { c } => raw.mapv(|x| if x.abs() < 0.5 { 0.0 } else { x.signum() * (c + x.abs()) }),
        NullSet::QuadraticBall { c, .. } => {
            let n = raw.dot(raw).sqrt();
            if n > *c {
                raw * (0.999 * c / n)
            } else {
                raw.clone()
            }
        }
        NullSet::Custom { .. } => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_lands_in_set_and_is_idempotent(set in family(), v in prop::collection::vec(-4.0f64..4.0, 1..8)) {
        let v = Array1::from(v);
        let p = project(v.view(), &set).unwrap();
        prop_assert_eq!(set.contains(p.point.view(), 1e-8), Some(true));
        let again = project(p.point.view(), &set).unwrap();
        let moved = (&again.point - &p.point).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        match set {
            NullSet::QuadraticBall { .. } => prop_assert!(moved <= 1e-8),
            _ => prop_assert_eq!(moved, 0.0),
        }
    }

    #[test]
    fn no_sampled_member_is_closer(
        set in family(),
        v in prop::collection::vec(-4.0f64..4.0, 6),
        raws in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 10),
    ) {
        let v = Array1::from(v);
        let p = project(v.view(), &set).unwrap();
        for raw in raws {
            let w = member(&set, &Array1::from(raw));
            let d: f64 = (&w - &v).iter().map(|x| x.abs()).sum();
            prop_assert!(p.distance <= d + 1e-8, "{} > {d}", p.distance);
        }
    }

    #[test]
    fn projection_at_most_doubles_the_distance(
        set in family(),
        raw in prop::collection::vec(-3.0f64..3.0, 6),
        noise in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let beta = member(&set, &Array1::from(raw));
        let v = &beta + &Array1::from(noise);
        let p = project(v.view(), &set).unwrap();
        let lhs: f64 = (&p.point - &beta).iter().map(|x| x.abs()).sum();
        let rhs: f64 = (&v - &beta).iter().map(|x| x.abs()).sum();
        prop_assert!(lhs <= 2.0 * rhs + 1e-8);
    }
}

mod common;

use cei_core::chamfer::*;
use cei_core::funcrep::WorldFuncRep;
use common::*;
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exact(lambda: f64) -> MetricConfig {
    MetricConfig { lambda, epsilon: 0.0 }
}

#[test]
fn small_sets_match_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let (nx, ny) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let x = random_rep(&mut rng, nx, 1.0);
        let y = random_rep(&mut rng, ny, 1.0);
        let got = dcd(&x, &y, &exact(0.5)).unwrap();
        assert!((got - dcd_oracle(&x, &y, 0.5)).abs() <= 1e-12);
        assert_eq!(got.to_bits(), dcd(&y, &x, &exact(0.5)).unwrap().to_bits());
    }
}

#[test]
fn grid_path_matches_oracle_on_large_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (nx, ny) in [(600, 700), (513, 40), (2000, 900)] {
        let x = random_rep(&mut rng, nx, 0.3);
        let y = random_rep(&mut rng, ny, 0.3);
        for lambda in [0.0, 0.5, 2.0] {
            let got = dcd(&x, &y, &exact(lambda)).unwrap();
            assert!((got - dcd_oracle(&x, &y, lambda)).abs() <= 1e-12, "{nx}x{ny} lambda {lambda}");
        }
    }
}

#[test]
fn self_distance_is_minus_two_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let x = random_rep(&mut rng, n, 1.0);
        assert!((dcd(&x, &x, &exact(0.5)).unwrap() + 1.0).abs() <= 1e-12);
    }
}

#[test]
fn recorded_matches_are_argmins_with_lowest_index_ties() {
    // Two identical entries in Y: every match must pick the first.
    let x = WorldFuncRep::new(vec![Point3::new(0.0, 0.0, 0.0)], vec![Vector3::z()]).unwrap();
    let y = WorldFuncRep::new(
        vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ],
        vec![Vector3::z(); 3],
    )
    .unwrap();
    let eval = dcd_eval(&x, &y, &exact(0.5)).unwrap();
    assert_eq!(eval.forward, vec![0]);
    assert_eq!(eval.backward, vec![0, 0, 0]);
}

#[test]
fn empty_sets_are_rejected() {
    let x = WorldFuncRep::default();
    let y = random_rep(&mut ChaCha8Rng::seed_from_u64(4), 3, 1.0);
    assert!(dcd(&x, &y, &exact(0.5)).is_err());
    assert!(dcd(&y, &x, &exact(0.5)).is_err());
}

#[test]
fn cotangent_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = exact(0.5);
    let mut checked = 0;
    while checked < 50 {
        let x = random_rep(&mut rng, 6, 1.0);
        let y = random_rep(&mut rng, 5, 1.0);
        if dcd_tie_margin(&x, &y, 0.5) < 1e-3 {
            continue;
        }
        checked += 1;
        let cot = dcd_cotangent(&x, &y, &cfg).unwrap();
        let h = 1e-7;
        for k in 0..y.len() {
            for c in 0..3 {
                let mut a = y.clone();
                let mut b = y.clone();
                a.points[k][c] += h;
                b.points[k][c] -= h;
                let fd = (dcd(&x, &a, &cfg).unwrap() - dcd(&x, &b, &cfg).unwrap()) / (2.0 * h);
                assert!((fd - cot.points[k][c]).abs() < 1e-6);
                let mut a = y.clone();
                let mut b = y.clone();
                a.directions[k][c] += h;
                b.directions[k][c] -= h;
                let fd = (dcd(&x, &a, &cfg).unwrap() - dcd(&x, &b, &cfg).unwrap()) / (2.0 * h);
                assert!((fd - cot.directions[k][c]).abs() < 1e-6);
            }
        }
    }
}

fn rep_strategy(max: usize) -> impl Strategy<Value = WorldFuncRep> {
    (1..=max, any::<u64>()).prop_map(|(n, seed)| random_rep(&mut ChaCha8Rng::seed_from_u64(seed), n, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symmetric(x in rep_strategy(40), y in rep_strategy(40), lambda in 0.0..2.0f64) {
        let a = dcd(&x, &y, &exact(lambda)).unwrap();
        let b = dcd(&y, &x, &exact(lambda)).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn bounded_below_by_minus_two_lambda(x in rep_strategy(30), y in rep_strategy(30), lambda in 0.0..2.0f64) {
        prop_assert!(dcd(&x, &y, &exact(lambda)).unwrap() >= -2.0 * lambda - 1e-12);
    }

    #[test]
    fn invariant_under_rigid_motion(x in rep_strategy(20), y in rep_strategy(20), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(random_unit(&mut rng)), rng.random_range(-3.0..3.0));
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let moved = |s: &WorldFuncRep| WorldFuncRep {
            points: s.points.iter().map(|p| r * p + t).collect(),
            directions: s.directions.iter().map(|n| r * n).collect(),
        };
        let a = dcd(&x, &y, &exact(0.5)).unwrap();
        let b = dcd(&moved(&x), &moved(&y), &exact(0.5)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn smoothing_lowers_the_value_by_at_most_two_epsilon(x in rep_strategy(20), y in rep_strategy(20), eps in 1e-9..1e-3f64) {
        let a = dcd(&x, &y, &exact(0.5)).unwrap();
        let b = dcd(&x, &y, &MetricConfig { lambda: 0.5, epsilon: eps }).unwrap();
        // √(d² + ε²) − ε lies in [d − ε, d].
        prop_assert!(b <= a + 1e-12 && b >= a - 2.0 * eps - 1e-12);
    }

    #[test]
    fn batch_matches_single(x in rep_strategy(10), ys in prop::collection::vec(rep_strategy(10), 1..6)) {
        let batch = dcd_batch(&x, &ys, &exact(0.5)).unwrap();
        for (y, b) in ys.iter().zip(&batch) {
            prop_assert_eq!(dcd(&x, y, &exact(0.5)).unwrap(), *b);
        }
    }
}

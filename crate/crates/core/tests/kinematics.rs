mod common;

use std::collections::HashMap;

use cei_core::kinematics::*;
use cei_core::robot::{JointConfiguration, JointKind};
use common::*;
use nalgebra::Point3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_q<R: Rng>(rng: &mut R, e: &cei_core::robot::Embodiment) -> JointConfiguration {
    JointConfiguration(
        e.lower_limits()
            .iter()
            .zip(e.upper_limits())
            .map(|(&l, u)| rng.random_range(l..=u))
            .collect(),
    )
}

fn values_by_name(e: &cei_core::robot::Embodiment, q: &JointConfiguration) -> HashMap<String, f64> {
    e.dof_names().into_iter().map(String::from).zip(q.0.iter().copied()).collect()
}

fn random_local<R: Rng>(rng: &mut R, e: &cei_core::robot::Embodiment, n: usize) -> LocalPointSet {
    let links = e.tree_links().len();
    let mut s = LocalPointSet::default();
    for _ in 0..n {
        s.links.push(rng.random_range(0..links));
        s.points.push(Point3::new(
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
        ));
        s.normals.push(random_unit(rng));
    }
    s
}

#[test]
fn link_poses_match_matrix_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let (e, drawn) = random_tree(&mut rng, 8);
        let q = random_q(&mut rng, &e);
        let poses = forward_kinematics(&e, &q).unwrap();
        let oracle = fk_oracle(&drawn, &values_by_name(&e, &q));
        for (name, m) in &oracle {
            let got = poses.links[e.link_index(name).unwrap()].to_homogeneous();
            let err = (got - m).abs().max();
            assert!(err <= 1e-12, "link {name}: {err:e}");
        }
    }
}

#[test]
fn dof_order_is_depth_first_and_input_order_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let (e, drawn) = random_tree(&mut rng, 8);
        // Preorder: a joint's parent link is reached before the joint itself.
        let mut seen = vec![e.tree_links()[0].name.clone()];
        for j in &e.joints {
            assert!(seen.contains(&j.parent), "{} visited before its parent", j.name);
            seen.push(j.child.clone());
        }
        let actuated: Vec<&str> = e
            .joints
            .iter()
            .filter(|j| j.kind != JointKind::Fixed)
            .map(|j| j.name.as_str())
            .collect();
        assert_eq!(e.dof_names(), actuated);
        assert_eq!(e.dof(), drawn.iter().filter(|j| j.kind != JointKind::Fixed).count());
    }
}

#[test]
fn pullback_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (e, _) = random_tree(&mut rng, 8);
        if e.dof() == 0 {
            continue;
        }
        let q = random_q(&mut rng, &e);
        let local = random_local(&mut rng, &e, 6);
        let cot = GradientCotangent {
            points: (0..6).map(|_| random_unit(&mut rng)).collect(),
            directions: (0..6).map(|_| random_unit(&mut rng)).collect(),
        };
        let scalar = |qv: &[f64]| {
            let w = evaluate_world_set(&e, &JointConfiguration(qv.to_vec()), &local).unwrap();
            (0..6)
                .map(|k| cot.points[k].dot(&w.points[k].coords) + cot.directions[k].dot(&w.directions[k]))
                .sum::<f64>()
        };
        let fd = central_difference(scalar, &q.0, 1e-6);
        let g = pullback_to_joints(&e, &q, &local, &cot).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn entry_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let (e, _) = random_tree(&mut rng, 6);
        let n = e.dof();
        if n == 0 {
            continue;
        }
        let q = random_q(&mut rng, &e);
        let local = random_local(&mut rng, &e, 4);
        let jac = entry_jacobians(&e, &forward_kinematics(&e, &q).unwrap(), &local);
        let h = 1e-6;
        for d in 0..n {
            let mut a = q.clone();
            let mut b = q.clone();
            a.0[d] += h;
            b.0[d] -= h;
            let wa = evaluate_world_set(&e, &a, &local).unwrap();
            let wb = evaluate_world_set(&e, &b, &local).unwrap();
            for k in 0..4 {
                let dp = (wa.points[k] - wb.points[k]) / (2.0 * h);
                let dn = (wa.directions[k] - wb.directions[k]) / (2.0 * h);
                assert!((dp - jac.points[k * n + d]).norm() < 1e-6);
                assert!((dn - jac.directions[k * n + d]).norm() < 1e-6);
            }
        }
    }
}

#[test]
fn wrong_length_configuration_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (e, _) = random_tree(&mut rng, 4);
    let q = JointConfiguration(vec![0.0; e.dof() + 1]);
    assert!(forward_kinematics(&e, &q).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn link_rotations_stay_orthonormal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, _) = random_tree(&mut rng, 8);
        let q = random_q(&mut rng, &e);
        for pose in forward_kinematics(&e, &q).unwrap().links {
            let r = pose.rotation.matrix();
            prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn directions_keep_unit_length(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, _) = random_tree(&mut rng, 8);
        let local = random_local(&mut rng, &e, 8);
        let w = evaluate_world_set(&e, &random_q(&mut rng, &e), &local).unwrap();
        for n in &w.directions {
            prop_assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_matches_single(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, _) = random_tree(&mut rng, 6);
        let local = random_local(&mut rng, &e, 5);
        let qs: Vec<_> = (0..4).map(|_| random_q(&mut rng, &e)).collect();
        let batch = evaluate_world_set_batch(&e, &qs, &local).unwrap();
        for (q, b) in qs.iter().zip(&batch) {
            prop_assert_eq!(&evaluate_world_set(&e, q, &local).unwrap(), b);
        }
    }

    #[test]
    fn joints_move_only_their_subtree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, _) = random_tree(&mut rng, 6);
        let local = random_local(&mut rng, &e, 3);
        let q = random_q(&mut rng, &e);
        let base = evaluate_world_set(&e, &q, &local).unwrap();
        // Moving a joint leaves links outside its subtree where they were.
        for d in 0..e.dof() {
            let mut moved = q.clone();
            moved.0[d] += 0.1;
            let w = evaluate_world_set(&e, &moved, &local).unwrap();
            for k in 0..local.len() {
                if !e.link_chain(local.links[k]).contains(&d) {
                    prop_assert_eq!(w.points[k], base.points[k]);
                }
            }
        }
    }
}

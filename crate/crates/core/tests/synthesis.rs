mod common;

use cei_core::align::*;
use cei_core::funcrep::*;
use cei_core::geom::Aabb;
use cei_core::robot::JointConfiguration;
use cei_core::seed::frame_seed;
use cei_core::synth::*;
use cei_core::synthetic::*;
use common::*;
use nalgebra::Point3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud<R: Rng>(rng: &mut R, n: usize, spread: f64) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                )
            })
            .collect(),
    )
}

fn mask_oracle(pc: &PointCloud, robot: &PointCloud, tau: f64) -> Vec<Point3<f64>> {
    pc.points
        .iter()
        .filter(|p| robot.points.iter().all(|r| (*p - r).norm() >= tau))
        .copied()
        .collect()
}

#[test]
fn mask_removes_four_millimetres_and_keeps_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let r = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let robot = PointCloud::new(vec![r]);
        let near = r + random_unit(&mut rng) * 0.004;
        let far = r + random_unit(&mut rng) * 0.006;
        let out = mask_robot_points(&PointCloud::new(vec![near, far]), &robot, 0.005).unwrap();
        assert_eq!(out.points, vec![far]);
    }
}

#[test]
fn mask_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let pc = random_cloud(&mut rng, 500, 0.1);
        let robot = random_cloud(&mut rng, 300, 0.1);
        let tau = rng.random_range(0.001..0.02);
        assert_eq!(
            mask_robot_points(&pc, &robot, tau).unwrap().points,
            mask_oracle(&pc, &robot, tau)
        );
    }
}

#[test]
fn mask_rejects_empty_robot_and_bad_tau() {
    let pc = PointCloud::new(vec![Point3::origin()]);
    assert!(mask_robot_points(&pc, &PointCloud::default(), 0.005).is_err());
    assert!(mask_robot_points(&pc, &pc, 0.0).is_err());
    assert!(mask_robot_points(&pc, &pc, f64::NAN).is_err());
}

#[test]
fn fps_matches_quadratic_greedy_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let m = rng.random_range(2..=64);
        let n = rng.random_range(1..m);
        let start = rng.random_range(0..m);
        let pc = random_cloud(&mut rng, m, 1.0);
        let got = fps_downsample(&pc, n, start, 0).unwrap();
        let expected: Vec<_> = fps_oracle(&pc.points, n, start).into_iter().map(|i| pc.points[i]).collect();
        assert_eq!(got.points, expected);
    }
}

#[test]
fn fps_ties_go_to_the_lowest_index() {
    // Corners of a square seen from its centre are all equally far.
    let pc = PointCloud::new(vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(-1.0, 1.0, 0.0),
        Point3::new(1.0, -1.0, 0.0),
        Point3::new(-1.0, -1.0, 0.0),
    ]);
    let out = fps_downsample(&pc, 2, 0, 0).unwrap();
    assert_eq!(out.points[1], pc.points[1]);
    assert_eq!(fps_oracle(&pc.points, 2, 0), vec![0, 1]);
}

#[test]
fn fps_pads_small_clouds_with_seeded_resamples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pc = random_cloud(&mut rng, 10, 1.0);
    let a = fps_downsample(&pc, 25, 0, 7).unwrap();
    assert_eq!(a.len(), 25);
    assert_eq!(&a.points[..10], &pc.points[..]);
    assert!(a.points[10..].iter().all(|p| pc.points.contains(p)));
    assert_eq!(a, fps_downsample(&pc, 25, 0, 7).unwrap());
    assert!(fps_downsample(&PointCloud::default(), 4, 0, 0).is_err());
    assert!(fps_downsample(&pc, 0, 0, 0).is_err());
}

#[test]
fn actions_are_next_configurations() {
    let configs: Vec<_> = (0..5).map(|t| JointConfiguration(vec![t as f64, -(t as f64)])).collect();
    let aligned = AlignedTrajectory {
        diagnostics: vec![
            FrameDiagnostics {
                final_loss: 0.0,
                final_dcd: 0.0,
                final_penalty: 0.0,
                steps: 1,
                early_stopped: false,
                best_trace: vec![0.0],
            };
            5
        ],
        configs: configs.clone(),
    };
    let actions = generate_actions(&aligned);
    assert_eq!(&actions[..4], &configs[1..]);
    assert_eq!(actions[4], configs[4]);
}

#[test]
fn robot_samples_are_seeded_and_sized() {
    let h = three_finger_arm().unwrap();
    let q = h.embodiment.mid_configuration();
    let a = sample_robot_cloud(&h.embodiment, &q, 500, 11).unwrap();
    assert_eq!(a.len(), 500);
    assert_eq!(a.count_tag(PointTag::RobotAugmented), 500);
    assert_eq!(a, sample_robot_cloud(&h.embodiment, &q, 500, 11).unwrap());
    assert_ne!(a, sample_robot_cloud(&h.embodiment, &q, 500, 12).unwrap());
}

#[test]
fn synthesized_demonstration_has_fixed_size_frames() {
    let g = parallel_gripper_arm().unwrap();
    let h = three_finger_arm().unwrap();
    let traj = pinch_trajectory(12, 0.0);
    let demo = scene_demonstration(&g, &traj, 3, "scene").unwrap();
    let tpl_s = build_template(&g.embodiment, &g.pad_links, 16, 7, TemplateVariant::Standard).unwrap();
    let tpl_t = build_template(&h.embodiment, &h.pad_links, 16, 7, TemplateVariant::Standard).unwrap();
    let src = template_trajectory(&g.embodiment, &tpl_s, &traj).unwrap();
    let aligned = align_trajectory(
        &src,
        &h.embodiment,
        &tpl_t,
        &three_finger_start(&traj[0]),
        &AlignmentConfig::default(),
    )
    .unwrap();
    let cfg = SynthConfig {
        seed: 42,
        ..SynthConfig::new(h.workspace)
    };
    let out = synthesize_demonstration("demo", &demo, &g.embodiment, &h.embodiment, &aligned, &cfg, None).unwrap();
    assert_eq!(out.len(), 12);
    assert_eq!(out.embodiment, h.embodiment.name);
    let actions = generate_actions(&aligned);
    for (t, f) in out.frames.iter().enumerate() {
        assert_eq!(f.cloud.len(), 1024);
        assert!(f.cloud.count_tag(PointTag::RobotAugmented) > 0);
        assert_eq!(out.frame_seeds[t], frame_seed(42, "demo", t as u64));
        let (arm, ee) = h.embodiment.split(aligned.configs[t].as_slice());
        assert_eq!((&f.arm, &f.ee), (&arm, &ee));
        let (arm, ee) = h.embodiment.split(actions[t].as_slice());
        assert_eq!((&f.action_arm, &f.action_ee), (&arm, &ee));
        // Scene points survive only from inside the workspace.
        for i in 0..f.cloud.len() {
            if f.cloud.tag(i) == PointTag::Scene {
                assert!(h.workspace.contains(&f.cloud.points[i]));
            }
        }
    }
    let again = synthesize_demonstration("demo", &demo, &g.embodiment, &h.embodiment, &aligned, &cfg, None).unwrap();
    assert_eq!(out, again);
    let other = synthesize_demonstration("demo2", &demo, &g.embodiment, &h.embodiment, &aligned, &cfg, None).unwrap();
    assert_ne!(out.frames[0].cloud, other.frames[0].cloud);
}

#[test]
fn other_output_sizes_are_honoured() {
    let g = parallel_gripper_arm().unwrap();
    let traj = recorded_trajectory(2);
    let demo = scene_demonstration(&g, &traj, 1, "scene").unwrap();
    for n in [1, 64, 3000] {
        let cfg = SynthConfig {
            output_size: n,
            ..SynthConfig::new(g.workspace)
        };
        let pc = synthesize_observation(&demo.frames[0].cloud, &g.embodiment, &traj[0], &g.embodiment, &traj[0], &cfg).unwrap();
        assert_eq!(pc.len(), n);
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let g = parallel_gripper_arm().unwrap();
    let q = &recorded_trajectory(1)[0];
    let pc = PointCloud::new(vec![Point3::origin()]);
    for cfg in [
        SynthConfig {
            tau: 0.0,
            ..SynthConfig::new(g.workspace)
        },
        SynthConfig {
            output_size: 0,
            ..SynthConfig::new(g.workspace)
        },
        SynthConfig {
            robot_samples: 0,
            ..SynthConfig::new(g.workspace)
        },
        SynthConfig {
            workspace: Aabb {
                min: [0.0; 3],
                max: [0.0; 3],
            },
            ..SynthConfig::new(g.workspace)
        },
    ] {
        assert!(synthesize_observation(&pc, &g.embodiment, q, &g.embodiment, q, &cfg).is_err());
    }
}

fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
    (0..200usize, any::<u64>()).prop_map(|(n, s)| random_cloud(&mut ChaCha8Rng::seed_from_u64(s), n, 0.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn larger_tau_masks_a_superset(pc in cloud_strategy(), seed in any::<u64>(), a in 0.001..0.03f64, b in 0.001..0.03f64) {
        let robot = random_cloud(&mut ChaCha8Rng::seed_from_u64(seed), 50, 0.1);
        let (small, large) = (a.min(b), a.max(b));
        let kept_small = mask_robot_points(&pc, &robot, small).unwrap();
        let kept_large = mask_robot_points(&pc, &robot, large).unwrap();
        prop_assert!(kept_large.points.iter().all(|p| kept_small.points.contains(p)));
    }

    #[test]
    fn crop_keeps_exactly_the_inside_points(pc in cloud_strategy(), lo in -0.1..0.0f64, hi in 0.0..0.1f64) {
        let b = Aabb::new([lo; 3], [hi; 3]).unwrap();
        let out = crop_workspace(&pc, &b);
        let expected: Vec<_> = pc.points.iter().filter(|p| (0..3).all(|k| p[k] >= lo && p[k] <= hi)).copied().collect();
        prop_assert_eq!(out.points, expected);
    }

    #[test]
    fn fps_output_is_a_subset_without_repeats(pc in cloud_strategy(), n in 1..100usize) {
        prop_assume!(pc.len() > n);
        let out = fps_downsample(&pc, n, 0, 0).unwrap();
        prop_assert_eq!(out.len(), n);
        for (i, p) in out.points.iter().enumerate() {
            prop_assert!(pc.points.contains(p));
            prop_assert!(!out.points[..i].contains(p));
        }
    }
}

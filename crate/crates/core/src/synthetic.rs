//! Procedural fixtures: a 6R arm with a parallel gripper, the same arm with a
//! three-finger hand, a 7-dof arm with a 12-dof hand (URDF), pinch and
//! free-motion trajectories, and scene clouds seen by a simulated camera.

use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Pose, PoseDoc};
use crate::kinematics::forward_kinematics;
use crate::robot::mesh::{rng_from_seed, sample_triangles, Triangle};
use crate::robot::{
    parse_robot_description, to_native_json, DescriptionFormat, Embodiment, EmbodimentManifest, Geometry, JointConfiguration,
    JointKind, JointSpec, LinkSpec, Shape, TriMesh,
};
use crate::seed::{frame_seed, substream};
use crate::synth::{sample_robot_cloud, DemoFrame, Demonstration, PointCloud};

/// An embodiment plus the manifest data the pipeline needs.
#[derive(Clone, Debug)]
pub struct FixtureRobot {
    pub embodiment: Embodiment,
    pub arm_joints: Vec<String>,
    pub ee_joints: Vec<String>,
    pub pad_links: Vec<String>,
    pub workspace: Aabb,
}

impl FixtureRobot {
    fn new(embodiment: Embodiment, ee_joints: &[&str], pad_links: &[&str]) -> Result<Self> {
        let mut embodiment = embodiment;
        let names: Vec<String> = embodiment.dof_names().into_iter().map(String::from).collect();
        let ee: Vec<String> = ee_joints.iter().map(|s| s.to_string()).collect();
        let arm: Vec<String> = names.iter().filter(|n| !ee.contains(n)).cloned().collect();
        embodiment.set_partition(&arm, &ee)?;
        Ok(FixtureRobot {
            embodiment,
            arm_joints: arm,
            ee_joints: ee,
            pad_links: pad_links.iter().map(|s| s.to_string()).collect(),
            workspace: WORKSPACE,
        })
    }

    pub fn manifest(&self, description: impl Into<PathBuf>) -> EmbodimentManifest {
        EmbodimentManifest {
            description: description.into(),
            format: None,
            arm_joints: self.arm_joints.clone(),
            ee_joints: self.ee_joints.clone(),
            pad_links: self.pad_links.clone(),
            workspace: self.workspace,
            base: PoseDoc::from_pose(&self.embodiment.base),
        }
    }

    /// Write `<stem>.robot.json` and `<stem>.embodiment.json` into `dir` and
    /// return the manifest path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let desc = format!("{stem}.robot.json");
        let desc_path = dir.join(&desc);
        std::fs::write(&desc_path, to_native_json(&self.embodiment)).map_err(|e| Error::io(&desc_path, e))?;
        let path = dir.join(format!("{stem}.embodiment.json"));
        let text = serde_json::to_string_pretty(&self.manifest(desc))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Tabletop region around the pinch object, shared by every fixture robot.
pub const WORKSPACE: Aabb = Aabb {
    min: [0.25, -0.35, 0.38],
    max: [0.85, 0.35, 0.9],
};

/// Height of the table surface in the fixture scenes.
pub const TABLE_Z: f64 = 0.39;

fn pose(x: f64, y: f64, z: f64) -> Pose {
    Pose::translation(x, y, z)
}

fn boxed(name: &str, half: [f64; 3], at: [f64; 3]) -> LinkSpec {
    LinkSpec::new(name).with_geometry(Geometry {
        shape: Shape::Box {
            half_extents: Vector3::from(half),
        },
        origin: pose(at[0], at[1], at[2]),
    })
}

/// Single-sided rectangle in the plane `y = 0` spanning `x ∈ ±hx`,
/// `z ∈ [z0, z1]`, facing `+y` when `facing > 0`.
fn pad(name: &str, hx: f64, z0: f64, z1: f64, facing: f64) -> LinkSpec {
    let vertices = vec![
        Point3::new(-hx, 0.0, z0),
        Point3::new(hx, 0.0, z0),
        Point3::new(hx, 0.0, z1),
        Point3::new(-hx, 0.0, z1),
    ];
    // (v1 − v0) × (v2 − v0) = +x × +z = −y.
    let faces = if facing > 0.0 {
        vec![[0, 2, 1], [0, 3, 2]]
    } else {
        vec![[0, 1, 2], [0, 2, 3]]
    };
    LinkSpec::new(name).with_geometry(Geometry {
        shape: Shape::Mesh(TriMesh { vertices, faces }),
        origin: Pose::identity(),
    })
}

fn joint(name: &str, kind: JointKind, parent: &str, child: &str, origin: Pose, axis: Vector3<f64>, lim: (f64, f64)) -> JointSpec {
    JointSpec {
        name: name.into(),
        kind,
        parent: parent.into(),
        child: child.into(),
        axis,
        origin,
        lower: lim.0,
        upper: lim.1,
    }
}

fn fixed(name: &str, parent: &str, child: &str, origin: Pose) -> JointSpec {
    joint(name, JointKind::Fixed, parent, child, origin, Vector3::x(), (0.0, 0.0))
}

/// 6R arm (z, y, y, z, y, z) ending in a `hand` link whose approach axis is
/// its local `+z`.
fn arm6() -> (Vec<LinkSpec>, Vec<JointSpec>) {
    use JointKind::Revolute;
    let pi = std::f64::consts::PI;
    let links = vec![
        boxed("base", [0.05, 0.05, 0.05], [0.0, 0.0, 0.05]),
        boxed("link1", [0.03, 0.03, 0.1], [0.0, 0.0, 0.1]),
        boxed("link2", [0.025, 0.025, 0.175], [0.0, 0.0, 0.175]),
        boxed("link3", [0.02, 0.02, 0.15], [0.0, 0.0, 0.15]),
        boxed("link4", [0.02, 0.02, 0.025], [0.0, 0.0, 0.025]),
        boxed("link5", [0.02, 0.02, 0.025], [0.0, 0.0, 0.025]),
        boxed("link6", [0.02, 0.02, 0.01], [0.0, 0.0, 0.01]),
        boxed("hand", [0.015, 0.04, 0.015], [0.0, 0.0, 0.015]),
    ];
    let joints = vec![
        joint("j1", Revolute, "base", "link1", pose(0.0, 0.0, 0.1), Vector3::z(), (-pi, pi)),
        joint(
            "j2",
            Revolute,
            "link1",
            "link2",
            pose(0.0, 0.0, 0.2),
            Vector3::y(),
            (-1.8, 1.8),
        ),
        joint(
            "j3",
            Revolute,
            "link2",
            "link3",
            pose(0.0, 0.0, 0.35),
            Vector3::y(),
            (-2.6, 2.6),
        ),
        joint("j4", Revolute, "link3", "link4", pose(0.0, 0.0, 0.3), Vector3::z(), (-pi, pi)),
        joint(
            "j5",
            Revolute,
            "link4",
            "link5",
            pose(0.0, 0.0, 0.05),
            Vector3::y(),
            (-2.2, 2.2),
        ),
        joint(
            "j6",
            Revolute,
            "link5",
            "link6",
            pose(0.0, 0.0, 0.05),
            Vector3::z(),
            (-pi, pi),
        ),
        fixed("flange", "link6", "hand", pose(0.0, 0.0, 0.02)),
    ];
    (links, joints)
}

pub const GRIPPER_PADS: [&str; 2] = ["pad_fixed", "pad_moving"];

/// 6R arm with a parallel gripper: one fixed finger pad facing `+y` and one
/// prismatic finger pad facing `−y`; pad separation is `0.008 + q`.
pub fn parallel_gripper_arm() -> Result<FixtureRobot> {
    let (mut links, mut joints) = arm6();
    links.extend([
        pad("pad_fixed", 0.01, 0.06, 0.08, 1.0),
        boxed("finger_fixed", [0.01, 0.004, 0.025], [0.0, -0.004, 0.055]),
        pad("pad_moving", 0.01, 0.06, 0.08, -1.0),
        boxed("finger_moving", [0.01, 0.004, 0.025], [0.0, 0.004, 0.055]),
    ]);
    joints.extend([
        fixed("pad_fixed_mount", "hand", "pad_fixed", pose(0.0, -0.004, 0.0)),
        fixed("finger_fixed_mount", "pad_fixed", "finger_fixed", Pose::identity()),
        joint(
            "slide",
            JointKind::Prismatic,
            "hand",
            "pad_moving",
            pose(0.0, 0.004, 0.0),
            Vector3::y(),
            (0.0, 0.08),
        ),
        fixed("finger_moving_mount", "pad_moving", "finger_moving", Pose::identity()),
    ]);
    FixtureRobot::new(Embodiment::new("arm6-gripper", links, joints)?, &["slide"], &GRIPPER_PADS)
}

pub const HAND_PADS: [&str; 3] = ["thumb_pad", "index_pad", "middle_pad"];

/// The same 6R arm with a three-finger hand: a thumb on the `−y` side facing
/// `+y`, two fingers on the `+y` side facing `−y`. Each digit has a proximal
/// and a distal joint flexing toward the palm centre.
pub fn three_finger_arm() -> Result<FixtureRobot> {
    use JointKind::Revolute;
    let (mut links, mut joints) = arm6();
    let lim = (-0.6, 1.6);
    // (name, x, y, flex axis, pad facing, pad half width)
    let digits = [
        ("thumb", 0.0, -0.03, -Vector3::x(), 1.0, 0.008),
        ("index", 0.006, 0.03, Vector3::x(), -1.0, 0.004),
        ("middle", -0.006, 0.03, Vector3::x(), -1.0, 0.004),
    ];
    let mut ee = Vec::new();
    for (name, x, y, axis, facing, hx) in digits {
        let prox = format!("{name}_proximal");
        let body = format!("{name}_distal");
        let padl = format!("{name}_pad");
        links.push(boxed(&prox, [0.004, 0.006, 0.0125], [0.0, 0.0, 0.0125]));
        links.push(pad(&padl, hx, 0.005, 0.025, facing));
        links.push(boxed(&body, [hx, 0.004, 0.0125], [0.0, -facing * 0.004, 0.015]));
        joints.push(joint(
            &format!("{name}_flex"),
            Revolute,
            "hand",
            &prox,
            pose(x, y, 0.03),
            axis,
            lim,
        ));
        joints.push(joint(
            &format!("{name}_curl"),
            Revolute,
            &prox,
            &padl,
            pose(0.0, facing * 0.006, 0.025),
            axis,
            lim,
        ));
        joints.push(fixed(&format!("{name}_body"), &padl, &body, Pose::identity()));
        ee.push(format!("{name}_flex"));
        ee.push(format!("{name}_curl"));
    }
    let ee: Vec<&str> = ee.iter().map(String::as_str).collect();
    FixtureRobot::new(Embodiment::new("arm6-three-finger", links, joints)?, &ee, &HAND_PADS)
}

/// URDF for a 7-dof arm carrying a four-finger, 12-dof hand. Pads are thin
/// boxes on each distal link.
pub fn arm7_hand12_urdf() -> String {
    let mut s = String::from("<?xml version=\"1.0\"?>\n<robot name=\"arm7-hand12\">\n");
    let link = |s: &mut String, name: &str, size: [f64; 3], z: f64| {
        s.push_str(&format!(
            "  <link name=\"{name}\">\n    <visual>\n      <origin xyz=\"0 0 {z}\"/>\n      <geometry><box size=\"{} {} {}\"/></geometry>\n    </visual>\n  </link>\n",
            size[0], size[1], size[2]
        ));
    };
    let joint = |s: &mut String, name: &str, parent: &str, child: &str, xyz: [f64; 3], axis: &str, lim: (f64, f64)| {
        s.push_str(&format!(
            "  <joint name=\"{name}\" type=\"revolute\">\n    <parent link=\"{parent}\"/>\n    <child link=\"{child}\"/>\n    <origin xyz=\"{} {} {}\" rpy=\"0 0 0\"/>\n    <axis xyz=\"{axis}\"/>\n    <limit lower=\"{}\" upper=\"{}\" effort=\"10\" velocity=\"1\"/>\n  </joint>\n",
            xyz[0], xyz[1], xyz[2], lim.0, lim.1
        ));
    };
    link(&mut s, "base", [0.1, 0.1, 0.1], 0.05);
    let axes = ["0 0 1", "0 1 0", "0 0 1", "0 -1 0", "0 0 1", "0 -1 0", "0 0 1"];
    let lengths: [f64; 7] = [0.33, 0.0, 0.316, 0.0, 0.384, 0.0, 0.1];
    let mut parent = "base".to_string();
    for (i, axis) in axes.iter().enumerate() {
        let child = format!("arm_link{}", i + 1);
        link(&mut s, &child, [0.06, 0.06, lengths[i].max(0.06)], lengths[i] / 2.0);
        let z = if i == 0 { 0.1 } else { lengths[i - 1] };
        joint(
            &mut s,
            &format!("arm_j{}", i + 1),
            &parent,
            &child,
            [0.0, 0.0, z],
            axis,
            (-2.8, 2.8),
        );
        parent = child;
    }
    link(&mut s, "palm", [0.09, 0.02, 0.1], 0.05);
    s.push_str(
        "  <joint name=\"wrist_mount\" type=\"fixed\">\n    <parent link=\"arm_link7\"/>\n    <child link=\"palm\"/>\n    <origin xyz=\"0 0 0.1\"/>\n  </joint>\n",
    );
    let fingers = [
        ("thumb", 0.03, -0.02),
        ("index", 0.03, 0.02),
        ("middle", 0.0, 0.02),
        ("ring", -0.03, 0.02),
    ];
    for (name, x, y) in fingers {
        let mut parent = "palm".to_string();
        for (k, seg) in ["base", "middle", "distal"].iter().enumerate() {
            let child = format!("{name}_{seg}");
            link(&mut s, &child, [0.018, 0.018, 0.03], 0.015);
            let xyz = if k == 0 { [x, y, 0.1] } else { [0.0, 0.0, 0.03] };
            let axis = if y < 0.0 { "-1 0 0" } else { "1 0 0" };
            joint(&mut s, &format!("{name}_j{}", k + 1), &parent, &child, xyz, axis, (-0.3, 1.6));
            parent = child;
        }
        let padl = format!("{name}_pad");
        link(&mut s, &padl, [0.016, 0.002, 0.02], 0.0);
        s.push_str(&format!(
            "  <joint name=\"{name}_pad_mount\" type=\"fixed\">\n    <parent link=\"{parent}\"/>\n    <child link=\"{padl}\"/>\n    <origin xyz=\"0 {} 0.02\"/>\n  </joint>\n",
            if y < 0.0 { 0.01 } else { -0.01 }
        ));
    }
    s.push_str("</robot>\n");
    s
}

pub fn arm7_hand12() -> Result<FixtureRobot> {
    let e = parse_robot_description(&arm7_hand12_urdf(), DescriptionFormat::Urdf, None)?;
    let ee: Vec<String> = e
        .dof_names()
        .into_iter()
        .filter(|n| !n.starts_with("arm_"))
        .map(String::from)
        .collect();
    let ee: Vec<&str> = ee.iter().map(String::as_str).collect();
    FixtureRobot::new(e, &ee, &["thumb_pad", "index_pad", "middle_pad", "ring_pad"])
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect()
}

/// Arm configuration holding the hand straight down above the object.
pub const GRASP_ARM: [f64; 6] = [0.0, 0.5, 1.2, 0.0, 1.44, 0.0];
const START_ARM: [f64; 6] = [-0.35, 0.25, 1.2, 0.15, 1.5, -0.2];
const LIFT_ARM: [f64; 6] = [0.2, 0.3, 1.1, 0.1, 1.5, 0.15];
pub const GRIPPER_OPEN: f64 = 0.07;
/// Finger travel that closes the gripper on the 3 cm object.
pub const GRIPPER_CLOSED: f64 = 0.022;

/// Phase boundaries of a pinch trajectory: approach, close, hold, lift.
pub fn pinch_phases(len: usize) -> [usize; 3] {
    [len / 3, len / 2, (2 * len) / 3]
}

/// Grasp-phase frames: gripper closed and stationary on the object.
pub fn grasp_frames(len: usize) -> std::ops::Range<usize> {
    let [_, hold, lift] = pinch_phases(len);
    hold..lift
}

/// Gripper pinch: approach with the gripper open, close on the object, hold,
/// lift. `variant` rotates the whole motion about the base by a small angle.
pub fn pinch_trajectory(len: usize, variant: f64) -> Vec<JointConfiguration> {
    let [close, hold, lift] = pinch_phases(len);
    let shift = |a: [f64; 6]| {
        let mut v = a.to_vec();
        v[0] += variant;
        v
    };
    let (start, grasp, end) = (shift(START_ARM), shift(GRASP_ARM), shift(LIFT_ARM));
    (0..len)
        .map(|t| {
            let (arm, grip) = if t < close {
                (lerp(&start, &grasp, smoothstep(t as f64 / close.max(1) as f64)), GRIPPER_OPEN)
            } else if t < hold {
                let s = smoothstep((t - close + 1) as f64 / (hold - close) as f64);
                (grasp.clone(), GRIPPER_OPEN + (GRIPPER_CLOSED - GRIPPER_OPEN) * s)
            } else if t < lift {
                (grasp.clone(), GRIPPER_CLOSED)
            } else {
                let s = smoothstep((t - lift + 1) as f64 / (len - lift) as f64);
                (lerp(&grasp, &end, s), GRIPPER_CLOSED)
            };
            let mut q = arm;
            q.push(grip);
            JointConfiguration(q)
        })
        .collect()
}

/// Smooth free-space motion of the gripper arm away from wrist singularities,
/// with the gripper opening and closing.
pub fn recorded_trajectory(len: usize) -> Vec<JointConfiguration> {
    (0..len)
        .map(|t| {
            let s = t as f64 / len.max(2).saturating_sub(1) as f64;
            let w = std::f64::consts::TAU * s;
            JointConfiguration(vec![
                -0.3 + 0.6 * s,
                0.4 + 0.15 * w.sin(),
                1.1 + 0.2 * (0.5 * w).sin(),
                0.2 * w.cos(),
                1.3 + 0.2 * w.sin(),
                -0.25 + 0.5 * s,
                0.03 + 0.02 * (1.5 * w).sin(),
            ])
        })
        .collect()
}

/// Initial target configuration for the three-finger arm copying the
/// gripper arm's joints, digits straight.
pub fn three_finger_start(gripper_q: &JointConfiguration) -> JointConfiguration {
    let mut q = gripper_q.0[..6].to_vec();
    q.extend([0.0; 6]);
    JointConfiguration(q)
}

fn box_triangles(center: Point3<f64>, half: Vector3<f64>) -> Vec<Triangle> {
    let g = Geometry {
        shape: Shape::Box { half_extents: half },
        origin: Pose::translation(center.x, center.y, center.z),
    };
    g.triangles()
}

/// Pose of the gripper's pad midpoint frame at `q`.
fn grasp_frame(e: &Embodiment, q: &JointConfiguration) -> Result<Pose> {
    let poses = forward_kinematics(e, q)?;
    let hand = e.link_index("hand").ok_or_else(|| Error::Unknown {
        kind: "link",
        name: "hand".into(),
    })?;
    Ok(poses.links[hand] * Pose::translation(0.0, 0.0, 0.07))
}

/// Camera-like scene clouds for a gripper trajectory: a table patch, a 3 cm
/// object that rides with the gripper once it closes, samples of the robot
/// itself, and a far wall outside the workspace.
pub fn scene_demonstration(
    robot: &FixtureRobot,
    traj: &[JointConfiguration],
    seed: u64,
    initial_state: &str,
) -> Result<Demonstration> {
    let e = &robot.embodiment;
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let [_, hold, _] = pinch_phases(traj.len());
    let grasp_t = hold.min(traj.len() - 1);
    let grasp = grasp_frame(e, &traj[grasp_t])?;
    let center0 = grasp.translation.vector;
    let half = Vector3::new(0.012, 0.015, 0.03);
    let object_at_rest = Point3::new(center0.x, center0.y, TABLE_Z + half.z);
    let object_tris = box_triangles(Point3::origin(), half);
    let frames = traj
        .iter()
        .enumerate()
        .map(|(t, q)| {
            let s = frame_seed(seed, initial_state, t as u64);
            let mut rng = rng_from_seed(substream(s, 0));
            let mut points = Vec::new();
            use rand::Rng;
            for _ in 0..900 {
                let x = 0.3 + 0.5 * rng.random::<f64>();
                let y = -0.3 + 0.6 * rng.random::<f64>();
                points.push(Point3::new(x, y, TABLE_Z));
            }
            let object_pose = if t >= grasp_t {
                let lift = grasp_frame(e, q)? * grasp.inverse();
                lift * Pose::translation(object_at_rest.x, object_at_rest.y, object_at_rest.z)
            } else {
                Pose::translation(object_at_rest.x, object_at_rest.y, object_at_rest.z)
            };
            for smp in sample_triangles(&object_tris, 300, &mut rng)? {
                points.push(object_pose * smp.point);
            }
            points.extend(sample_robot_cloud(e, q, 1200, substream(s, 1))?.points);
            for _ in 0..150 {
                points.push(Point3::new(1.5, -0.5 + rng.random::<f64>(), rng.random::<f64>()));
            }
            let (arm, ee) = e.split(q.as_slice());
            let next = &traj[(t + 1).min(traj.len() - 1)];
            let (action_arm, action_ee) = e.split(next.as_slice());
            Ok(DemoFrame {
                cloud: PointCloud::new(points),
                arm,
                ee,
                action_arm,
                action_ee,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let demo = Demonstration {
        embodiment: e.name.clone(),
        arm_dof: e.arm_indices().len(),
        ee_dof: e.ee_indices().len(),
        initial_state: initial_state.to_string(),
        seed,
        frame_seeds: Vec::new(),
        frames,
    };
    demo.check()?;
    Ok(demo)
}

/// Object box at rest for the pinch fixture, for scene augmentation.
pub fn object_box(robot: &FixtureRobot, traj: &[JointConfiguration]) -> Result<Aabb> {
    let [_, hold, _] = pinch_phases(traj.len());
    let c = grasp_frame(&robot.embodiment, &traj[hold.min(traj.len() - 1)])?
        .translation
        .vector;
    Aabb::new(
        [c.x - 0.03, c.y - 0.03, TABLE_Z + 0.001],
        [c.x + 0.03, c.y + 0.03, TABLE_Z + 0.09],
    )
}

//! Forward kinematics, world-frame evaluation of link-attached point/direction
//! sets, and the analytic reverse-mode pullback to joint space.
//!
//! The pullback uses the screw form of each joint's derivative: for a revolute
//! joint with world axis `a` through `o`, a point `p` downstream moves with
//! `a × (p − o)` and a direction `n` with `a × n`; for a prismatic joint a point
//! moves with `a` and directions are unaffected.

use nalgebra::{Point3, Rotation3, Translation3, Unit, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::funcrep::WorldFuncRep;
use crate::geom::Pose;
use crate::robot::{Embodiment, JointConfiguration, JointKind};

/// World poses of every tree link and of every joint frame (the frame the
/// joint moves in, before its own motion is applied).
#[derive(Clone, Debug, PartialEq)]
pub struct LinkPoseSet {
    pub links: Vec<Pose>,
    pub joint_frames: Vec<Pose>,
}

/// Link-local points and unit normals, each tagged with its link index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalPointSet {
    pub links: Vec<usize>,
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
}

impl LocalPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// ∂L/∂p and ∂L/∂n for each entry of a world-frame set.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCotangent {
    pub points: Vec<Vector3<f64>>,
    pub directions: Vec<Vector3<f64>>,
}

impl GradientCotangent {
    pub fn zeros(n: usize) -> Self {
        GradientCotangent {
            points: vec![Vector3::zeros(); n],
            directions: vec![Vector3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn joint_motion(kind: JointKind, axis: &Vector3<f64>, value: f64) -> Pose {
    match kind {
        JointKind::Fixed => Pose::identity(),
        JointKind::Revolute => Pose::from_parts(
            Translation3::identity(),
            Rotation3::from_axis_angle(&Unit::new_normalize(*axis), value),
        ),
        JointKind::Prismatic => Pose::from_parts(Translation3::from(axis.normalize() * value), Rotation3::identity()),
    }
}

pub fn forward_kinematics(e: &Embodiment, q: &JointConfiguration) -> Result<LinkPoseSet> {
    if q.len() != e.dof() {
        return Err(Error::Dimension {
            what: "joint configuration",
            expected: e.dof(),
            got: q.len(),
        });
    }
    let n_links = e.tree_links().len();
    let mut links = vec![Pose::identity(); n_links];
    let mut joint_frames = Vec::with_capacity(e.joints.len());
    links[0] = e.base;
    // Joints are in preorder: the parent link pose is always ready.
    for (ji, j) in e.joints.iter().enumerate() {
        let frame = links[e.joint_parent_link(ji)] * j.origin;
        let value = e.joint_dof(ji).map(|d| q.0[d]).unwrap_or(0.0);
        links[e.joint_child_link(ji)] = frame * joint_motion(j.kind, &j.axis, value);
        joint_frames.push(frame);
    }
    Ok(LinkPoseSet { links, joint_frames })
}

/// Forward kinematics for many configurations; output order matches input.
pub fn forward_kinematics_batch(e: &Embodiment, qs: &[JointConfiguration]) -> Result<Vec<LinkPoseSet>> {
    qs.par_iter().map(|q| forward_kinematics(e, q)).collect()
}

fn check_links(e: &Embodiment, local: &LocalPointSet) -> Result<()> {
    let n = e.tree_links().len();
    if local.points.len() != local.links.len() || local.normals.len() != local.links.len() {
        return Err(Error::Dimension {
            what: "local point set",
            expected: local.links.len(),
            got: local.points.len().min(local.normals.len()),
        });
    }
    if let Some(&bad) = local.links.iter().find(|&&l| l >= n) {
        return Err(Error::Unknown {
            kind: "link id",
            name: bad.to_string(),
        });
    }
    Ok(())
}

pub fn world_set_from_poses(poses: &LinkPoseSet, local: &LocalPointSet) -> WorldFuncRep {
    let mut points = Vec::with_capacity(local.len());
    let mut directions = Vec::with_capacity(local.len());
    for ((&l, p), n) in local.links.iter().zip(&local.points).zip(&local.normals) {
        let pose = &poses.links[l];
        points.push(pose * p);
        directions.push(pose.rotation * n);
    }
    WorldFuncRep { points, directions }
}

pub fn evaluate_world_set(e: &Embodiment, q: &JointConfiguration, local: &LocalPointSet) -> Result<WorldFuncRep> {
    check_links(e, local)?;
    let poses = forward_kinematics(e, q)?;
    Ok(world_set_from_poses(&poses, local))
}

pub fn evaluate_world_set_batch(e: &Embodiment, qs: &[JointConfiguration], local: &LocalPointSet) -> Result<Vec<WorldFuncRep>> {
    check_links(e, local)?;
    qs.par_iter()
        .map(|q| forward_kinematics(e, q).map(|p| world_set_from_poses(&p, local)))
        .collect()
}

/// dL/dq for L depending on the evaluated world set through `cotangent`.
pub fn pullback_to_joints(
    e: &Embodiment,
    q: &JointConfiguration,
    local: &LocalPointSet,
    cotangent: &GradientCotangent,
) -> Result<Vec<f64>> {
    check_links(e, local)?;
    if cotangent.points.len() != local.len() || cotangent.directions.len() != local.len() {
        return Err(Error::Dimension {
            what: "cotangent",
            expected: local.len(),
            got: cotangent.points.len().min(cotangent.directions.len()),
        });
    }
    let poses = forward_kinematics(e, q)?;
    Ok(pullback_with_poses(e, &poses, local, cotangent))
}

pub(crate) fn pullback_with_poses(
    e: &Embodiment,
    poses: &LinkPoseSet,
    local: &LocalPointSet,
    cotangent: &GradientCotangent,
) -> Vec<f64> {
    let dofs = e.dof_joints();
    // World axis and anchor of each actuated joint.
    let screws: Vec<(JointKind, Vector3<f64>, Vector3<f64>)> = dofs
        .iter()
        .map(|&ji| {
            let j = &e.joints[ji];
            let frame = &poses.joint_frames[ji];
            (j.kind, frame.rotation * j.axis.normalize(), frame.translation.vector)
        })
        .collect();
    let mut grad = vec![0.0; dofs.len()];
    for (k, &l) in local.links.iter().enumerate() {
        let pose = &poses.links[l];
        let p = pose * local.points[k];
        let n = pose.rotation * local.normals[k];
        let gp = &cotangent.points[k];
        let gn = &cotangent.directions[k];
        for &d in e.link_chain(l) {
            let (kind, a, o) = &screws[d];
            grad[d] += match kind {
                JointKind::Revolute => gp.dot(&a.cross(&(p.coords - o))) + gn.dot(&a.cross(&n)),
                JointKind::Prismatic => gp.dot(a),
                JointKind::Fixed => 0.0,
            };
        }
    }
    grad
}

/// Per-entry joint Jacobians of a world-frame set: column `d` of entry `k` is
/// `∂p_k/∂q_d` (resp. `∂n_k/∂q_d`), stored row-major as `k * dof + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryJacobians {
    pub dof: usize,
    pub points: Vec<Vector3<f64>>,
    pub directions: Vec<Vector3<f64>>,
}

pub fn entry_jacobians(e: &Embodiment, poses: &LinkPoseSet, local: &LocalPointSet) -> EntryJacobians {
    let dofs = e.dof_joints();
    let n = dofs.len();
    let mut points = vec![Vector3::zeros(); local.len() * n];
    let mut directions = vec![Vector3::zeros(); local.len() * n];
    for (k, &l) in local.links.iter().enumerate() {
        let pose = &poses.links[l];
        let p = pose * local.points[k];
        let nk = pose.rotation * local.normals[k];
        for &d in e.link_chain(l) {
            let j = &e.joints[dofs[d]];
            let frame = &poses.joint_frames[dofs[d]];
            let a = frame.rotation * j.axis.normalize();
            match j.kind {
                JointKind::Revolute => {
                    points[k * n + d] = a.cross(&(p.coords - frame.translation.vector));
                    directions[k * n + d] = a.cross(&nk);
                }
                JointKind::Prismatic => points[k * n + d] = a,
                JointKind::Fixed => {}
            }
        }
    }
    EntryJacobians {
        dof: n,
        points,
        directions,
    }
}

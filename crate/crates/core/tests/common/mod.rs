//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use cei_core::align::{AlignmentConfig, FrameDiagnostics};
use cei_core::funcrep::WorldFuncRep;
use cei_core::geom::pose_from_xyz_rpy;
use cei_core::robot::{Embodiment, JointKind, JointSpec, LinkSpec};
use nalgebra::{Matrix3, Matrix4, Point3, Vector3, Vector4};
use rand::seq::SliceRandom;
use rand::Rng;

/// A joint as the generator drew it, before the model reorders anything.
#[derive(Clone, Debug)]
pub struct DrawnJoint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
    pub axis: [f64; 3],
    pub lower: f64,
    pub upper: f64,
}

pub fn link_name(i: usize) -> String {
    format!("l{i}")
}

/// Random tree of up to `max_joints` joints rooted at `l0`. Each new link
/// hangs off a random earlier link; specs reach the model shuffled.
pub fn random_tree<R: Rng>(rng: &mut R, max_joints: usize) -> (Embodiment, Vec<DrawnJoint>) {
    let n = rng.random_range(1..=max_joints);
    let kinds = [JointKind::Revolute, JointKind::Prismatic, JointKind::Fixed];
    let mut joints = Vec::with_capacity(n);
    for i in 1..=n {
        let parent = if rng.random_bool(0.7) { i - 1 } else { rng.random_range(0..i) };
        let axis = loop {
            let a = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            if a.iter().map(|v| v * v).sum::<f64>() > 0.05 {
                break a;
            }
        };
        joints.push(DrawnJoint {
            name: format!("j{i}"),
            kind: kinds[rng.random_range(0..3)],
            parent: link_name(parent),
            child: link_name(i),
            xyz: [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ],
            rpy: [
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.0..3.0),
            ],
            axis,
            lower: -1.5,
            upper: 1.5,
        });
    }
    let mut links: Vec<LinkSpec> = (0..=n).map(|i| LinkSpec::new(link_name(i))).collect();
    let mut specs: Vec<JointSpec> = joints
        .iter()
        .map(|j| JointSpec {
            name: j.name.clone(),
            kind: j.kind,
            parent: j.parent.clone(),
            child: j.child.clone(),
            axis: Vector3::from(j.axis),
            origin: pose_from_xyz_rpy(j.xyz, j.rpy),
            lower: j.lower,
            upper: j.upper,
        })
        .collect();
    links[1..].shuffle(rng);
    specs.shuffle(rng);
    (
        Embodiment::new("random", links, specs).expect("random tree assembles"),
        joints,
    )
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rodrigues rotation about a (not necessarily unit) axis.
fn rodrigues(axis: [f64; 3], angle: f64) -> Matrix3<f64> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (x, y, z) = (axis[0] / norm, axis[1] / norm, axis[2] / norm);
    let k = Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0);
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

fn homogeneous(r: Matrix3<f64>, t: [f64; 3]) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m[(0, 3)] = t[0];
    m[(1, 3)] = t[1];
    m[(2, 3)] = t[2];
    m
}

/// World transform of every link by composing 4×4 matrices along the drawn
/// joints. `values` maps joint name to position.
pub fn fk_oracle(joints: &[DrawnJoint], values: &HashMap<String, f64>) -> HashMap<String, Matrix4<f64>> {
    let mut out = HashMap::new();
    out.insert(link_name(0), Matrix4::identity());
    // Drawn joints are in creation order, so parents come first.
    for j in joints {
        let origin = homogeneous(rot_z(j.rpy[2]) * rot_y(j.rpy[1]) * rot_x(j.rpy[0]), j.xyz);
        let v = values.get(&j.name).copied().unwrap_or(0.0);
        let motion = match j.kind {
            JointKind::Fixed => Matrix4::identity(),
            JointKind::Revolute => homogeneous(rodrigues(j.axis, v), [0.0; 3]),
            JointKind::Prismatic => {
                let n = (j.axis[0] * j.axis[0] + j.axis[1] * j.axis[1] + j.axis[2] * j.axis[2]).sqrt();
                homogeneous(Matrix3::identity(), [j.axis[0] / n * v, j.axis[1] / n * v, j.axis[2] / n * v])
            }
        };
        let parent = out[&j.parent];
        out.insert(j.child.clone(), parent * origin * motion);
    }
    out
}

pub fn apply(m: &Matrix4<f64>, p: &Point3<f64>) -> Point3<f64> {
    let v = m * Vector4::new(p.x, p.y, p.z, 1.0);
    Point3::new(v.x, v.y, v.z)
}

/// Exhaustive double-loop directional chamfer distance (ε = 0).
pub fn dcd_oracle(x: &WorldFuncRep, y: &WorldFuncRep, lambda: f64) -> f64 {
    let one_way = |a: &WorldFuncRep, b: &WorldFuncRep| {
        let mut total = 0.0;
        for i in 0..a.points.len() {
            let mut best = f64::INFINITY;
            for j in 0..b.points.len() {
                let d = a.points[i] - b.points[j];
                let c = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt() - lambda * a.directions[i].dot(&b.directions[j]);
                best = best.min(c);
            }
            total += best;
        }
        total / a.points.len() as f64
    };
    one_way(x, y) + one_way(y, x)
}

/// Smallest gap between the best and second-best match over every term.
pub fn dcd_tie_margin(x: &WorldFuncRep, y: &WorldFuncRep, lambda: f64) -> f64 {
    let margin = |a: &WorldFuncRep, b: &WorldFuncRep| {
        let mut m = f64::INFINITY;
        for i in 0..a.points.len() {
            let mut costs: Vec<f64> = (0..b.points.len())
                .map(|j| (a.points[i] - b.points[j]).norm() - lambda * a.directions[i].dot(&b.directions[j]))
                .collect();
            costs.sort_by(f64::total_cmp);
            if costs.len() > 1 {
                m = m.min(costs[1] - costs[0]);
            }
        }
        m
    };
    margin(x, y).min(margin(y, x))
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_rep<R: Rng>(rng: &mut R, n: usize, spread: f64) -> WorldFuncRep {
    WorldFuncRep {
        points: (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                    rng.random_range(-spread..spread),
                )
            })
            .collect(),
        directions: (0..n).map(|_| random_unit(rng)).collect(),
    }
}

/// Quadratic greedy farthest point sampling: every round recomputes each
/// candidate's squared distance to the chosen set from scratch.
pub fn fps_oracle(points: &[Point3<f64>], n: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    while chosen.len() < n {
        let mut best = (-1.0, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            let d = chosen
                .iter()
                .map(|&c| (p - points[c]).norm_squared())
                .fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        chosen.push(best.1);
    }
    chosen
}

/// Central differences of `f` at `q`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, q: &[f64], h: f64) -> Vec<f64> {
    (0..q.len())
        .map(|k| {
            let mut a = q.to_vec();
            let mut b = q.to_vec();
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

/// Replay the stopping rule on a recorded best-loss trace and check it halted
/// exactly where the rule says.
pub fn check_stopping(d: &FrameDiagnostics, cfg: &AlignmentConfig) -> Result<(), String> {
    let t = &d.best_trace;
    if t.len() != d.steps {
        return Err(format!("trace has {} entries for {} steps", t.len(), d.steps));
    }
    if d.steps > cfg.max_steps {
        return Err(format!("{} steps exceed the cap {}", d.steps, cfg.max_steps));
    }
    let mut stall = 0;
    for i in 1..t.len() {
        if t[i] > t[i - 1] {
            return Err(format!("best loss rose at step {i}"));
        }
        if t[i] < t[i - 1] - cfg.improvement_tol {
            stall = 0;
        } else {
            stall += 1;
        }
        if stall >= cfg.patience && i + 1 < t.len() {
            return Err(format!("should have halted at step {i}"));
        }
    }
    let halted_by_patience = stall >= cfg.patience;
    let expect_early = halted_by_patience && d.steps < cfg.max_steps;
    if d.early_stopped != expect_early {
        return Err(format!("early-stop flag {} but rule says {expect_early}", d.early_stopped));
    }
    if !halted_by_patience && d.steps != cfg.max_steps {
        return Err(format!("stopped at {} without patience or cap", d.steps));
    }
    Ok(())
}

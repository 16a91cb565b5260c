//! Small geometric helpers shared across modules: poses, boxes and their
//! JSON encodings.

use nalgebra::{IsometryMatrix3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Pose = IsometryMatrix3<f64>;

/// Axis-aligned box, inclusive on every face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = Aabb { min, max };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.min[k] < self.max[k]) {
                return Err(Error::InvalidArgument(format!(
                    "box min must be below max on axis {k} ({} vs {})",
                    self.min[k], self.max[k]
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| self.min[k] <= p[k] && p[k] <= self.max[k])
    }
}

/// Pose encoding used by the JSON formats. Either `rpy` (fixed-axis
/// roll/pitch/yaw, URDF convention) or a row-major `rotation` matrix may be
/// given; `rotation` wins when both are present.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpy: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
}

impl PoseDoc {
    pub fn to_pose(&self) -> Pose {
        let rotation = match (&self.rotation, &self.rpy) {
            (Some(m), _) => Rotation3::from_matrix_unchecked(Matrix3::new(
                m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
            )),
            (None, Some(rpy)) => rpy_rotation(rpy[0], rpy[1], rpy[2]),
            (None, None) => Rotation3::identity(),
        };
        IsometryMatrix3::from_parts(Translation3::from(Vector3::from(self.xyz)), rotation)
    }

    /// Exact encoding: the rotation matrix is written verbatim so that a
    /// re-parse reproduces the same bits.
    pub fn from_pose(pose: &Pose) -> Self {
        let m = pose.rotation.matrix();
        let t = pose.translation.vector;
        PoseDoc {
            xyz: [t.x, t.y, t.z],
            rpy: None,
            rotation: Some([
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ]),
        }
    }
}

/// URDF `rpy`: R = Rz(yaw) * Ry(pitch) * Rx(roll).
pub fn rpy_rotation(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), roll)
}

pub fn pose_from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Pose {
    IsometryMatrix3::from_parts(Translation3::from(Vector3::from(xyz)), rpy_rotation(rpy[0], rpy[1], rpy[2]))
}

/// Largest deviation of `RᵀR` from identity, plus |det R − 1|.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    let e = (r.transpose() * r - Matrix3::identity()).abs().max();
    e.max((r.determinant() - 1.0).abs())
}

pub fn quaternion_xyzw(r: &Rotation3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(r);
    [q.i, q.j, q.k, q.w]
}

pub fn rotation_from_xyzw(q: [f64; 4]) -> Rotation3<f64> {
    let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]));
    uq.to_rotation_matrix()
}

//! Spatial augmentation: blend a functional-representation trajectory toward
//! a rigidly transformed copy with a clipped linear schedule, so that every
//! variant starts from the recorded initial state and ends displaced.

use std::path::Path;

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcrep::{FuncRepTrajectory, WorldFuncRep};
use crate::geom::{quaternion_xyzw, rotation_from_xyzw};
use crate::synth::PointCloud;

/// Rigid transform applied to object-side quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl SpatialTransform {
    pub fn identity() -> Self {
        SpatialTransform {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        SpatialTransform {
            rotation: Rotation3::identity(),
            translation: t,
        }
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_direction(&self, n: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * n
    }

    /// Partial transform at growth `g`: rotation angle and translation both
    /// scaled by `g` (rotation about the same fixed axis).
    pub fn interpolated(&self, g: f64) -> SpatialTransform {
        if g == 1.0 {
            return *self;
        }
        if g == 0.0 {
            return SpatialTransform::identity();
        }
        SpatialTransform {
            rotation: Rotation3::new(self.rotation.scaled_axis() * g),
            translation: self.translation * g,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSchedule {
    /// Fraction of the trajectory after which the blend saturates.
    pub knee: f64,
}

impl Default for AugmentationSchedule {
    fn default() -> Self {
        AugmentationSchedule { knee: 0.8 }
    }
}

/// `min(t / (knee · L), 1)`.
pub fn clipped_growth(t: usize, len: usize, knee: f64) -> Result<f64> {
    if len == 0 {
        return Err(Error::InvalidArgument("trajectory length must be positive".into()));
    }
    if !(knee > 0.0 && knee <= 1.0) {
        return Err(Error::InvalidArgument(format!("knee must lie in (0, 1], got {knee}")));
    }
    if t >= len {
        return Err(Error::InvalidArgument(format!(
            "frame {t} outside trajectory of length {len}"
        )));
    }
    Ok((t as f64 / (knee * len as f64)).min(1.0))
}

pub fn augment_rep_trajectory(
    traj: &FuncRepTrajectory,
    transform: &SpatialTransform,
    schedule: &AugmentationSchedule,
) -> Result<FuncRepTrajectory> {
    if traj.is_empty() {
        return Err(Error::Empty("functional representation trajectory"));
    }
    let len = traj.len();
    let mut frames = Vec::with_capacity(len);
    for (t, x) in traj.frames.iter().enumerate() {
        let g = clipped_growth(t, len, schedule.knee)?;
        let frame = if g == 0.0 {
            x.clone()
        } else if g == 1.0 {
            WorldFuncRep {
                points: x.points.iter().map(|p| transform.apply_point(p)).collect(),
                directions: x.directions.iter().map(|n| transform.apply_direction(n)).collect(),
            }
        } else {
            let mut points = Vec::with_capacity(x.len());
            let mut directions = Vec::with_capacity(x.len());
            for (i, (p, n)) in x.points.iter().zip(&x.directions).enumerate() {
                points.push(p + (transform.apply_point(p) - p) * g);
                let blended = n + (transform.apply_direction(n) - n) * g;
                let norm = blended.norm();
                if norm < 1e-6 {
                    return Err(Error::DegenerateDirection { frame: t, entry: i });
                }
                directions.push(blended / norm);
            }
            WorldFuncRep { points, directions }
        };
        frames.push(frame);
    }
    FuncRepTrajectory::new(frames)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridTransform {
    pub anchor_id: usize,
    /// Grid cell (x index, y index).
    pub grid: [usize; 2],
    pub transform: SpatialTransform,
}

/// `n × n` tabletop translations per anchor, offsets spanning
/// `[−range, range]` on x and y around the anchor.
pub fn grid_transforms(anchors: &[Vector3<f64>], n: usize, range: f64) -> Result<Vec<GridTransform>> {
    if n < 1 {
        return Err(Error::InvalidArgument("grid size must be at least 1".into()));
    }
    if !(range >= 0.0) {
        return Err(Error::InvalidArgument("grid range must be non-negative".into()));
    }
    let offset = |i: usize| {
        if n == 1 {
            0.0
        } else {
            let s = i as f64 / (n - 1) as f64;
            (1.0 - s) * -range + s * range
        }
    };
    let mut out = Vec::with_capacity(anchors.len() * n * n);
    for (a, anchor) in anchors.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                out.push(GridTransform {
                    anchor_id: a,
                    grid: [i, j],
                    transform: SpatialTransform::translation(anchor + Vector3::new(offset(i), offset(j), 0.0)),
                });
            }
        }
    }
    Ok(out)
}

/// Move the flagged object points by the transform at growth `g`.
pub fn augment_scene_cloud(pc: &PointCloud, object: &[bool], transform: &SpatialTransform, g: f64) -> Result<PointCloud> {
    if object.len() != pc.len() {
        return Err(Error::Dimension {
            what: "object mask",
            expected: pc.len(),
            got: object.len(),
        });
    }
    let partial = transform.interpolated(g);
    let mut out = pc.clone();
    for (p, &is_obj) in out.points.iter_mut().zip(object) {
        if is_obj {
            *p = partial.apply_point(p);
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct TransformDoc {
    anchor_id: usize,
    grid: [usize; 2],
    rotation_xyzw: [f64; 4],
    translation: [f64; 3],
}

pub fn transforms_to_json(list: &[GridTransform]) -> String {
    let docs: Vec<TransformDoc> = list
        .iter()
        .map(|g| TransformDoc {
            anchor_id: g.anchor_id,
            grid: g.grid,
            rotation_xyzw: quaternion_xyzw(&g.transform.rotation),
            translation: g.transform.translation.into(),
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("transform list serializes")
}

pub fn transforms_from_json(text: &str) -> Result<Vec<GridTransform>> {
    let docs: Vec<TransformDoc> = serde_json::from_str(text)?;
    Ok(docs
        .into_iter()
        .map(|d| GridTransform {
            anchor_id: d.anchor_id,
            grid: d.grid,
            transform: SpatialTransform {
                rotation: rotation_from_xyzw(d.rotation_xyzw),
                translation: Vector3::from(d.translation),
            },
        })
        .collect())
}

/// Anchor offsets from a JSON array of `[x, y, z]` triples.
pub fn load_anchors(path: &Path) -> Result<Vec<Vector3<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: Vec<[f64; 3]> = serde_json::from_str(&text)?;
    Ok(raw.into_iter().map(Vector3::from).collect())
}

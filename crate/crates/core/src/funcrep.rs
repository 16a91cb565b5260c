//! Functional representations: point/direction pairs sampled on the contact
//! surfaces (finger pads) of an end effector, and their world-frame
//! evaluation along a joint trajectory.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{evaluate_world_set, evaluate_world_set_batch, LocalPointSet};
use crate::robot::mesh::{link_triangles, rng_from_seed, sample_triangles, triangle_area};
use crate::robot::{Embodiment, JointConfiguration};

pub const DEFAULT_POINTS_PER_LINK: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TemplateVariant {
    /// Full area-weighted coverage of every pad.
    #[default]
    Standard,
    /// Only samples within `radius` meters of their pad's area centroid.
    Reduced { radius: f64 },
    /// The standard set with a seeded random `fraction` of entries removed.
    RandomDropped { fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSource {
    pub pad_links: Vec<String>,
    pub count_per_link: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub link: String,
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalTemplate {
    pub entries: Vec<TemplateEntry>,
    pub source: TemplateSource,
    pub variant: TemplateVariant,
}

/// World-frame points and unit directions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorldFuncRep {
    pub points: Vec<Point3<f64>>,
    pub directions: Vec<Vector3<f64>>,
}

impl WorldFuncRep {
    pub fn new(points: Vec<Point3<f64>>, directions: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != directions.len() {
            return Err(Error::Dimension {
                what: "functional representation directions",
                expected: points.len(),
                got: directions.len(),
            });
        }
        if let Some(i) = directions.iter().position(|d| (d.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidArgument(format!("direction {i} is not unit length")));
        }
        Ok(WorldFuncRep { points, directions })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuncRepTrajectory {
    pub frames: Vec<WorldFuncRep>,
}

impl FuncRepTrajectory {
    pub fn new(frames: Vec<WorldFuncRep>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::Empty("functional representation trajectory"));
        };
        let n = first.len();
        if let Some(f) = frames.iter().position(|f| f.len() != n) {
            return Err(Error::Dimension {
                what: "frame size",
                expected: n,
                got: frames[f].len(),
            });
        }
        Ok(FuncRepTrajectory { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn area_centroid(tris: &[crate::robot::mesh::Triangle]) -> Point3<f64> {
    let mut acc = Vector3::zeros();
    let mut total = 0.0;
    for t in tris {
        let a = triangle_area(t);
        acc += a * (t[0].coords + t[1].coords + t[2].coords) / 3.0;
        total += a;
    }
    Point3::from(acc / total)
}

pub fn build_template(
    e: &Embodiment,
    pad_links: &[String],
    count_per_link: usize,
    seed: u64,
    variant: TemplateVariant,
) -> Result<FunctionalTemplate> {
    if pad_links.is_empty() {
        return Err(Error::Empty("pad link list"));
    }
    if count_per_link == 0 {
        return Err(Error::InvalidArgument("count per link must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut entries = Vec::with_capacity(pad_links.len() * count_per_link);
    let mut centroids = Vec::with_capacity(pad_links.len());
    for pad in pad_links {
        let li = e.link_index(pad).ok_or_else(|| Error::Unknown {
            kind: "pad link",
            name: pad.clone(),
        })?;
        let tris = link_triangles(e, li);
        if tris.is_empty() {
            return Err(Error::NoGeometry(pad.clone()));
        }
        let centroid = area_centroid(&tris);
        for s in sample_triangles(&tris, count_per_link, &mut rng)? {
            entries.push(TemplateEntry {
                link: pad.clone(),
                point: s.point.coords.into(),
                normal: s.normal.into(),
            });
            centroids.push(centroid);
        }
    }
    match variant {
        TemplateVariant::Standard => {}
        TemplateVariant::Reduced { radius } => {
            if !(radius > 0.0) {
                return Err(Error::InvalidArgument("reduced radius must be positive".into()));
            }
            let keep: Vec<bool> = entries
                .iter()
                .zip(&centroids)
                .map(|(en, c)| (Point3::from(en.point) - c).norm() <= radius)
                .collect();
            let mut k = keep.iter();
            entries.retain(|_| *k.next().unwrap());
            if entries.is_empty() {
                return Err(Error::Empty("reduced template (radius excludes every sample)"));
            }
        }
        TemplateVariant::RandomDropped { fraction } => {
            if !(0.0..1.0).contains(&fraction) {
                return Err(Error::InvalidArgument("drop fraction must lie in [0, 1)".into()));
            }
            let drop = (fraction * entries.len() as f64).round() as usize;
            let mut idx: Vec<usize> = (0..entries.len()).collect();
            // Separate stream from the surface sampler.
            let mut rng = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15);
            idx.shuffle(&mut rng);
            let mut dropped = vec![false; entries.len()];
            for &i in &idx[..drop] {
                dropped[i] = true;
            }
            let mut d = dropped.iter();
            entries.retain(|_| !*d.next().unwrap());
        }
    }
    Ok(FunctionalTemplate {
        entries,
        source: TemplateSource {
            pad_links: pad_links.to_vec(),
            count_per_link,
            seed,
        },
        variant,
    })
}

impl FunctionalTemplate {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolve link names against `e`.
    pub fn local_set(&self, e: &Embodiment) -> Result<LocalPointSet> {
        if self.entries.is_empty() {
            return Err(Error::Empty("functional template"));
        }
        let mut set = LocalPointSet::default();
        for en in &self.entries {
            let li = e.link_index(&en.link).ok_or_else(|| Error::Unknown {
                kind: "template link",
                name: en.link.clone(),
            })?;
            let n = Vector3::from(en.normal);
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "template normal on `{}` is not unit length",
                    en.link
                )));
            }
            set.links.push(li);
            set.points.push(Point3::from(en.point));
            set.normals.push(n);
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("template serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn eval_template(e: &Embodiment, template: &FunctionalTemplate, q: &JointConfiguration) -> Result<WorldFuncRep> {
    evaluate_world_set(e, q, &template.local_set(e)?)
}

pub fn template_trajectory(
    e: &Embodiment,
    template: &FunctionalTemplate,
    traj: &[JointConfiguration],
) -> Result<FuncRepTrajectory> {
    if traj.is_empty() {
        return Err(Error::Empty("joint trajectory"));
    }
    for (t, q) in traj.iter().enumerate() {
        q.check(e).map_err(|err| err.in_frame(t))?;
    }
    let local = template.local_set(e)?;
    FuncRepTrajectory::new(evaluate_world_set_batch(e, traj, &local)?)
}

//! Target-side demonstration synthesis: actions from the aligned trajectory,
//! and observations rebuilt by cropping to the workspace, masking the source
//! robot, adding sampled target-robot points, and downsampling with FPS.

use log::warn;
use nalgebra::Point3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::AlignedTrajectory;
use crate::augment::{augment_scene_cloud, clipped_growth, AugmentationSchedule, SpatialTransform};
use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::kinematics::forward_kinematics;
use crate::robot::mesh::{link_triangles, rng_from_seed, triangle_area, Triangle};
use crate::robot::{Embodiment, JointConfiguration};
use crate::seed::{frame_seed, substream};
use crate::spatial::PointGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointTag {
    Scene,
    RobotAugmented,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    /// Per-point origin; absent for clouds read from disk.
    pub tags: Option<Vec<PointTag>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        PointCloud { points, tags: None }
    }

    pub fn tagged(points: Vec<Point3<f64>>, tag: PointTag) -> Self {
        let tags = vec![tag; points.len()];
        PointCloud {
            points,
            tags: Some(tags),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tag(&self, i: usize) -> PointTag {
        self.tags.as_ref().map_or(PointTag::Scene, |t| t[i])
    }

    pub fn count_tag(&self, tag: PointTag) -> usize {
        (0..self.len()).filter(|&i| self.tag(i) == tag).count()
    }

    fn select(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            tags: self.tags.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
        }
    }

    fn filter(&self, keep: impl Fn(&Point3<f64>) -> bool) -> PointCloud {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(&self.points[i])).collect();
        self.select(&idx)
    }

    /// Concatenation; tags materialize as soon as either side carries them.
    pub fn union(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let tags = if self.tags.is_none() && other.tags.is_none() {
            None
        } else {
            let mut t: Vec<PointTag> = (0..self.len()).map(|i| self.tag(i)).collect();
            t.extend((0..other.len()).map(|i| other.tag(i)));
            Some(t)
        };
        PointCloud { points, tags }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.points.iter().position(|p| !p.coords.iter().all(|v| v.is_finite())) {
            Some(i) => Err(Error::InvalidArgument(format!("point {i} is not finite"))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoFrame {
    pub cloud: PointCloud,
    pub arm: Vec<f64>,
    pub ee: Vec<f64>,
    pub action_arm: Vec<f64>,
    pub action_ee: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub embodiment: String,
    pub arm_dof: usize,
    pub ee_dof: usize,
    /// Free-form description of the initial state (scene, augmentation cell).
    pub initial_state: String,
    /// Global seed the demonstration was synthesized with.
    pub seed: u64,
    /// Per-frame seeds, empty for recorded demonstrations.
    pub frame_seeds: Vec<u64>,
    pub frames: Vec<DemoFrame>,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Empty("demonstration"));
        }
        if !self.frame_seeds.is_empty() && self.frame_seeds.len() != self.frames.len() {
            return Err(Error::Dimension {
                what: "frame seeds",
                expected: self.frames.len(),
                got: self.frame_seeds.len(),
            });
        }
        for (t, f) in self.frames.iter().enumerate() {
            let dims = [
                ("arm proprioception", f.arm.len(), self.arm_dof),
                ("end-effector proprioception", f.ee.len(), self.ee_dof),
                ("arm action", f.action_arm.len(), self.arm_dof),
                ("end-effector action", f.action_ee.len(), self.ee_dof),
            ];
            for (what, got, expected) in dims {
                if got != expected {
                    return Err(Error::Dimension { what, expected, got }.in_frame(t));
                }
            }
            f.cloud.check_finite().map_err(|e| e.in_frame(t))?;
            if let Some(tags) = &f.cloud.tags {
                if tags.len() != f.cloud.len() {
                    return Err(Error::Dimension {
                        what: "point tags",
                        expected: f.cloud.len(),
                        got: tags.len(),
                    }
                    .in_frame(t));
                }
            }
        }
        Ok(())
    }

    /// Check the dof split against an embodiment.
    pub fn check_against(&self, e: &Embodiment) -> Result<()> {
        if self.arm_dof != e.arm_indices().len() {
            return Err(Error::Dimension {
                what: "arm joints",
                expected: e.arm_indices().len(),
                got: self.arm_dof,
            });
        }
        if self.ee_dof != e.ee_indices().len() {
            return Err(Error::Dimension {
                what: "end-effector joints",
                expected: e.ee_indices().len(),
                got: self.ee_dof,
            });
        }
        self.check()
    }

    /// Full proprioceptive configuration of each frame.
    pub fn configurations(&self, e: &Embodiment) -> Result<Vec<JointConfiguration>> {
        self.frames
            .iter()
            .enumerate()
            .map(|(t, f)| e.merge(&f.arm, &f.ee).map_err(|err| err.in_frame(t)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub tau: f64,
    pub workspace: Aabb,
    pub robot_samples: usize,
    pub output_size: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(workspace: Aabb) -> Self {
        SynthConfig {
            tau: 0.005,
            workspace,
            robot_samples: 4096,
            output_size: 1024,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.output_size < 1 {
            return Err(Error::InvalidArgument("output size must be at least 1".into()));
        }
        if self.robot_samples < 1 {
            return Err(Error::InvalidArgument("robot sample count must be at least 1".into()));
        }
        self.workspace.check()
    }
}

/// `a_t = q̂_{t+1}`, holding the last configuration on the final frame.
pub fn generate_actions(aligned: &AlignedTrajectory) -> Vec<JointConfiguration> {
    let n = aligned.configs.len();
    (0..n).map(|t| aligned.configs[(t + 1).min(n - 1)].clone()).collect()
}

pub fn crop_workspace(pc: &PointCloud, workspace: &Aabb) -> PointCloud {
    pc.filter(|p| workspace.contains(p))
}

/// Drop every point closer than `tau` (strictly) to some robot sample.
pub fn mask_robot_points(pc: &PointCloud, robot: &PointCloud, tau: f64) -> Result<PointCloud> {
    if robot.is_empty() {
        return Err(Error::Empty("robot samples"));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let grid = PointGrid::new(&robot.points, tau);
    Ok(pc.filter(|p| {
        let c = grid.key_of(p);
        let mut near = false;
        for r in 0..=1 {
            grid.for_each_in_ring(c, r, |i| near |= (p - robot.points[i]).norm() < tau);
        }
        !near
    }))
}

/// Every link triangle of an embodiment with a cumulative-area table, so
/// repeated sampling at different configurations skips triangulation.
pub struct RobotSurface {
    tris: Vec<Triangle>,
    links: Vec<usize>,
    cumulative: Vec<f64>,
}

impl RobotSurface {
    pub fn new(e: &Embodiment) -> Self {
        let mut tris = Vec::new();
        let mut links = Vec::new();
        for li in 0..e.tree_links().len() {
            let t = link_triangles(e, li);
            if t.is_empty() {
                continue;
            }
            links.extend(std::iter::repeat_n(li, t.len()));
            tris.extend(t);
        }
        let mut total = 0.0;
        let cumulative = tris
            .iter()
            .map(|t| {
                total += triangle_area(t);
                total
            })
            .collect();
        RobotSurface { tris, links, cumulative }
    }

    pub fn total_area(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Samples in link frames, tagged with their link index.
    fn sample_local(&self, count: usize, seed: u64) -> Vec<(usize, Point3<f64>)> {
        let total = self.total_area();
        let mut rng = rng_from_seed(seed);
        (0..count)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let face = self.cumulative.partition_point(|&c| c <= u).min(self.tris.len() - 1);
                let t = &self.tris[face];
                let s = rng.random::<f64>().sqrt();
                let r2: f64 = rng.random();
                let p = t[0].coords * (1.0 - s) + t[1].coords * (s * (1.0 - r2)) + t[2].coords * (s * r2);
                (self.links[face], Point3::from(p))
            })
            .collect()
    }

    pub fn sample(&self, e: &Embodiment, q: &JointConfiguration, count: usize, seed: u64) -> Result<PointCloud> {
        q.check(e)?;
        if self.tris.is_empty() || !(self.total_area() > 0.0) {
            return Err(Error::NoGeometry(e.name.clone()));
        }
        let poses = forward_kinematics(e, q)?;
        let points = self
            .sample_local(count, seed)
            .into_iter()
            .map(|(l, p)| poses.links[l] * p)
            .collect();
        Ok(PointCloud::tagged(points, PointTag::RobotAugmented))
    }
}

/// Area-weighted samples over all link geometry, posed at `q`.
pub fn sample_robot_cloud(e: &Embodiment, q: &JointConfiguration, count: usize, seed: u64) -> Result<PointCloud> {
    for l in e.tree_links() {
        if l.geometry.is_empty() {
            warn!("link `{}` of `{}` has no geometry and contributes no samples", l.name, e.name);
        }
    }
    RobotSurface::new(e).sample(e, q, count, seed)
}

/// Greedy farthest-point sampling from `start`. Ties go to the lowest index.
/// Inputs smaller than `n` are padded with uniform resamples.
pub fn fps_downsample(pc: &PointCloud, n: usize, start: usize, seed: u64) -> Result<PointCloud> {
    let m = pc.len();
    if n < 1 {
        return Err(Error::InvalidArgument("FPS output size must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::Empty("point cloud for FPS"));
    }
    if m <= n {
        let mut idx: Vec<usize> = (0..m).collect();
        let mut rng = rng_from_seed(seed);
        idx.extend((m..n).map(|_| rng.random_range(0..m)));
        return Ok(pc.select(&idx));
    }
    if start >= m {
        return Err(Error::InvalidArgument(format!(
            "FPS start index {start} out of range for {m} points"
        )));
    }
    let mut idx = Vec::with_capacity(n);
    let mut dist = vec![f64::INFINITY; m];
    let mut cur = start;
    for _ in 0..n {
        idx.push(cur);
        let c = pc.points[cur];
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, d) in dist.iter_mut().enumerate() {
            let di = (pc.points[i] - c).norm_squared();
            if di < *d {
                *d = di;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        cur = best;
    }
    Ok(pc.select(&idx))
}

/// Object-side edit applied between masking and augmentation: points inside
/// `object_box` move with the growth-scaled transform.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectEdit {
    pub object_box: Aabb,
    pub transform: SpatialTransform,
    pub growth: f64,
}

/// Point counts after each pipeline stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub input: usize,
    pub cropped: usize,
    pub masked: usize,
    pub augmented: usize,
    pub output: usize,
}

/// Samplers for the source and target robots, built once per embodiment pair.
pub struct SynthContext<'a> {
    pub source: &'a Embodiment,
    pub target: &'a Embodiment,
    source_surface: RobotSurface,
    target_surface: RobotSurface,
}

impl<'a> SynthContext<'a> {
    pub fn new(source: &'a Embodiment, target: &'a Embodiment) -> Self {
        SynthContext {
            source,
            target,
            source_surface: RobotSurface::new(source),
            target_surface: RobotSurface::new(target),
        }
    }

    /// Crop, mask the source robot, optionally move the object, add target
    /// robot samples, downsample. `cfg.seed` is used as the frame seed.
    pub fn observation(
        &self,
        pc: &PointCloud,
        source_q: &JointConfiguration,
        target_q: &JointConfiguration,
        cfg: &SynthConfig,
        edit: Option<&ObjectEdit>,
    ) -> Result<(PointCloud, StageCounts)> {
        let mut counts = StageCounts {
            input: pc.len(),
            ..Default::default()
        };
        let cropped = crop_workspace(pc, &cfg.workspace);
        counts.cropped = cropped.len();
        let source_robot = self
            .source_surface
            .sample(self.source, source_q, cfg.robot_samples, substream(cfg.seed, 0))
            .map_err(|e| e.in_stage("mask"))?;
        let mut masked = mask_robot_points(&cropped, &source_robot, cfg.tau).map_err(|e| e.in_stage("mask"))?;
        counts.masked = masked.len();
        if let Some(edit) = edit {
            let flags: Vec<bool> = masked.points.iter().map(|p| edit.object_box.contains(p)).collect();
            masked = augment_scene_cloud(&masked, &flags, &edit.transform, edit.growth).map_err(|e| e.in_stage("object"))?;
        }
        let target_robot = self
            .target_surface
            .sample(self.target, target_q, cfg.robot_samples, substream(cfg.seed, 1))
            .map_err(|e| e.in_stage("augment"))?;
        let scene = PointCloud::tagged(masked.points, PointTag::Scene);
        let merged = scene.union(&target_robot);
        counts.augmented = merged.len();
        let out = fps_downsample(&merged, cfg.output_size, 0, substream(cfg.seed, 2)).map_err(|e| e.in_stage("fps"))?;
        counts.output = out.len();
        Ok((out, counts))
    }
}

pub fn synthesize_observation(
    pc: &PointCloud,
    source: &Embodiment,
    source_q: &JointConfiguration,
    target: &Embodiment,
    target_q: &JointConfiguration,
    cfg: &SynthConfig,
) -> Result<PointCloud> {
    cfg.check()?;
    Ok(SynthContext::new(source, target)
        .observation(pc, source_q, target_q, cfg, None)?
        .0)
}

/// Object motion for a spatially augmented demonstration.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneAugmentation {
    pub object_box: Aabb,
    pub transform: SpatialTransform,
    pub schedule: AugmentationSchedule,
}

/// Rebuild a source demonstration for the target embodiment. Frames are
/// synthesized in parallel; each draws from `frame_seed(cfg.seed, demo_id, t)`.
pub fn synthesize_demonstration(
    demo_id: &str,
    source_demo: &Demonstration,
    source: &Embodiment,
    target: &Embodiment,
    aligned: &AlignedTrajectory,
    cfg: &SynthConfig,
    scene: Option<&SceneAugmentation>,
) -> Result<Demonstration> {
    cfg.check()?;
    source_demo.check_against(source)?;
    let len = source_demo.len();
    if aligned.len() != len {
        return Err(Error::Dimension {
            what: "aligned trajectory",
            expected: len,
            got: aligned.len(),
        });
    }
    let source_qs = source_demo.configurations(source)?;
    let actions = generate_actions(aligned);
    let ctx = SynthContext::new(source, target);
    let seeds: Vec<u64> = (0..len).map(|t| frame_seed(cfg.seed, demo_id, t as u64)).collect();
    let frames = (0..len)
        .into_par_iter()
        .map(|t| {
            let edit = match scene {
                Some(s) => Some(ObjectEdit {
                    object_box: s.object_box,
                    transform: s.transform,
                    growth: clipped_growth(t, len, s.schedule.knee)?,
                }),
                None => None,
            };
            let frame_cfg = SynthConfig {
                seed: seeds[t],
                ..cfg.clone()
            };
            let q = &aligned.configs[t];
            let (cloud, _) = ctx
                .observation(&source_demo.frames[t].cloud, &source_qs[t], q, &frame_cfg, edit.as_ref())
                .map_err(|e| e.in_frame(t))?;
            let (arm, ee) = target.split(q.as_slice());
            let (action_arm, action_ee) = target.split(actions[t].as_slice());
            Ok(DemoFrame {
                cloud,
                arm,
                ee,
                action_arm,
                action_ee,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Demonstration {
        embodiment: target.name.clone(),
        arm_dof: target.arm_indices().len(),
        ee_dof: target.ee_indices().len(),
        initial_state: source_demo.initial_state.clone(),
        seed: cfg.seed,
        frame_seeds: seeds,
        frames,
    })
}

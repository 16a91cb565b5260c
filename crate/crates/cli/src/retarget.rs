use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cei_core::align::{align_trajectory, eis_initialize, AlignmentConfig};
use cei_core::augment::{augment_rep_trajectory, grid_transforms, load_anchors, AugmentationSchedule, GridTransform};
use cei_core::dataset::{read_demonstration, write_demonstration, DatasetIndex, IndexEntry};
use cei_core::funcrep::{build_template, template_trajectory, FunctionalTemplate};
use cei_core::robot::{load_embodiment, EmbodimentManifest};
use cei_core::robot::{Embodiment, JointConfiguration};
use cei_core::seed::{frame_seed, substream};
use cei_core::synth::{synthesize_demonstration, Demonstration, SceneAugmentation, SynthConfig};
use log::{info, warn};
use rayon::prelude::*;

use crate::manifest::{Initialization, RunManifest};
use crate::report::{timed, DemoReport, EisReport, FrameReport, RunReport, StageTimes, Status, REPORT_SCHEMA_VERSION};

/// Substream of a demo's frame-0 seed used for EIS sampling.
const EIS_STREAM: u64 = 3;

/// Everything shared by the demos of one run.
pub struct Pipeline {
    pub manifest: RunManifest,
    pub source: Embodiment,
    pub source_manifest: EmbodimentManifest,
    pub target: Embodiment,
    pub target_manifest: EmbodimentManifest,
    pub source_template: FunctionalTemplate,
    pub target_template: FunctionalTemplate,
    pub synth: SynthConfig,
}

/// One output demo: a source demo, optionally moved by a grid transform.
#[derive(Clone, Debug)]
pub struct Job {
    pub id: String,
    pub source_id: String,
    pub source_dir: PathBuf,
    pub transform: Option<GridTransform>,
}

pub struct JobOutput {
    pub demo: Demonstration,
    pub report: DemoReport,
}

/// Id of the demo produced from `source` by grid transform `g`.
pub fn augmented_id(source: &str, g: &GridTransform) -> String {
    format!("{source}__a{:02}_x{:02}_y{:02}", g.anchor_id, g.grid[0], g.grid[1])
}

impl Pipeline {
    pub fn new(manifest: RunManifest) -> Result<Self> {
        manifest.check()?;
        let (source, source_manifest) =
            load_embodiment(&manifest.source).with_context(|| format!("loading {}", manifest.source.display()))?;
        let (target, target_manifest) =
            load_embodiment(&manifest.target).with_context(|| format!("loading {}", manifest.target.display()))?;
        let t = &manifest.template;
        let source_template = build_template(&source, &source_manifest.pad_links, t.points_per_link, t.seed, t.variant)?;
        let target_template = build_template(&target, &target_manifest.pad_links, t.points_per_link, t.seed, t.variant)?;
        let s = &manifest.synthesis;
        let synth = SynthConfig {
            tau: s.tau,
            workspace: s.workspace.unwrap_or(target_manifest.workspace),
            robot_samples: s.robot_samples,
            output_size: s.output_size,
            seed: manifest.seed,
        };
        synth.check()?;
        Ok(Pipeline {
            manifest,
            source,
            source_manifest,
            target,
            target_manifest,
            source_template,
            target_template,
            synth,
        })
    }

    fn alignment(&self) -> &AlignmentConfig {
        &self.manifest.alignment
    }

    fn initial_config(
        &self,
        id: &str,
        demo: &Demonstration,
        reference: &cei_core::funcrep::WorldFuncRep,
    ) -> Result<(JointConfiguration, Option<EisReport>)> {
        let t = &self.target;
        match &self.manifest.initialization {
            Initialization::Neutral => {
                let arm = if demo.arm_dof == t.arm_indices().len() {
                    demo.frames[0].arm.clone()
                } else {
                    vec![0.0; t.arm_indices().len()]
                };
                let q = t.merge(&arm, &vec![0.0; t.ee_indices().len()])?;
                Ok((t.clamp(&q), None))
            }
            Initialization::Config { values } => {
                let q = JointConfiguration(values.clone());
                q.check(t)?;
                Ok((q, None))
            }
            Initialization::Eis { samples, fraction } => {
                let seed = substream(frame_seed(self.manifest.seed, id, 0), EIS_STREAM);
                let out = eis_initialize(
                    t,
                    &self.target_template,
                    reference,
                    *samples,
                    *fraction,
                    seed,
                    self.alignment(),
                )?;
                if !out.wide_spread.is_empty() {
                    warn!("{id}: elite values span more than pi on {:?}", out.wide_spread);
                }
                let report = EisReport {
                    samples: *samples,
                    elite: out.elite.len(),
                    best_similarity: out.scores[out.elite[0]],
                    wide_spread: out.wide_spread,
                };
                Ok((out.config, Some(report)))
            }
        }
    }

    /// Retarget one job in memory.
    pub fn run_job(&self, job: &Job, object_box: Option<cei_core::geom::Aabb>, knee: f64) -> Result<JobOutput> {
        let t0 = Instant::now();
        let mut st = StageTimes::default();
        let demo = timed(&mut st.load, || read_demonstration(&job.source_dir))
            .with_context(|| format!("reading {}", job.source_dir.display()))?;
        if demo.is_empty() {
            bail!("demo {} has no frames", job.source_id);
        }
        demo.check_against(&self.source)?;
        if demo.embodiment != self.source.name {
            warn!(
                "{}: recorded on `{}`, source embodiment is `{}`",
                job.source_id, demo.embodiment, self.source.name
            );
        }
        let schedule = AugmentationSchedule { knee };
        let reps = timed(&mut st.represent, || -> Result<_> {
            let qs = demo.configurations(&self.source)?;
            let reps = template_trajectory(&self.source, &self.source_template, &qs)?;
            Ok(match &job.transform {
                Some(g) => augment_rep_trajectory(&reps, &g.transform, &schedule)?,
                None => reps,
            })
        })?;
        let (q0, eis) = timed(&mut st.initialize, || self.initial_config(&job.id, &demo, &reps.frames[0]))?;
        let aligned = timed(&mut st.align, || {
            align_trajectory(&reps, &self.target, &self.target_template, &q0, self.alignment())
        })?;
        let scene = match (&job.transform, object_box) {
            (Some(g), Some(b)) => Some(SceneAugmentation {
                object_box: b,
                transform: g.transform,
                schedule,
            }),
            (Some(_), None) => {
                warn!("{}: no object box in the manifest, scene left in place", job.id);
                None
            }
            _ => None,
        };
        let out = timed(&mut st.synthesize, || {
            synthesize_demonstration(
                &job.id,
                &demo,
                &self.source,
                &self.target,
                &aligned,
                &self.synth,
                scene.as_ref(),
            )
        })?;
        let report = DemoReport {
            id: job.id.clone(),
            source: job.source_id.clone(),
            status: Status::Ok,
            error: None,
            length: out.len(),
            wall_clock: t0.elapsed().as_secs_f64(),
            stages: st,
            eis,
            frames: aligned.diagnostics.iter().map(FrameReport::from).collect(),
        };
        Ok(JobOutput { demo: out, report })
    }
}

fn input_jobs(input: &Path) -> Result<Vec<Job>> {
    let index = DatasetIndex::read(input).with_context(|| format!("reading index of {}", input.display()))?;
    Ok(index
        .demos
        .iter()
        .map(|e| Job {
            id: e.id.clone(),
            source_id: e.id.clone(),
            source_dir: input.join(&e.path),
            transform: None,
        })
        .collect())
}

/// Grid transforms from the manifest's augmentation block.
pub fn manifest_transforms(m: &RunManifest) -> Result<Vec<GridTransform>> {
    let spec = m
        .augmentation
        .as_ref()
        .ok_or_else(|| anyhow!("manifest has no augmentation block"))?;
    let anchors = load_anchors(&spec.anchors_file).with_context(|| format!("reading {}", spec.anchors_file.display()))?;
    if anchors.is_empty() {
        bail!("anchors file {} lists no anchors", spec.anchors_file.display());
    }
    Ok(grid_transforms(&anchors, spec.grid_n, spec.grid_range)?)
}

fn write_job(out_dir: &Path, id: &str, demo: &Demonstration) -> Result<u64> {
    let partial = out_dir.join(format!(".partial-{id}"));
    let dest = out_dir.join(id);
    if partial.exists() {
        std::fs::remove_dir_all(&partial)?;
    }
    let sum = write_demonstration(demo, &partial)?;
    if dest.exists() {
        std::fs::remove_dir_all(&dest)?;
    }
    std::fs::rename(&partial, &dest).with_context(|| format!("moving {} into place", dest.display()))?;
    Ok(sum)
}

fn run_jobs(p: &Pipeline, jobs: Vec<Job>, command: &str) -> Result<RunReport> {
    let m = &p.manifest;
    let t0 = Instant::now();
    let out_dir = &m.output;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    if jobs.is_empty() {
        warn!("input dataset {} has no demos", m.input.display());
    }
    let knee = m
        .augmentation
        .as_ref()
        .map(|a| a.knee)
        .unwrap_or(AugmentationSchedule::default().knee);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(m.workers).build()?;
    let results: Vec<(DemoReport, Option<IndexEntry>)> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let run = || -> Result<(DemoReport, IndexEntry)> {
                    let JobOutput { demo, mut report } = p.run_job(job, m.object_box, knee)?;
                    let sum = timed(&mut report.stages.write, || write_job(out_dir, &job.id, &demo))?;
                    report.wall_clock += report.stages.write;
                    let entry = IndexEntry {
                        id: job.id.clone(),
                        path: PathBuf::from(&job.id),
                        embodiment: demo.embodiment.clone(),
                        length: demo.len(),
                        checksum: sum,
                    };
                    Ok((report, entry))
                };
                match run() {
                    Ok((r, e)) => {
                        info!("{}: {} frames in {:.2}s", r.id, r.length, r.wall_clock);
                        (r, Some(e))
                    }
                    Err(err) => {
                        warn!("{} failed: {err:#}", job.id);
                        let report = DemoReport {
                            id: job.id.clone(),
                            source: job.source_id.clone(),
                            status: Status::Failed,
                            error: Some(format!("{err:#}")),
                            length: 0,
                            wall_clock: 0.0,
                            stages: StageTimes::default(),
                            eis: None,
                            frames: Vec::new(),
                        };
                        (report, None)
                    }
                }
            })
            .collect()
    });
    let mut index = DatasetIndex::new();
    let mut stages = StageTimes::default();
    let mut demos = Vec::with_capacity(results.len());
    for (r, e) in results {
        stages.add(&r.stages);
        if let Some(e) = e {
            index.demos.push(e);
        }
        demos.push(r);
    }
    index.write(out_dir)?;
    let frames: usize = demos.iter().map(|d| d.frames.len()).sum();
    let steps: usize = demos.iter().flat_map(|d| &d.frames).map(|f| f.steps).sum();
    let failed = demos.iter().filter(|d| d.status == Status::Failed).count();
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        command: command.to_string(),
        seed: m.seed,
        workers: m.workers,
        input: m.input.clone(),
        output: m.output.clone(),
        wall_clock: t0.elapsed().as_secs_f64(),
        stages,
        succeeded: demos.len() - failed,
        failed,
        frames,
        mean_steps: if frames > 0 { steps as f64 / frames as f64 } else { 0.0 },
        demos,
    })
}

/// Retarget every demo of the input dataset onto the target embodiment.
pub fn cmd_retarget(manifest: RunManifest) -> Result<RunReport> {
    let p = Pipeline::new(manifest)?;
    let jobs = input_jobs(&p.manifest.input)?;
    run_jobs(&p, jobs, "retarget")
}

/// Retarget every demo once per grid transform; outputs are demos × anchors × n².
pub fn cmd_augment(manifest: RunManifest) -> Result<RunReport> {
    let p = Pipeline::new(manifest)?;
    let transforms = manifest_transforms(&p.manifest)?;
    let jobs: Vec<Job> = input_jobs(&p.manifest.input)?
        .into_iter()
        .flat_map(|j| {
            transforms.iter().map(move |g| Job {
                id: augmented_id(&j.source_id, g),
                transform: Some(g.clone()),
                ..j.clone()
            })
        })
        .collect();
    run_jobs(&p, jobs, "augment")
}

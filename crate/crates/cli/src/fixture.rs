use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cei_core::dataset::{write_demonstration, DatasetIndex, IndexEntry};
use cei_core::synthetic::{
    arm7_hand12, object_box, parallel_gripper_arm, pinch_trajectory, scene_demonstration, three_finger_arm, FixtureRobot,
};
use clap::ValueEnum;
use serde::Serialize;

use crate::manifest::{AugmentSpec, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureTarget {
    /// The source gripper arm itself.
    Gripper,
    ThreeFinger,
    Arm7Hand12,
}

#[derive(Clone, Debug)]
pub struct FixtureSpec {
    pub demos: usize,
    pub duplicate: usize,
    pub length: usize,
    pub seed: u64,
    pub target: FixtureTarget,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            demos: 25,
            duplicate: 4,
            length: 105,
            seed: 0,
            target: FixtureTarget::ThreeFinger,
        }
    }
}

/// Per-demo lengths cycling through `length + {-10, -5, 0, 5, 10}`.
pub fn fixture_lengths(demos: usize, length: usize) -> Vec<usize> {
    const OFFSETS: [i64; 5] = [-10, -5, 0, 5, 10];
    (0..demos).map(|i| (length as i64 + OFFSETS[i % 5]).max(4) as usize).collect()
}

/// Write robots, a source pinch dataset, an anchors file and `run.json` into
/// `dir`. Returns the run manifest path.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<PathBuf> {
    if spec.demos == 0 || spec.duplicate == 0 {
        bail!("fixture needs at least one demo and one copy");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let source = parallel_gripper_arm()?;
    let target: FixtureRobot = match spec.target {
        FixtureTarget::Gripper => parallel_gripper_arm()?,
        FixtureTarget::ThreeFinger => three_finger_arm()?,
        FixtureTarget::Arm7Hand12 => arm7_hand12()?,
    };
    source.write(dir, "source")?;
    target.write(dir, "target")?;

    let data = dir.join("source_demos");
    let mut index = DatasetIndex::new();
    let lengths = fixture_lengths(spec.demos, spec.length);
    let mut box0 = None;
    for (i, &len) in lengths.iter().enumerate() {
        let variant = (i as f64 / spec.demos as f64 - 0.5) * 0.2;
        let traj = pinch_trajectory(len, variant);
        if i == 0 {
            box0 = Some(object_box(&source, &traj)?);
        }
        let name = format!("demo{i:03}");
        let demo = scene_demonstration(&source, &traj, spec.seed.wrapping_add(i as u64), &name)?;
        let sum = write_demonstration(&demo, &data.join(&name))?;
        for copy in 0..spec.duplicate {
            let id = if spec.duplicate == 1 {
                name.clone()
            } else {
                format!("{name}_c{copy}")
            };
            index.demos.push(IndexEntry {
                id,
                path: PathBuf::from(&name),
                embodiment: demo.embodiment.clone(),
                length: len,
                checksum: sum,
            });
        }
    }
    index.write(&data)?;

    let anchors: Vec<[f64; 3]> = (0..10)
        .map(|k| [0.01 * (k % 5) as f64 - 0.02, 0.02 * (k / 5) as f64 - 0.01, 0.0])
        .collect();
    std::fs::write(dir.join("anchors.json"), serde_json::to_string_pretty(&anchors)? + "\n")?;

    let mut run = RunManifest::new(
        "source.embodiment.json".into(),
        "target.embodiment.json".into(),
        "source_demos".into(),
        "retargeted".into(),
    );
    run.seed = spec.seed;
    run.object_box = box0;
    run.augmentation = Some(AugmentSpec {
        anchors_file: "anchors.json".into(),
        grid_n: 10,
        grid_range: 0.08,
        knee: 0.8,
    });
    let path = dir.join("run.json");
    run.save(&path)?;
    Ok(path)
}

use std::path::{Path, PathBuf};

use cei_core::dataset::{read_demonstration, read_manifest, DatasetIndex};
use cei_core::robot::Embodiment;
use cei_core::Error;
use serde::{Deserialize, Serialize};

pub const VALIDATION_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    Index,
    Io,
    Size,
    Format,
    Checksum,
    Dimension,
    Embodiment,
    PointCount,
    Limit,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub demo: Option<String>,
    pub kind: FindingKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub dataset: PathBuf,
    pub expected_points: usize,
    pub demos: usize,
    pub frames: usize,
    pub passed: bool,
    pub findings: Vec<Finding>,
}

fn kind_of(e: &Error) -> (FindingKind, Option<usize>) {
    match e {
        Error::Frame { frame, source } => (kind_of(source).0, Some(*frame)),
        Error::Size { .. } => (FindingKind::Size, None),
        Error::Format { .. } | Error::Json(_) | Error::Parse { .. } => (FindingKind::Format, None),
        Error::Checksum { .. } => (FindingKind::Checksum, None),
        Error::Dimension { .. } => (FindingKind::Dimension, None),
        Error::Io { .. } => (FindingKind::Io, None),
        _ => (FindingKind::Other, None),
    }
}

/// Check every demo of a dataset: readable, checksums, sizes, dof split,
/// point counts and, given the embodiment, joint limits.
pub fn cmd_validate(dataset: &Path, embodiment: Option<&Embodiment>, points: usize) -> ValidationReport {
    let mut findings = Vec::new();
    let mut frames = 0;
    let index = match DatasetIndex::read(dataset) {
        Ok(i) => i,
        Err(e) => {
            findings.push(Finding {
                demo: None,
                kind: FindingKind::Index,
                frame: None,
                joint: None,
                message: e.to_string(),
            });
            DatasetIndex::new()
        }
    };
    for entry in &index.demos {
        let id = Some(entry.id.clone());
        let mut push = |kind, frame, joint, message: String| {
            findings.push(Finding {
                demo: id.clone(),
                kind,
                frame,
                joint,
                message,
            })
        };
        let dir = dataset.join(&entry.path);
        let demo = match read_demonstration(&dir) {
            Ok(d) => d,
            Err(e) => {
                let (kind, frame) = kind_of(&e);
                push(kind, frame, None, e.to_string());
                continue;
            }
        };
        frames += demo.len();
        if let Ok(m) = read_manifest(&dir) {
            if m.checksum != entry.checksum {
                push(
                    FindingKind::Checksum,
                    None,
                    None,
                    format!(
                        "index checksum {:016x} differs from manifest {:016x}",
                        entry.checksum, m.checksum
                    ),
                );
            }
        }
        if demo.len() != entry.length {
            push(
                FindingKind::Size,
                None,
                None,
                format!("index length {} but demo has {} frames", entry.length, demo.len()),
            );
        }
        for (t, f) in demo.frames.iter().enumerate() {
            if f.cloud.len() != points {
                push(
                    FindingKind::PointCount,
                    Some(t),
                    None,
                    format!("{} points, expected {points}", f.cloud.len()),
                );
            }
        }
        let Some(e) = embodiment else { continue };
        if demo.embodiment != e.name {
            push(
                FindingKind::Embodiment,
                None,
                None,
                format!("demo embodiment `{}`, expected `{}`", demo.embodiment, e.name),
            );
        }
        let (arm, ee) = (e.arm_indices().len(), e.ee_indices().len());
        if demo.arm_dof != arm || demo.ee_dof != ee {
            push(
                FindingKind::Dimension,
                None,
                None,
                format!("dof split {}+{}, embodiment has {arm}+{ee}", demo.arm_dof, demo.ee_dof),
            );
            continue;
        }
        let names = e.dof_names();
        let (lower, upper) = (e.lower_limits(), e.upper_limits());
        for (t, f) in demo.frames.iter().enumerate() {
            let q = e.merge(&f.arm, &f.ee).expect("split checked above");
            for (k, &v) in q.0.iter().enumerate() {
                // Values are stored as f32; a limit itself may round outward.
                let slack = 2.0 * f32::EPSILON as f64 * lower[k].abs().max(upper[k].abs()).max(1.0);
                if v < lower[k] - slack || v > upper[k] + slack {
                    push(
                        FindingKind::Limit,
                        Some(t),
                        Some(names[k].to_string()),
                        format!("joint `{}` = {v} outside [{}, {}]", names[k], lower[k], upper[k]),
                    );
                }
            }
        }
    }
    ValidationReport {
        schema_version: VALIDATION_SCHEMA_VERSION,
        dataset: dataset.to_path_buf(),
        expected_points: points,
        demos: index.demos.len(),
        frames,
        passed: findings.is_empty(),
        findings,
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::Embodiment;
use super::{parse_robot_description, DescriptionFormat};
use crate::error::{Error, Result};
use crate::geom::{Aabb, PoseDoc};

/// Sidecar describing how an embodiment is used: which joints belong to the
/// arm and which to the end effector, the finger-pad links carrying the
/// functional representation, the workspace box, and the world-to-base pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbodimentManifest {
    /// Robot description path, relative to the manifest file.
    pub description: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DescriptionFormat>,
    pub arm_joints: Vec<String>,
    pub ee_joints: Vec<String>,
    pub pad_links: Vec<String>,
    pub workspace: Aabb,
    #[serde(default)]
    pub base: PoseDoc,
}

/// Load a manifest and the description it points to, applying the base pose
/// and the arm/end-effector split.
pub fn load_embodiment(manifest_path: &Path) -> Result<(Embodiment, EmbodimentManifest)> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: EmbodimentManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: format!("{}:{}", manifest_path.display(), e.line()),
        message: e.to_string(),
    })?;
    manifest.workspace.check()?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let desc_path = dir.join(&manifest.description);
    let desc = std::fs::read_to_string(&desc_path).map_err(|e| Error::io(&desc_path, e))?;
    let format = manifest.format.unwrap_or_else(|| DescriptionFormat::from_path(&desc_path));
    let desc_dir = desc_path.parent().unwrap_or(Path::new("."));
    let mut e = parse_robot_description(&desc, format, Some(desc_dir))?;
    e.set_partition(&manifest.arm_joints, &manifest.ee_joints)?;
    e.base = manifest.base.to_pose();
    for pad in &manifest.pad_links {
        if e.link_index(pad).is_none() {
            return Err(Error::Unknown {
                kind: "pad link",
                name: pad.clone(),
            });
        }
    }
    Ok((e, manifest))
}

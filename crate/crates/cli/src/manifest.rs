use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cei_core::align::AlignmentConfig;
use cei_core::funcrep::{TemplateVariant, DEFAULT_POINTS_PER_LINK};
use cei_core::geom::Aabb;
use serde::{Deserialize, Serialize};

pub const RUN_SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    RUN_SCHEMA_VERSION
}

fn one() -> usize {
    1
}

/// How functional templates are sampled on both embodiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateSpec {
    pub points_per_link: usize,
    pub seed: u64,
    pub variant: TemplateVariant,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        TemplateSpec {
            points_per_link: DEFAULT_POINTS_PER_LINK,
            seed: 0,
            variant: TemplateVariant::Standard,
        }
    }
}

/// Observation synthesis settings. The workspace defaults to the target
/// embodiment manifest's box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub tau: f64,
    pub robot_samples: usize,
    pub output_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workspace: Option<Aabb>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            tau: 0.005,
            robot_samples: 4096,
            output_size: 1024,
            workspace: None,
        }
    }
}

/// Starting configuration for the first frame of each demo.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initialization {
    /// Source arm values when the arm dof match, otherwise zero; end-effector
    /// joints at zero. Clamped to the target's limits.
    #[default]
    Neutral,
    /// An explicit target configuration.
    Config { values: Vec<f64> },
    /// Elite-based initialization against the first source frame.
    Eis { samples: usize, fraction: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub anchors_file: PathBuf,
    pub grid_n: usize,
    pub grid_range: f64,
    #[serde(default = "default_knee")]
    pub knee: f64,
}

fn default_knee() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Source embodiment manifest.
    pub source: PathBuf,
    /// Target embodiment manifest.
    pub target: PathBuf,
    #[serde(default)]
    pub template: TemplateSpec,
    #[serde(default)]
    pub alignment: AlignmentConfig,
    #[serde(default)]
    pub synthesis: SynthSettings,
    pub input: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub initialization: Initialization,
    /// Box around the manipulated object, used by scene augmentation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_box: Option<Aabb>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<AugmentSpec>,
}

impl RunManifest {
    pub fn new(source: PathBuf, target: PathBuf, input: PathBuf, output: PathBuf) -> Self {
        RunManifest {
            schema_version: RUN_SCHEMA_VERSION,
            source,
            target,
            template: TemplateSpec::default(),
            alignment: AlignmentConfig::default(),
            synthesis: SynthSettings::default(),
            input,
            output,
            seed: 0,
            workers: 1,
            initialization: Initialization::Neutral,
            object_box: None,
            augmentation: None,
        }
    }

    /// Read a manifest; relative paths are taken from the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing run manifest {}", path.display()))?;
        if m.schema_version != RUN_SCHEMA_VERSION {
            bail!("unsupported run manifest schema version {}", m.schema_version);
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut m.source, &mut m.target, &mut m.input, &mut m.output] {
            *p = base.join(&*p);
        }
        if let Some(a) = &mut m.augmentation {
            a.anchors_file = base.join(&a.anchors_file);
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn check(&self) -> Result<()> {
        for (what, p) in [
            ("source embodiment", &self.source),
            ("target embodiment", &self.target),
            ("input dataset", &self.input),
        ] {
            if !p.exists() {
                bail!("{what} {} does not exist", p.display());
            }
        }
        if self.workers < 1 {
            bail!("workers must be at least 1");
        }
        if self.template.points_per_link < 1 {
            bail!("template needs at least one point per link");
        }
        self.alignment.check()?;
        Ok(())
    }
}

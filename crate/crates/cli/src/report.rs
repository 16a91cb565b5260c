use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use cei_core::align::FrameDiagnostics;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Seconds spent in each pipeline stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub load: f64,
    pub represent: f64,
    pub initialize: f64,
    pub align: f64,
    pub synthesize: f64,
    pub write: f64,
}

impl StageTimes {
    pub fn add(&mut self, o: &StageTimes) {
        self.load += o.load;
        self.represent += o.represent;
        self.initialize += o.initialize;
        self.align += o.align;
        self.synthesize += o.synthesize;
        self.write += o.write;
    }

    pub fn total(&self) -> f64 {
        self.load + self.represent + self.initialize + self.align + self.synthesize + self.write
    }
}

/// Runs `f` and adds its wall-clock to `slot`.
pub fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let t0 = Instant::now();
    let out = f();
    *slot += t0.elapsed().as_secs_f64();
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub loss: f64,
    pub dcd: f64,
    pub penalty: f64,
    pub steps: usize,
    pub early_stopped: bool,
}

impl From<&FrameDiagnostics> for FrameReport {
    fn from(d: &FrameDiagnostics) -> Self {
        FrameReport {
            loss: d.final_loss,
            dcd: d.final_dcd,
            penalty: d.final_penalty,
            steps: d.steps,
            early_stopped: d.early_stopped,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EisReport {
    pub samples: usize,
    pub elite: usize,
    pub best_similarity: f64,
    pub wide_spread: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub id: String,
    pub source: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub length: usize,
    pub wall_clock: f64,
    pub stages: StageTimes,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eis: Option<EisReport>,
    pub frames: Vec<FrameReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub input: PathBuf,
    pub output: PathBuf,
    pub wall_clock: f64,
    /// Per-stage time summed over demos.
    pub stages: StageTimes,
    pub succeeded: usize,
    pub failed: usize,
    pub frames: usize,
    pub mean_steps: f64,
    pub demos: Vec<DemoReport>,
}

impl RunReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// `<out>.report.json` next to the output dataset.
pub fn default_report_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "dataset".into());
    name.push(".report.json");
    output.with_file_name(name)
}

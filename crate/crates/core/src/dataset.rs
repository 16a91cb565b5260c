//! On-disk demonstration datasets.
//!
//! A dataset directory holds `index.json` and one directory per demonstration.
//! Each demonstration directory holds `manifest.json` and `frames.bin`:
//!
//! ```text
//! frames.bin   := header frame*
//! header       := "CEIDEMO1" endian:u32 (0x0A0B0C0D) frame_count:u32
//! frame        := m:u32 p:u32 a:u32 points:f32[3m] proprio:f32[p] action:f32[a]
//! ```
//!
//! All integers and floats are little-endian. Proprioception and action are
//! the arm joints followed by the end-effector joints. The manifest records
//! the FNV-1a 64-bit hash of `frames.bin`, written as 16 hex digits.

use std::collections::HashSet;
use std::hash::Hasher;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use log::warn;
use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Aabb;
use crate::robot::{Embodiment, JointConfiguration};
use crate::synth::{crop_workspace, DemoFrame, Demonstration, PointCloud};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAGIC: &[u8; 8] = b"CEIDEMO1";
pub const ENDIAN_MARKER: u32 = 0x0A0B_0C0D;
pub const HEADER_BYTES: usize = 16;
pub const FRAMES_FILE: &str = "frames.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.json";

pub fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Size of `frames.bin` for `len` frames of `points` points and `dof` joints.
pub fn frames_file_size(len: usize, points: usize, dof: usize) -> usize {
    HEADER_BYTES + len * (12 + 12 * points + 8 * dof)
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoManifest {
    pub schema_version: u32,
    pub embodiment: String,
    pub length: usize,
    pub arm_dof: usize,
    pub ee_dof: usize,
    pub initial_state: String,
    pub seed: u64,
    #[serde(default)]
    pub frame_seeds: Vec<u64>,
    #[serde(with = "hex_u64")]
    pub checksum: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub id: String,
    /// Demonstration directory, relative to the index.
    pub path: PathBuf,
    pub embodiment: String,
    pub length: usize,
    #[serde(with = "hex_u64")]
    pub checksum: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub schema_version: u32,
    pub demos: Vec<IndexEntry>,
}

impl DatasetIndex {
    pub fn new() -> Self {
        DatasetIndex {
            schema_version: SCHEMA_VERSION,
            demos: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for d in &self.demos {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::Validation(vec![format!("duplicate demo id `{}`", d.id)]));
            }
        }
        Ok(())
    }

    pub fn read(dataset: &Path) -> Result<Self> {
        let path = dataset.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let index: DatasetIndex = serde_json::from_str(&text)?;
        index.check()?;
        Ok(index)
    }

    pub fn write(&self, dataset: &Path) -> Result<()> {
        self.check()?;
        std::fs::create_dir_all(dataset).map_err(|e| Error::io(dataset, e))?;
        let path = dataset.join(INDEX_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub fn encode_frames(demo: &Demonstration) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ENDIAN_MARKER.to_le_bytes());
    out.extend_from_slice(&(demo.len() as u32).to_le_bytes());
    let put = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for f in &demo.frames {
        let p = f.arm.len() + f.ee.len();
        let a = f.action_arm.len() + f.action_ee.len();
        for n in [f.cloud.len(), p, a] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for pt in &f.cloud.points {
            for &c in pt.coords.iter() {
                put(&mut out, c);
            }
        }
        for &v in f.arm.iter().chain(&f.ee).chain(&f.action_arm).chain(&f.action_ee) {
            put(&mut out, v);
        }
    }
    out
}

/// Write `demo` into directory `dir` and return the payload checksum.
pub fn write_demonstration(demo: &Demonstration, dir: &Path) -> Result<u64> {
    demo.check()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bytes = encode_frames(demo);
    let sum = checksum(&bytes);
    let frames = dir.join(FRAMES_FILE);
    std::fs::write(&frames, &bytes).map_err(|e| Error::io(&frames, e))?;
    let manifest = DemoManifest {
        schema_version: SCHEMA_VERSION,
        embodiment: demo.embodiment.clone(),
        length: demo.len(),
        arm_dof: demo.arm_dof,
        ee_dof: demo.ee_dof,
        initial_state: demo.initial_state.clone(),
        seed: demo.seed,
        frame_seeds: demo.frame_seeds.clone(),
        checksum: sum,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(sum)
}

pub fn read_manifest(dir: &Path) -> Result<DemoManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path,
        message: e.to_string(),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Option<Vec<f64>> {
        let b = self.take(n.checked_mul(4)?)?;
        Some(
            b.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        )
    }
}

/// Decode `frames.bin` against the manifest's dof split.
pub fn decode_frames(bytes: &[u8], path: &Path, arm_dof: usize, ee_dof: usize) -> Result<Vec<DemoFrame>> {
    let size_err = |message: String| Error::Size {
        path: path.to_path_buf(),
        message,
    };
    let format_err = |message: &str| Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8) != Some(MAGIC.as_slice()) {
        return Err(format_err("missing CEIDEMO1 header"));
    }
    match cur.u32() {
        Some(ENDIAN_MARKER) => {}
        Some(m) if m == ENDIAN_MARKER.swap_bytes() => return Err(format_err("big-endian payload; expected little-endian")),
        Some(_) => return Err(format_err("bad byte-order marker")),
        None => return Err(size_err("file ends inside the header".into())),
    }
    let count = cur.u32().ok_or_else(|| size_err("file ends inside the header".into()))? as usize;
    let dof = arm_dof + ee_dof;
    let mut frames = Vec::with_capacity(count.min(1 << 16));
    for t in 0..count {
        let truncated = || size_err(format!("frame {t} is truncated"));
        let (m, p, a) = match (cur.u32(), cur.u32(), cur.u32()) {
            (Some(m), Some(p), Some(a)) => (m as usize, p as usize, a as usize),
            _ => return Err(truncated()),
        };
        if p != dof || a != dof {
            return Err(Error::Dimension {
                what: "frame joint block",
                expected: dof,
                got: if p != dof { p } else { a },
            }
            .in_frame(t));
        }
        let coords = cur.f32s(3 * m).ok_or_else(truncated)?;
        let proprio = cur.f32s(p).ok_or_else(truncated)?;
        let action = cur.f32s(a).ok_or_else(truncated)?;
        frames.push(DemoFrame {
            cloud: PointCloud::new(coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect()),
            arm: proprio[..arm_dof].to_vec(),
            ee: proprio[arm_dof..].to_vec(),
            action_arm: action[..arm_dof].to_vec(),
            action_ee: action[arm_dof..].to_vec(),
        });
    }
    if cur.pos != bytes.len() {
        return Err(size_err(format!(
            "{} trailing bytes after frame {}",
            bytes.len() - cur.pos,
            count.saturating_sub(1)
        )));
    }
    Ok(frames)
}

pub fn read_demonstration(dir: &Path) -> Result<Demonstration> {
    read_demonstration_with(dir, true)
}

pub fn read_demonstration_with(dir: &Path, verify_checksum: bool) -> Result<Demonstration> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(FRAMES_FILE);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let frames = decode_frames(&bytes, &path, manifest.arm_dof, manifest.ee_dof)?;
    if frames.len() != manifest.length {
        return Err(Error::Size {
            path,
            message: format!("manifest declares {} frames, payload has {}", manifest.length, frames.len()),
        });
    }
    if verify_checksum {
        let found = checksum(&bytes);
        if found != manifest.checksum {
            return Err(Error::Checksum {
                path,
                expected: manifest.checksum,
                found,
            });
        }
    }
    let demo = Demonstration {
        embodiment: manifest.embodiment,
        arm_dof: manifest.arm_dof,
        ee_dof: manifest.ee_dof,
        initial_state: manifest.initial_state,
        seed: manifest.seed,
        frame_seeds: manifest.frame_seeds,
        frames,
    };
    demo.check()?;
    Ok(demo)
}

/// Copy with every value rounded to `f32`, i.e. what a write-read cycle yields.
pub fn at_f32_resolution(demo: &Demonstration) -> Demonstration {
    let r = |v: &f64| *v as f32 as f64;
    let rv = |v: &[f64]| v.iter().map(r).collect::<Vec<_>>();
    Demonstration {
        frames: demo
            .frames
            .iter()
            .map(|f| DemoFrame {
                cloud: PointCloud::new(f.cloud.points.iter().map(|p| p.map(|c| r(&c))).collect()),
                arm: rv(&f.arm),
                ee: rv(&f.ee),
                action_arm: rv(&f.action_arm),
                action_ee: rv(&f.action_ee),
            })
            .collect(),
        ..demo.clone()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogRecord {
    frame: usize,
    joints: Vec<f64>,
    points: Vec<[f64; 3]>,
}

/// Result of ingesting a recorded log.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub demo: Demonstration,
    pub warnings: Vec<String>,
}

/// Read a JSON-lines recording, one `{"frame", "joints", "points"}` object per
/// line, into a source demonstration. Clouds are cropped to `workspace`;
/// joint values outside the limits are kept and reported. Actions are the next
/// frame's joints, holding the last.
pub fn ingest_recorded_log(path: &Path, e: &Embodiment, workspace: &Aabb, initial_state: &str) -> Result<Ingested> {
    workspace.check()?;
    let file = std::fs::File::open(path).map_err(|err| Error::io(path, err))?;
    let mut records: Vec<LogRecord> = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|err| Error::io(path, err))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line).map_err(|err| Error::Parse {
            context: format!("{}:{}", path.display(), n + 1),
            message: err.to_string(),
        })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Empty("recorded log"));
    }
    records.sort_by_key(|r| r.frame);
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.frame) {
            return Err(Error::Parse {
                context: path.display().to_string(),
                message: format!("frame {} recorded twice", r.frame),
            });
        }
    }
    let last = records.last().map(|r| r.frame).unwrap_or(0);
    let gaps: Vec<usize> = (0..=last).filter(|t| !seen.contains(t)).collect();
    if !gaps.is_empty() {
        return Err(Error::MissingFrames(gaps));
    }
    let lower = e.lower_limits();
    let upper = e.upper_limits();
    let names = e.dof_names();
    let mut warnings = Vec::new();
    let mut qs = Vec::with_capacity(records.len());
    for r in &records {
        let q = JointConfiguration(r.joints.clone());
        q.check(e).map_err(|err| err.in_frame(r.frame))?;
        for (k, &v) in q.0.iter().enumerate() {
            if v < lower[k] || v > upper[k] {
                let msg = format!(
                    "frame {}: joint `{}` = {v} outside [{}, {}]",
                    r.frame, names[k], lower[k], upper[k]
                );
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        qs.push(q);
    }
    let frames = records
        .iter()
        .enumerate()
        .map(|(t, r)| {
            let raw = PointCloud::new(r.points.iter().map(|&p| Point3::from(p)).collect());
            let (arm, ee) = e.split(qs[t].as_slice());
            let (action_arm, action_ee) = e.split(qs[(t + 1).min(qs.len() - 1)].as_slice());
            DemoFrame {
                cloud: crop_workspace(&raw, workspace),
                arm,
                ee,
                action_arm,
                action_ee,
            }
        })
        .collect();
    let demo = Demonstration {
        embodiment: e.name.clone(),
        arm_dof: e.arm_indices().len(),
        ee_dof: e.ee_indices().len(),
        initial_state: initial_state.to_string(),
        seed: 0,
        frame_seeds: Vec::new(),
        frames,
    };
    demo.check()?;
    Ok(Ingested { demo, warnings })
}

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cei_core::dataset::{read_demonstration, DatasetIndex};
use cei_core::funcrep::{eval_template, WorldFuncRep};
use nalgebra::{Point3, Vector3};

use crate::retarget::Pipeline;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Scene = 0,
    Source = 1,
    Target = 2,
}

impl Label {
    fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Scene),
            1 => Some(Label::Source),
            2 => Some(Label::Target),
            _ => None,
        }
    }
}

/// Vertices with normals and labels plus correspondence edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GeometryDump {
    pub points: Vec<[f32; 3]>,
    pub normals: Vec<[f32; 3]>,
    pub labels: Vec<Label>,
    pub edges: Vec<[u32; 2]>,
}

impl GeometryDump {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    fn push(&mut self, p: &Point3<f64>, n: &Vector3<f64>, label: Label) {
        self.points.push([p.x as f32, p.y as f32, p.z as f32]);
        self.normals.push([n.x as f32, n.y as f32, n.z as f32]);
        self.labels.push(label);
    }

    fn push_rep(&mut self, rep: &WorldFuncRep, label: Label) -> u32 {
        let start = self.points.len() as u32;
        for (p, n) in rep.points.iter().zip(&rep.directions) {
            self.push(p, n, label);
        }
        start
    }

    /// ASCII PLY with a vertex element (position, normal, label) and an edge
    /// element.
    pub fn to_ply(&self, comment: &str) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "ply\nformat ascii 1.0\ncomment {comment}\nelement vertex {}\n\
             property float x\nproperty float y\nproperty float z\n\
             property float nx\nproperty float ny\nproperty float nz\n\
             property uchar label\nelement edge {}\n\
             property int vertex1\nproperty int vertex2\nend_header\n",
            self.points.len(),
            self.edges.len()
        );
        for ((p, n), l) in self.points.iter().zip(&self.normals).zip(&self.labels) {
            let _ = writeln!(s, "{} {} {} {} {} {} {}", p[0], p[1], p[2], n[0], n[1], n[2], *l as u8);
        }
        for e in &self.edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        s
    }

    /// Read back a file written by [`GeometryDump::to_ply`].
    pub fn from_ply(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("ply") {
            bail!("not a PLY file");
        }
        let (mut nv, mut ne) = (None, None);
        for line in lines.by_ref() {
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["element", "vertex", n] => nv = Some(n.parse::<usize>()?),
                ["element", "edge", n] => ne = Some(n.parse::<usize>()?),
                ["end_header"] => break,
                _ => {}
            }
        }
        let (Some(nv), Some(ne)) = (nv, ne) else {
            bail!("PLY header lacks vertex or edge counts")
        };
        let mut d = GeometryDump::default();
        for _ in 0..nv {
            let line = lines.next().context("PLY ends inside the vertex list")?;
            let w: Vec<&str> = line.split_whitespace().collect();
            if w.len() != 7 {
                bail!("vertex line has {} fields", w.len());
            }
            let f = |i: usize| w[i].parse::<f32>();
            d.points.push([f(0)?, f(1)?, f(2)?]);
            d.normals.push([f(3)?, f(4)?, f(5)?]);
            d.labels.push(Label::from_u8(w[6].parse()?).context("unknown vertex label")?);
        }
        for _ in 0..ne {
            let line = lines.next().context("PLY ends inside the edge list")?;
            let w: Vec<u32> = line.split_whitespace().map(str::parse).collect::<Result<_, _>>()?;
            if w.len() != 2 {
                bail!("edge line has {} fields", w.len());
            }
            d.edges.push([w[0], w[1]]);
        }
        Ok(d)
    }
}

/// Index in `to` of the entry matching `(p, n)` under the DCD term.
fn best_match(p: &Point3<f64>, n: &Vector3<f64>, to: &WorldFuncRep, lambda: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, (q, m)) in to.points.iter().zip(&to.directions).enumerate() {
        let c = (p - q).norm() - lambda * n.dot(m);
        if c < best.0 {
            best = (c, j);
        }
    }
    best.1
}

/// Geometry of frame `frame` of output demo `demo_id`: the stored cloud, the
/// target representation at the stored joints and, when the input dataset has
/// a demo with the same id, the source representation with one edge from
/// every target entry to its matched source entry.
pub fn cmd_inspect(p: &Pipeline, demo_id: &str, frame: usize) -> Result<GeometryDump> {
    let m = &p.manifest;
    let out_index = DatasetIndex::read(&m.output)?;
    let entry = out_index
        .demos
        .iter()
        .find(|e| e.id == demo_id)
        .with_context(|| format!("no demo `{demo_id}` in {}", m.output.display()))?;
    let out = read_demonstration(&m.output.join(&entry.path))?;
    if frame >= out.len() {
        bail!("frame {frame} out of range for demo `{demo_id}` of length {}", out.len());
    }
    let f = &out.frames[frame];
    let mut d = GeometryDump::default();
    for pt in &f.cloud.points {
        d.push(pt, &Vector3::zeros(), Label::Scene);
    }
    let q_target = p.target.merge(&f.arm, &f.ee)?;
    let target_rep = eval_template(&p.target, &p.target_template, &q_target)?;
    let source = DatasetIndex::read(&m.input)
        .ok()
        .and_then(|i| i.demos.into_iter().find(|e| e.id == demo_id))
        .map(|e| read_demonstration(&m.input.join(&e.path)))
        .transpose()?;
    let source_rep = match source {
        Some(s) if frame < s.len() => {
            let sf = &s.frames[frame];
            Some(eval_template(
                &p.source,
                &p.source_template,
                &p.source.merge(&sf.arm, &sf.ee)?,
            )?)
        }
        _ => None,
    };
    let source_start = source_rep.as_ref().map(|r| d.push_rep(r, Label::Source));
    let target_start = d.push_rep(&target_rep, Label::Target);
    if let (Some(src), Some(s0)) = (&source_rep, source_start) {
        let lambda = m.alignment.metric.lambda;
        for (i, (pt, n)) in target_rep.points.iter().zip(&target_rep.directions).enumerate() {
            d.edges
                .push([target_start + i as u32, s0 + best_match(pt, n, src, lambda) as u32]);
        }
    }
    Ok(d)
}

pub fn write_inspection(d: &GeometryDump, demo_id: &str, frame: usize, path: &Path) -> Result<()> {
    let text = d.to_ply(&format!("cei demo {demo_id} frame {frame}"));
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

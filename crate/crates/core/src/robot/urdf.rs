//! URDF subset reader: links with visual (or collision) box/mesh geometry,
//! revolute/prismatic/fixed joints with origins, axes and limits.

use std::path::Path;

use log::warn;
use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::mesh::load_mesh_file;
use super::model::{Embodiment, Geometry, JointKind, JointSpec, LinkSpec, Shape};
use crate::error::{Error, Result};
use crate::geom::{pose_from_xyz_rpy, Pose};

const IGNORED: &[&str] = &["transmission", "gazebo", "material"];
const IGNORED_JOINT: &[&str] = &["dynamics", "mimic", "safety_controller", "calibration"];

struct Ctx<'a> {
    doc: &'a Document<'a>,
    base_dir: Option<&'a Path>,
}

impl Ctx<'_> {
    fn err(&self, node: Node, message: impl Into<String>) -> Error {
        let pos = self.doc.text_pos_at(node.range().start);
        Error::Parse {
            context: format!("line {}, <{}>", pos.row, node.tag_name().name()),
            message: message.into(),
        }
    }

    fn attr<'n>(&self, node: Node<'n, '_>, name: &str) -> Result<&'n str> {
        node.attribute(name)
            .ok_or_else(|| self.err(node, format!("missing attribute `{name}`")))
    }

    fn floats(&self, node: Node, name: &str, n: usize) -> Result<Vec<f64>> {
        let raw = self.attr(node, name)?;
        let v: Vec<f64> = raw
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| self.err(node, format!("attribute `{name}`: {e}")))?;
        if v.len() != n {
            return Err(self.err(node, format!("attribute `{name}` needs {n} numbers, got {}", v.len())));
        }
        Ok(v)
    }

    fn float(&self, node: Node, name: &str) -> Result<f64> {
        self.attr(node, name)?
            .trim()
            .parse::<f64>()
            .map_err(|e| self.err(node, format!("attribute `{name}`: {e}")))
    }

    fn origin(&self, parent: Node) -> Result<Pose> {
        match child(parent, "origin") {
            None => Ok(Pose::identity()),
            Some(o) => {
                let xyz = if o.has_attribute("xyz") {
                    self.floats(o, "xyz", 3)?
                } else {
                    vec![0.0; 3]
                };
                let rpy = if o.has_attribute("rpy") {
                    self.floats(o, "rpy", 3)?
                } else {
                    vec![0.0; 3]
                };
                Ok(pose_from_xyz_rpy([xyz[0], xyz[1], xyz[2]], [rpy[0], rpy[1], rpy[2]]))
            }
        }
    }

    fn geometry(&self, holder: Node) -> Result<Option<Geometry>> {
        let origin = self.origin(holder)?;
        let Some(g) = child(holder, "geometry") else {
            return Err(self.err(holder, "missing <geometry>"));
        };
        let Some(shape_node) = g.children().find(|c| c.is_element()) else {
            return Err(self.err(g, "empty <geometry>"));
        };
        let shape = match shape_node.tag_name().name() {
            "box" => {
                let s = self.floats(shape_node, "size", 3)?;
                Shape::Box {
                    half_extents: Vector3::new(s[0], s[1], s[2]) * 0.5,
                }
            }
            "mesh" => {
                let file = self.attr(shape_node, "filename")?;
                let scale = if shape_node.has_attribute("scale") {
                    let s = self.floats(shape_node, "scale", 3)?;
                    if s[0] != s[1] || s[1] != s[2] {
                        return Err(self.err(shape_node, "only uniform mesh scale is supported"));
                    }
                    s[0]
                } else {
                    1.0
                };
                let rel = file
                    .strip_prefix("package://")
                    .or_else(|| file.strip_prefix("file://"))
                    .unwrap_or(file);
                let path = match self.base_dir {
                    Some(d) => d.join(rel),
                    None => Path::new(rel).to_path_buf(),
                };
                Shape::Mesh(load_mesh_file(&path, scale)?)
            }
            other => {
                warn!("unsupported geometry <{other}> ignored");
                return Ok(None);
            }
        };
        Ok(Some(Geometry { shape, origin }))
    }

    fn link(&self, node: Node) -> Result<LinkSpec> {
        let name = self.attr(node, "name")?;
        let mut link = LinkSpec::new(name);
        let visuals: Vec<Node> = node.children().filter(|c| c.has_tag_name("visual")).collect();
        let collisions: Vec<Node> = node.children().filter(|c| c.has_tag_name("collision")).collect();
        let holders = if visuals.is_empty() {
            if !collisions.is_empty() {
                warn!("link `{name}`: using collision geometry as surface geometry");
            }
            collisions
        } else {
            if !collisions.is_empty() {
                warn!("link `{name}`: collision geometry ignored");
            }
            visuals
        };
        for h in holders {
            if let Some(g) = self.geometry(h)? {
                link.geometry.push(g);
            }
        }
        if child(node, "inertial").is_some() {
            log::debug!("link `{name}`: inertial ignored");
        }
        Ok(link)
    }

    fn joint(&self, node: Node) -> Result<JointSpec> {
        let name = self.attr(node, "name")?.to_string();
        let kind = match self.attr(node, "type")? {
            "revolute" => JointKind::Revolute,
            "prismatic" => JointKind::Prismatic,
            "fixed" => JointKind::Fixed,
            other => return Err(self.err(node, format!("unsupported joint type `{other}`"))),
        };
        let parent = child(node, "parent").ok_or_else(|| self.err(node, "missing <parent>"))?;
        let child_node = child(node, "child").ok_or_else(|| self.err(node, "missing <child>"))?;
        let axis = match child(node, "axis") {
            Some(a) => {
                let v = self.floats(a, "xyz", 3)?;
                Vector3::new(v[0], v[1], v[2])
            }
            None => Vector3::x(),
        };
        let (lower, upper) = match (kind, child(node, "limit")) {
            (JointKind::Fixed, _) => (0.0, 0.0),
            (_, Some(l)) if l.has_attribute("lower") && l.has_attribute("upper") => {
                (self.float(l, "lower")?, self.float(l, "upper")?)
            }
            _ => {
                return Err(Error::Validation(vec![format!(
                    "joint `{name}` is actuated but has no lower/upper limits"
                )]))
            }
        };
        for c in node.children().filter(|c| c.is_element()) {
            if IGNORED_JOINT.contains(&c.tag_name().name()) {
                warn!("joint `{name}`: <{}> ignored", c.tag_name().name());
            }
        }
        Ok(JointSpec {
            name,
            kind,
            parent: self.attr(parent, "link")?.to_string(),
            child: self.attr(child_node, "link")?.to_string(),
            axis,
            origin: self.origin(node)?,
            lower,
            upper,
        })
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

/// Parse a URDF document. Mesh paths resolve against `base_dir`.
pub fn parse_urdf(text: &str, base_dir: Option<&Path>) -> Result<Embodiment> {
    let doc = Document::parse(text).map_err(|e| Error::Parse {
        context: "xml".into(),
        message: e.to_string(),
    })?;
    let ctx = Ctx { doc: &doc, base_dir };
    let root = doc.root_element();
    if !root.has_tag_name("robot") {
        return Err(ctx.err(root, "root element must be <robot>"));
    }
    let name = root.attribute("name").unwrap_or("robot");
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for c in root.children().filter(|c| c.is_element()) {
        match c.tag_name().name() {
            "link" => links.push(ctx.link(c)?),
            "joint" => joints.push(ctx.joint(c)?),
            t if IGNORED.contains(&t) => warn!("<{t}> ignored"),
            t => warn!("unknown element <{t}> ignored"),
        }
    }
    Embodiment::new(name, links, joints)
}

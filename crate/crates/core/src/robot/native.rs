//! Native JSON embodiment format. Serialization writes meshes inline and
//! rotations as matrices, so `parse(serialize(e)) == e` holds bit for bit.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::mesh::load_mesh_file;
use super::model::{Embodiment, Geometry, JointKind, JointSpec, LinkSpec, Shape, TriMesh};
use crate::error::{Error, Result};
use crate::geom::PoseDoc;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    name: String,
    links: Vec<LinkDoc>,
    #[serde(default)]
    joints: Vec<JointDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    geometry: Vec<GeometryDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryDoc {
    #[serde(default)]
    origin: PoseDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    half_extents: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh: Option<MeshDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mesh_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshDoc {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    #[serde(rename = "type")]
    kind: JointKind,
    parent: String,
    child: String,
    #[serde(default)]
    origin: PoseDoc,
    #[serde(default = "default_axis")]
    axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limit: Option<LimitDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitDoc {
    lower: f64,
    upper: f64,
}

fn default_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

pub fn parse_native(text: &str, base_dir: Option<&Path>) -> Result<Embodiment> {
    let doc: RobotDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut links = Vec::with_capacity(doc.links.len());
    for l in doc.links {
        let mut link = LinkSpec::new(l.name.clone());
        for (gi, g) in l.geometry.into_iter().enumerate() {
            let ctx = || format!("link `{}` geometry {gi}", l.name);
            let shape = match (g.half_extents, g.mesh, g.mesh_file) {
                (Some(h), None, None) => Shape::Box {
                    half_extents: Vector3::from(h),
                },
                (None, Some(m), None) => Shape::Mesh(TriMesh {
                    vertices: m.vertices.into_iter().map(Point3::from).collect(),
                    faces: m.faces,
                }),
                (None, None, Some(f)) => {
                    let path = match base_dir {
                        Some(d) => d.join(&f),
                        None => f.into(),
                    };
                    Shape::Mesh(load_mesh_file(&path, g.scale.unwrap_or(1.0))?)
                }
                _ => {
                    return Err(Error::Parse {
                        context: ctx(),
                        message: "exactly one of half_extents, mesh, mesh_file is required".into(),
                    })
                }
            };
            link.geometry.push(Geometry {
                shape,
                origin: g.origin.to_pose(),
            });
        }
        links.push(link);
    }
    let mut joints = Vec::with_capacity(doc.joints.len());
    for j in doc.joints {
        let (lower, upper) = match (j.kind, j.limit) {
            (JointKind::Fixed, l) => l.map(|l| (l.lower, l.upper)).unwrap_or((0.0, 0.0)),
            (_, Some(l)) => (l.lower, l.upper),
            (_, None) => {
                return Err(Error::Validation(vec![format!(
                    "joint `{}` is actuated but has no limits",
                    j.name
                )]))
            }
        };
        joints.push(JointSpec {
            name: j.name,
            kind: j.kind,
            parent: j.parent,
            child: j.child,
            axis: Vector3::from(j.axis),
            origin: j.origin.to_pose(),
            lower,
            upper,
        });
    }
    Embodiment::new(doc.name, links, joints)
}

pub fn to_native_json(e: &Embodiment) -> String {
    let doc = RobotDoc {
        name: e.name.clone(),
        links: e
            .links
            .iter()
            .map(|l| LinkDoc {
                name: l.name.clone(),
                geometry: l
                    .geometry
                    .iter()
                    .map(|g| {
                        let origin = PoseDoc::from_pose(&g.origin);
                        match &g.shape {
                            Shape::Box { half_extents } => GeometryDoc {
                                origin,
                                half_extents: Some([half_extents.x, half_extents.y, half_extents.z]),
                                mesh: None,
                                mesh_file: None,
                                scale: None,
                            },
                            Shape::Mesh(m) => GeometryDoc {
                                origin,
                                half_extents: None,
                                mesh: Some(MeshDoc {
                                    vertices: m.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                                    faces: m.faces.clone(),
                                }),
                                mesh_file: None,
                                scale: None,
                            },
                        }
                    })
                    .collect(),
            })
            .collect(),
        joints: e
            .joints
            .iter()
            .map(|j| JointDoc {
                name: j.name.clone(),
                kind: j.kind,
                parent: j.parent.clone(),
                child: j.child.clone(),
                origin: PoseDoc::from_pose(&j.origin),
                axis: [j.axis.x, j.axis.y, j.axis.z],
                limit: j.is_actuated().then_some(LimitDoc {
                    lower: j.lower,
                    upper: j.upper,
                }),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("robot document serializes")
}

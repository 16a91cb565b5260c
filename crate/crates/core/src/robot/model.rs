use std::collections::HashMap;
use std::fmt;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{orthonormality_error, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Motion axis in the joint frame.
    pub axis: Vector3<f64>,
    /// Parent link frame to joint frame.
    pub origin: Pose,
    pub lower: f64,
    pub upper: f64,
}

impl JointSpec {
    pub fn is_actuated(&self) -> bool {
        self.kind != JointKind::Fixed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Box { half_extents: Vector3<f64> },
    Mesh(TriMesh),
}

/// Surface geometry attached to a link, placed by `origin` in the link frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub shape: Shape,
    pub origin: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub geometry: Vec<Geometry>,
    /// Filled in when the embodiment is assembled; `None` for the root.
    pub parent_joint: Option<String>,
}

impl LinkSpec {
    pub fn new(name: impl Into<String>) -> Self {
        LinkSpec {
            name: name.into(),
            geometry: Vec::new(),
            parent_joint: None,
        }
    }

    pub fn with_geometry(mut self, g: Geometry) -> Self {
        self.geometry.push(g);
        self
    }
}

/// Joint values ordered by the embodiment's depth-first actuated joints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfiguration(pub Vec<f64>);

impl JointConfiguration {
    pub fn new(values: Vec<f64>) -> Self {
        JointConfiguration(values)
    }

    pub fn zeros(n: usize) -> Self {
        JointConfiguration(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check(&self, e: &Embodiment) -> Result<()> {
        if self.0.len() != e.dof() {
            return Err(Error::Dimension {
                what: "joint configuration",
                expected: e.dof(),
                got: self.0.len(),
            });
        }
        if let Some(k) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("joint value {k} is not finite")));
        }
        Ok(())
    }
}

impl From<Vec<f64>> for JointConfiguration {
    fn from(v: Vec<f64>) -> Self {
        JointConfiguration(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticKind {
    DuplicateIdentifier,
    NonUnitAxis,
    InvertedLimits,
    NonFiniteValue,
    EmptyMesh,
    FaceIndexOutOfRange,
    NonPositiveExtent,
    NonOrthonormalOrigin,
    PartitionOverlap,
    PartitionIncomplete,
}

impl DiagnosticKind {
    pub fn label(self) -> &'static str {
        match self {
            DiagnosticKind::DuplicateIdentifier => "duplicate identifier",
            DiagnosticKind::NonUnitAxis => "non-unit axis",
            DiagnosticKind::InvertedLimits => "inverted limits",
            DiagnosticKind::NonFiniteValue => "non-finite value",
            DiagnosticKind::EmptyMesh => "empty mesh",
            DiagnosticKind::FaceIndexOutOfRange => "face index out of range",
            DiagnosticKind::NonPositiveExtent => "non-positive extent",
            DiagnosticKind::NonOrthonormalOrigin => "non-orthonormal origin",
            DiagnosticKind::PartitionOverlap => "partition overlap",
            DiagnosticKind::PartitionIncomplete => "partition incomplete",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.kind.label(), self.subject, self.detail)
    }
}

/// A robot: links forming a tree, the joints connecting them, and the split of
/// its degrees of freedom into arm and end-effector groups.
///
/// Links and joints are stored in depth-first order from the root, children
/// visited in the order their joints were declared. That order fixes the
/// layout of [`JointConfiguration`].
#[derive(Clone, Debug)]
pub struct Embodiment {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    /// World frame to root link frame.
    pub base: Pose,
    arm: Vec<usize>,
    ee: Vec<usize>,
    topo: Topology,
}

#[derive(Clone, Debug, Default)]
struct Topology {
    /// Links reachable from the root; trailing entries of `links` beyond this
    /// are duplicates that take no part in kinematics.
    tree_links: usize,
    link_index: HashMap<String, usize>,
    joint_parent: Vec<usize>,
    joint_child: Vec<usize>,
    joint_dof: Vec<Option<usize>>,
    dof_joint: Vec<usize>,
    /// Actuated joints on the path root → link, root first, as dof indices.
    link_chain: Vec<Vec<usize>>,
}

impl PartialEq for Embodiment {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.links == other.links
            && self.joints == other.joints
            && self.base == other.base
            && self.arm == other.arm
            && self.ee == other.ee
    }
}

impl Embodiment {
    /// Assemble the kinematic tree. Fails only when no tree can be formed
    /// (unknown link references, several roots, cycles, a link with two
    /// parents). Everything else is reported by [`Embodiment::validate`].
    pub fn new(name: impl Into<String>, links: Vec<LinkSpec>, joints: Vec<JointSpec>) -> Result<Self> {
        let name = name.into();
        if links.is_empty() {
            return Err(Error::Structure("embodiment has no links".into()));
        }
        let mut first: HashMap<&str, usize> = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            first.entry(l.name.as_str()).or_insert(i);
        }
        let mut parent_of: HashMap<usize, usize> = HashMap::new();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            let p = *first.get(j.parent.as_str()).ok_or_else(|| Error::Unknown {
                kind: "parent link",
                name: j.parent.clone(),
            })?;
            let c = *first.get(j.child.as_str()).ok_or_else(|| Error::Unknown {
                kind: "child link",
                name: j.child.clone(),
            })?;
            if parent_of.insert(c, ji).is_some() {
                return Err(Error::Structure(format!("link `{}` has more than one parent joint", j.child)));
            }
            children[p].push(ji);
        }
        let roots: Vec<usize> = first.values().copied().filter(|i| !parent_of.contains_key(i)).collect();
        let root = match roots.len() {
            0 => return Err(Error::Structure("link graph has a cycle (no root link)".into())),
            1 => roots[0],
            _ => {
                let mut names: Vec<&str> = roots.iter().map(|&i| links[i].name.as_str()).collect();
                names.sort_unstable();
                return Err(Error::Structure(format!("multiple root links: {}", names.join(", "))));
            }
        };

        // Depth-first preorder from the root.
        let mut link_order = Vec::with_capacity(links.len());
        let mut joint_order = Vec::with_capacity(joints.len());
        let mut stack = vec![root];
        while let Some(l) = stack.pop() {
            link_order.push(l);
            for &ji in children[l].iter().rev() {
                stack.push(first[joints[ji].child.as_str()]);
            }
        }
        // Joint order follows link preorder: every non-root link's parent joint.
        for &l in &link_order[1..] {
            joint_order.push(parent_of[&l]);
        }
        if link_order.len() != first.len() {
            return Err(Error::Structure(
                "link graph has a cycle (links unreachable from the root)".into(),
            ));
        }

        let mut seen = vec![false; links.len()];
        let mut new_links: Vec<LinkSpec> = Vec::with_capacity(links.len());
        for &l in &link_order {
            seen[l] = true;
            let mut ls = links[l].clone();
            ls.parent_joint = parent_of.get(&l).map(|&ji| joints[ji].name.clone());
            new_links.push(ls);
        }
        let tree_links = new_links.len();
        for (i, l) in links.iter().enumerate() {
            if !seen[i] {
                let mut ls = l.clone();
                ls.parent_joint = None;
                new_links.push(ls);
            }
        }
        let new_joints: Vec<JointSpec> = joint_order.iter().map(|&ji| joints[ji].clone()).collect();

        let mut e = Embodiment {
            name,
            links: new_links,
            joints: new_joints,
            base: Pose::identity(),
            arm: Vec::new(),
            ee: Vec::new(),
            topo: Topology::default(),
        };
        e.topo = Topology::build(&e.links[..tree_links], &e.joints);
        e.arm = (0..e.dof()).collect();
        Ok(e)
    }

    pub fn dof(&self) -> usize {
        self.topo.dof_joint.len()
    }

    pub fn arm_indices(&self) -> &[usize] {
        &self.arm
    }

    pub fn ee_indices(&self) -> &[usize] {
        &self.ee
    }

    pub fn with_base(mut self, base: Pose) -> Self {
        self.base = base;
        self
    }

    /// Split the degrees of freedom into arm and end-effector groups by joint
    /// name. Both groups must be disjoint and together cover every dof.
    pub fn set_partition<S: AsRef<str>>(&mut self, arm: &[S], ee: &[S]) -> Result<()> {
        let lookup = |names: &[S]| -> Result<Vec<usize>> {
            names
                .iter()
                .map(|n| {
                    let n = n.as_ref();
                    self.joint_index(n)
                        .and_then(|ji| self.topo.joint_dof[ji])
                        .ok_or_else(|| Error::Unknown {
                            kind: "actuated joint",
                            name: n.to_string(),
                        })
                })
                .collect()
        };
        let mut arm_idx = lookup(arm)?;
        let mut ee_idx = lookup(ee)?;
        arm_idx.sort_unstable();
        ee_idx.sort_unstable();
        self.arm = arm_idx;
        self.ee = ee_idx;
        let problems: Vec<String> = self.partition_diagnostics().into_iter().map(|d| d.to_string()).collect();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(())
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.topo.link_index.get(name).copied()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Links that take part in the kinematic tree (duplicates excluded).
    pub fn tree_links(&self) -> &[LinkSpec] {
        &self.links[..self.topo.tree_links]
    }

    pub(crate) fn joint_parent_link(&self, joint: usize) -> usize {
        self.topo.joint_parent[joint]
    }

    pub(crate) fn joint_child_link(&self, joint: usize) -> usize {
        self.topo.joint_child[joint]
    }

    /// Dof index of an actuated joint.
    pub fn joint_dof(&self, joint: usize) -> Option<usize> {
        self.topo.joint_dof[joint]
    }

    /// Joint index driving each dof.
    pub fn dof_joints(&self) -> &[usize] {
        &self.topo.dof_joint
    }

    /// Actuated ancestors of a link, root first, as dof indices.
    pub fn link_chain(&self, link: usize) -> &[usize] {
        &self.topo.link_chain[link]
    }

    pub fn dof_names(&self) -> Vec<&str> {
        self.topo.dof_joint.iter().map(|&j| self.joints[j].name.as_str()).collect()
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.topo.dof_joint.iter().map(|&j| self.joints[j].lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.topo.dof_joint.iter().map(|&j| self.joints[j].upper).collect()
    }

    pub fn mid_configuration(&self) -> JointConfiguration {
        JointConfiguration(
            self.topo
                .dof_joint
                .iter()
                .map(|&j| 0.5 * (self.joints[j].lower + self.joints[j].upper))
                .collect(),
        )
    }

    pub fn clamp(&self, q: &JointConfiguration) -> JointConfiguration {
        JointConfiguration(
            q.0.iter()
                .zip(&self.topo.dof_joint)
                .map(|(&v, &j)| v.clamp(self.joints[j].lower, self.joints[j].upper))
                .collect(),
        )
    }

    pub fn split(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            self.arm.iter().map(|&i| q[i]).collect(),
            self.ee.iter().map(|&i| q[i]).collect(),
        )
    }

    pub fn merge(&self, arm: &[f64], ee: &[f64]) -> Result<JointConfiguration> {
        if arm.len() != self.arm.len() {
            return Err(Error::Dimension {
                what: "arm joints",
                expected: self.arm.len(),
                got: arm.len(),
            });
        }
        if ee.len() != self.ee.len() {
            return Err(Error::Dimension {
                what: "end-effector joints",
                expected: self.ee.len(),
                got: ee.len(),
            });
        }
        let mut q = vec![0.0; self.dof()];
        for (&i, &v) in self.arm.iter().zip(arm) {
            q[i] = v;
        }
        for (&i, &v) in self.ee.iter().zip(ee) {
            q[i] = v;
        }
        Ok(JointConfiguration(q))
    }

    /// Every violated invariant, one entry each. Empty iff the embodiment is
    /// valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let diag = |kind, subject: &str, detail: String| Diagnostic {
            kind,
            subject: subject.to_string(),
            detail,
        };

        let mut names: HashMap<&str, usize> = HashMap::new();
        for l in &self.links {
            *names.entry(l.name.as_str()).or_default() += 1;
        }
        let mut dup_links: Vec<_> = names.iter().filter(|(_, &c)| c > 1).map(|(n, _)| *n).collect();
        dup_links.sort_unstable();
        for n in dup_links {
            out.push(diag(
                DiagnosticKind::DuplicateIdentifier,
                n,
                "link name declared more than once".into(),
            ));
        }
        let mut names: HashMap<&str, usize> = HashMap::new();
        for j in &self.joints {
            *names.entry(j.name.as_str()).or_default() += 1;
        }
        let mut dup_joints: Vec<_> = names.iter().filter(|(_, &c)| c > 1).map(|(n, _)| *n).collect();
        dup_joints.sort_unstable();
        for n in dup_joints {
            out.push(diag(
                DiagnosticKind::DuplicateIdentifier,
                n,
                "joint name declared more than once".into(),
            ));
        }

        for j in &self.joints {
            let finite = j.axis.iter().all(|v| v.is_finite())
                && j.lower.is_finite()
                && j.upper.is_finite()
                && j.origin.translation.vector.iter().all(|v| v.is_finite())
                && j.origin.rotation.matrix().iter().all(|v| v.is_finite());
            if !finite {
                out.push(diag(
                    DiagnosticKind::NonFiniteValue,
                    &j.name,
                    "joint has non-finite fields".into(),
                ));
                continue;
            }
            if j.is_actuated() && (j.axis.norm() - 1.0).abs() > 1e-9 {
                out.push(diag(
                    DiagnosticKind::NonUnitAxis,
                    &j.name,
                    format!("axis norm {}", j.axis.norm()),
                ));
            }
            if j.lower > j.upper {
                out.push(diag(
                    DiagnosticKind::InvertedLimits,
                    &j.name,
                    format!("lower {} > upper {}", j.lower, j.upper),
                ));
            }
            if orthonormality_error(j.origin.rotation.matrix()) > 1e-9 {
                out.push(diag(
                    DiagnosticKind::NonOrthonormalOrigin,
                    &j.name,
                    "origin rotation is not orthonormal".into(),
                ));
            }
        }

        for l in &self.links {
            for g in &l.geometry {
                match &g.shape {
                    Shape::Box { half_extents } => {
                        if !half_extents.iter().all(|&h| h > 0.0 && h.is_finite()) {
                            out.push(diag(
                                DiagnosticKind::NonPositiveExtent,
                                &l.name,
                                format!("box half-extents {:?}", half_extents.as_slice()),
                            ));
                        }
                    }
                    Shape::Mesh(m) => {
                        if m.faces.is_empty() {
                            out.push(diag(DiagnosticKind::EmptyMesh, &l.name, "mesh has no faces".into()));
                        }
                        if let Some(f) = m.faces.iter().find(|f| f.iter().any(|&i| i >= m.vertices.len())) {
                            out.push(diag(
                                DiagnosticKind::FaceIndexOutOfRange,
                                &l.name,
                                format!("face {:?} with {} vertices", f, m.vertices.len()),
                            ));
                        }
                        if m.vertices.iter().any(|v| !v.coords.iter().all(|c| c.is_finite())) {
                            out.push(diag(
                                DiagnosticKind::NonFiniteValue,
                                &l.name,
                                "mesh vertex is not finite".into(),
                            ));
                        }
                    }
                }
            }
        }
        out.extend(self.partition_diagnostics());
        out
    }

    fn partition_diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut count = vec![0usize; self.dof()];
        for &i in self.arm.iter().chain(&self.ee) {
            if i < count.len() {
                count[i] += 1;
            }
        }
        let names = self.dof_names();
        for (i, &c) in count.iter().enumerate() {
            if c > 1 {
                out.push(Diagnostic {
                    kind: DiagnosticKind::PartitionOverlap,
                    subject: names[i].to_string(),
                    detail: "joint listed in both arm and end-effector groups".into(),
                });
            } else if c == 0 {
                out.push(Diagnostic {
                    kind: DiagnosticKind::PartitionIncomplete,
                    subject: names[i].to_string(),
                    detail: "joint assigned to neither arm nor end-effector group".into(),
                });
            }
        }
        out
    }
}

impl Topology {
    fn build(links: &[LinkSpec], joints: &[JointSpec]) -> Self {
        let link_index: HashMap<String, usize> = links.iter().enumerate().map(|(i, l)| (l.name.clone(), i)).collect();
        let mut link_parent_joint = vec![None; links.len()];
        let mut joint_parent = Vec::with_capacity(joints.len());
        let mut joint_child = Vec::with_capacity(joints.len());
        let mut joint_dof = Vec::with_capacity(joints.len());
        let mut dof_joint = Vec::new();
        for (ji, j) in joints.iter().enumerate() {
            let p = link_index[&j.parent];
            let c = link_index[&j.child];
            joint_parent.push(p);
            joint_child.push(c);
            link_parent_joint[c] = Some(ji);
            if j.is_actuated() {
                joint_dof.push(Some(dof_joint.len()));
                dof_joint.push(ji);
            } else {
                joint_dof.push(None);
            }
        }
        // Links are in preorder, so parents precede children.
        let mut link_chain: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for l in 0..links.len() {
            if let Some(ji) = link_parent_joint[l] {
                let mut chain = link_chain[joint_parent[ji]].clone();
                if let Some(d) = joint_dof[ji] {
                    chain.push(d);
                }
                link_chain[l] = chain;
            }
        }
        Topology {
            tree_links: links.len(),
            link_index,
            joint_parent,
            joint_child,
            joint_dof,
            dof_joint,
            link_chain,
        }
    }
}

//! Robot descriptions: kinematic tree, joint limits and link surface geometry.

mod manifest;
pub mod mesh;
mod model;
mod native;
mod urdf;

use std::path::Path;

pub use manifest::{load_embodiment, EmbodimentManifest};
pub use mesh::{sample_link_surface, SurfaceSample};
pub use model::{
    Diagnostic, DiagnosticKind, Embodiment, Geometry, JointConfiguration, JointKind, JointSpec, LinkSpec, Shape, TriMesh,
};
pub use native::to_native_json;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescriptionFormat {
    Urdf,
    Native,
}

impl DescriptionFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => DescriptionFormat::Native,
            _ => DescriptionFormat::Urdf,
        }
    }
}

/// Parse and validate a robot description. Mesh references resolve against
/// `base_dir` when given.
pub fn parse_robot_description(text: &str, format: DescriptionFormat, base_dir: Option<&Path>) -> Result<Embodiment> {
    let e = match format {
        DescriptionFormat::Urdf => urdf::parse_urdf(text, base_dir)?,
        DescriptionFormat::Native => native::parse_native(text, base_dir)?,
    };
    let diags = validate_embodiment(&e);
    if !diags.is_empty() {
        return Err(Error::Validation(diags.iter().map(|d| d.to_string()).collect()));
    }
    Ok(e)
}

pub fn validate_embodiment(e: &Embodiment) -> Vec<Diagnostic> {
    e.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    const PLANAR: &str = r#"<?xml version="1.0"?>
<robot name="planar">
  <link name="base"/>
  <link name="upper"/>
  <link name="tip"/>
  <joint name="shoulder" type="revolute">
    <parent link="base"/><child link="upper"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.141592653589793" upper="3.141592653589793"/>
  </joint>
  <joint name="elbow" type="revolute">
    <parent link="upper"/><child link="tip"/>
    <origin xyz="1 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="-3.141592653589793" upper="3.141592653589793"/>
  </joint>
  <transmission name="t"/>
</robot>"#;

    #[test]
    fn planar_arm_parses() {
        let e = parse_robot_description(PLANAR, DescriptionFormat::Urdf, None).unwrap();
        assert_eq!(e.dof(), 2);
        assert_eq!(e.dof_names(), vec!["shoulder", "elbow"]);
        // Depth: tip hangs two joints below the root.
        let tip = e.link_index("tip").unwrap();
        assert_eq!(e.link_chain(tip), &[0, 1]);
        assert!(validate_embodiment(&e).is_empty());
    }

    #[test]
    fn inverted_limits_fail_validation() {
        let doc = PLANAR.replacen(
            r#"lower="-3.141592653589793" upper="3.141592653589793""#,
            r#"lower="1.0" upper="0.5""#,
            1,
        );
        let err = parse_robot_description(&doc, DescriptionFormat::Urdf, None).unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref v) if v[0].contains("inverted limits")),
            "{err}"
        );
    }

    #[test]
    fn missing_limits_fail_validation() {
        let doc = PLANAR.replacen(r#"<limit lower="-3.141592653589793" upper="3.141592653589793"/>"#, "", 1);
        let err = parse_robot_description(&doc, DescriptionFormat::Urdf, None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err = parse_robot_description("<robot><link name='a'></robot>", DescriptionFormat::Urdf, None).unwrap_err();
        match err {
            Error::Parse { message, .. } => assert!(message.contains("1:"), "{message}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_attribute_reports_line_and_element() {
        let doc = PLANAR.replacen(r#"<origin xyz="1 0 0"/>"#, r#"<origin xyz="1 0"/>"#, 1);
        let err = parse_robot_description(&doc, DescriptionFormat::Urdf, None).unwrap_err();
        match err {
            Error::Parse { context, .. } => assert_eq!(context, "line 13, <origin>"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn cyclic_graph_is_structure_error() {
        let doc = r#"<robot name="c">
          <link name="a"/><link name="b"/><link name="r"/>
          <joint name="j0" type="fixed"><parent link="r"/><child link="r"/></joint>
          <joint name="j1" type="fixed"><parent link="a"/><child link="b"/></joint>
          <joint name="j2" type="fixed"><parent link="b"/><child link="a"/></joint>
        </robot>"#;
        let err = parse_robot_description(doc, DescriptionFormat::Urdf, None).unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "{err}");
    }

    #[test]
    fn two_roots_is_structure_error() {
        let doc = r#"<robot name="c"><link name="a"/><link name="b"/></robot>"#;
        assert!(matches!(
            parse_robot_description(doc, DescriptionFormat::Urdf, None),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn non_unit_axis_is_one_diagnostic() {
        let mut e = parse_robot_description(PLANAR, DescriptionFormat::Urdf, None).unwrap();
        e.joints[0].axis = Vector3::new(0.0, 0.0, 0.9);
        let d = validate_embodiment(&e);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::NonUnitAxis);
        assert_eq!(d[0].kind.label(), "non-unit axis");
    }

    #[test]
    fn duplicate_link_name_is_one_diagnostic() {
        let mut links = vec![LinkSpec::new("base"), LinkSpec::new("tip")];
        links.push(LinkSpec::new("tip"));
        let joints = vec![JointSpec {
            name: "j".into(),
            kind: JointKind::Fixed,
            parent: "base".into(),
            child: "tip".into(),
            axis: Vector3::x(),
            origin: crate::geom::Pose::identity(),
            lower: 0.0,
            upper: 0.0,
        }];
        let e = Embodiment::new("dup", links, joints).unwrap();
        let d = validate_embodiment(&e);
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].kind.label(), "duplicate identifier");
    }

    #[test]
    fn native_round_trip_is_exact() {
        let e = parse_robot_description(PLANAR, DescriptionFormat::Urdf, None).unwrap();
        let text = to_native_json(&e);
        let back = parse_robot_description(&text, DescriptionFormat::Native, None).unwrap();
        assert_eq!(back, e);
        assert_eq!(to_native_json(&back), text);
    }

    #[test]
    fn unsupported_joint_type_is_parse_error() {
        let doc = PLANAR.replacen(r#"type="revolute""#, r#"type="continuous""#, 1);
        assert!(matches!(
            parse_robot_description(&doc, DescriptionFormat::Urdf, None),
            Err(Error::Parse { .. })
        ));
    }
}

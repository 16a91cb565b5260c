//! Link surface geometry: triangulation, outward orientation, area-weighted
//! sampling, and OBJ/STL loading.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Embodiment, Geometry, Shape, TriMesh};
use crate::error::{Error, Result};

pub type Triangle = [Point3<f64>; 3];

/// A sampled surface point with its outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
    /// Index into the triangle list the sample was drawn from.
    pub face: usize,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn box_triangles(h: &Vector3<f64>) -> Vec<Triangle> {
    let c = |sx: f64, sy: f64, sz: f64| Point3::new(sx * h.x, sy * h.y, sz * h.z);
    // Each quad listed counter-clockwise seen from outside.
    let quads = [
        [c(1., -1., -1.), c(1., 1., -1.), c(1., 1., 1.), c(1., -1., 1.)],
        [c(-1., -1., -1.), c(-1., -1., 1.), c(-1., 1., 1.), c(-1., 1., -1.)],
        [c(-1., 1., -1.), c(-1., 1., 1.), c(1., 1., 1.), c(1., 1., -1.)],
        [c(-1., -1., -1.), c(1., -1., -1.), c(1., -1., 1.), c(-1., -1., 1.)],
        [c(-1., -1., 1.), c(1., -1., 1.), c(1., 1., 1.), c(-1., 1., 1.)],
        [c(-1., -1., -1.), c(-1., 1., -1.), c(1., 1., -1.), c(1., -1., -1.)],
    ];
    quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect()
}

fn mesh_triangles(m: &TriMesh) -> Vec<Triangle> {
    let mut tris: Vec<Triangle> = m
        .faces
        .iter()
        .map(|f| [m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]])
        .collect();
    if tris.is_empty() {
        return tris;
    }
    // Outward orientation by majority vote against the vertex centroid. Ties
    // (e.g. planar meshes) keep the authored winding.
    let centroid = m.vertices.iter().fold(Vector3::zeros(), |acc, v| acc + v.coords) / m.vertices.len() as f64;
    let (mut out, mut inward) = (0usize, 0usize);
    for t in &tris {
        let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
        let fc = (t[0].coords + t[1].coords + t[2].coords) / 3.0;
        let s = n.dot(&(fc - centroid));
        if s > 0.0 {
            out += 1;
        } else if s < 0.0 {
            inward += 1;
        }
    }
    if inward > out {
        for t in &mut tris {
            t.swap(1, 2);
        }
    }
    tris
}

impl Geometry {
    /// Triangles in the link frame, wound so that the right-hand normal points
    /// outward.
    pub fn triangles(&self) -> Vec<Triangle> {
        let local = match &self.shape {
            Shape::Box { half_extents } => box_triangles(half_extents),
            Shape::Mesh(m) => mesh_triangles(m),
        };
        local.into_iter().map(|t| t.map(|p| self.origin * p)).collect()
    }
}

pub fn triangle_area(t: &Triangle) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}

pub fn triangle_normal(t: &Triangle) -> Vector3<f64> {
    (t[1] - t[0]).cross(&(t[2] - t[0])).normalize()
}

/// Area-weighted uniform samples over a triangle soup. Degenerate (zero-area)
/// triangles are never selected.
pub fn sample_triangles<R: Rng + ?Sized>(tris: &[Triangle], count: usize, rng: &mut R) -> Result<Vec<SurfaceSample>> {
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for t in tris {
        total += triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("surface has zero area".into()));
    }
    let normals: Vec<Vector3<f64>> = tris
        .iter()
        .map(|t| {
            let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vector3::zeros()
            }
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * total;
        let face = cumulative.partition_point(|&c| c <= u).min(tris.len() - 1);
        let t = &tris[face];
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let (a, b, c) = (1.0 - s, s * (1.0 - r2), s * r2);
        let point = Point3::from(t[0].coords * a + t[1].coords * b + t[2].coords * c);
        out.push(SurfaceSample {
            point,
            normal: normals[face],
            face,
        });
    }
    Ok(out)
}

/// All geometry triangles of one link, in the link frame.
pub fn link_triangles(e: &Embodiment, link: usize) -> Vec<Triangle> {
    e.links[link].geometry.iter().flat_map(|g| g.triangles()).collect()
}

/// `count` area-weighted samples on the surface of `link`, in its local frame.
pub fn sample_link_surface(e: &Embodiment, link: &str, count: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
    let li = e.link_index(link).ok_or_else(|| Error::Unknown {
        kind: "link",
        name: link.to_string(),
    })?;
    let tris = link_triangles(e, li);
    if tris.is_empty() {
        return Err(Error::NoGeometry(link.to_string()));
    }
    sample_triangles(&tris, count, &mut rng_from_seed(seed))
}

pub fn load_mesh_file(path: &Path, scale: f64) -> Result<TriMesh> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let mut mesh = match ext.as_str() {
        "obj" => parse_obj(&String::from_utf8_lossy(&bytes), path)?,
        "stl" => parse_stl(&bytes, path)?,
        other => {
            return Err(Error::Parse {
                context: path.display().to_string(),
                message: format!("unsupported mesh extension `{other}`"),
            })
        }
    };
    if scale != 1.0 {
        for v in &mut mesh.vertices {
            v.coords *= scale;
        }
    }
    Ok(mesh)
}

/// Vertices (`v`) and faces (`f`) only; polygons are fan-triangulated.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriMesh> {
    let perr = |line: usize, message: String| Error::Parse {
        context: format!("{}:{}", path.display(), line),
        message,
    };
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| perr(ln + 1, e.to_string())))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(perr(ln + 1, "vertex needs three coordinates".into()));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| {
                        let first = s.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| perr(ln + 1, format!("bad face index `{s}`")))?;
                        let n = vertices.len() as i64;
                        let abs = if i < 0 { n + i } else { i - 1 };
                        if abs < 0 {
                            return Err(perr(ln + 1, format!("face index `{s}` out of range")));
                        }
                        Ok(abs as usize)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(perr(ln + 1, "face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(TriMesh { vertices, faces })
}

/// ASCII or binary STL. Vertices are not welded.
pub fn parse_stl(bytes: &[u8], path: &Path) -> Result<TriMesh> {
    let perr = |message: String| Error::Parse {
        context: path.display().to_string(),
        message,
    };
    let is_ascii = bytes.starts_with(b"solid") && std::str::from_utf8(bytes).map(|s| s.contains("facet")).unwrap_or(false);
    let mut vertices = Vec::new();
    if is_ascii {
        let text = std::str::from_utf8(bytes).map_err(|e| perr(e.to_string()))?;
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if it.next() == Some("vertex") {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| perr(e.to_string())))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(perr("vertex needs three coordinates".into()));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
        }
    } else {
        if bytes.len() < 84 {
            return Err(perr("binary STL shorter than its header".into()));
        }
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if bytes.len() < 84 + 50 * n {
            return Err(perr(format!("binary STL declares {n} triangles but is truncated")));
        }
        for t in 0..n {
            let base = 84 + 50 * t + 12;
            for v in 0..3 {
                let o = base + 12 * v;
                let f = |k: usize| f32::from_le_bytes(bytes[o + 4 * k..o + 4 * k + 4].try_into().unwrap()) as f64;
                vertices.push(Point3::new(f(0), f(1), f(2)));
            }
        }
    }
    if vertices.len() % 3 != 0 {
        return Err(perr("vertex count is not a multiple of three".into()));
    }
    let faces = (0..vertices.len() / 3).map(|t| [3 * t, 3 * t + 1, 3 * t + 2]).collect();
    Ok(TriMesh { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use crate::robot::model::LinkSpec;

    fn single_link(shape: Shape) -> Embodiment {
        let link = LinkSpec::new("body").with_geometry(Geometry {
            shape,
            origin: Pose::identity(),
        });
        Embodiment::new("solo", vec![link], vec![]).unwrap()
    }

    fn point_face_distance(p: &Point3<f64>, t: &Triangle) -> (f64, [f64; 3]) {
        let n = triangle_normal(t);
        let plane = (p - t[0]).dot(&n).abs();
        // Barycentric coordinates of the projection.
        let v0 = t[1] - t[0];
        let v1 = t[2] - t[0];
        let v2 = p - t[0];
        let d00 = v0.dot(&v0);
        let d01 = v0.dot(&v1);
        let d11 = v1.dot(&v1);
        let d20 = v2.dot(&v0);
        let d21 = v2.dot(&v1);
        let den = d00 * d11 - d01 * d01;
        let b = (d11 * d20 - d01 * d21) / den;
        let c = (d00 * d21 - d01 * d20) / den;
        (plane, [1.0 - b - c, b, c])
    }

    #[test]
    fn box_samples_lie_on_faces_with_axis_normals() {
        let e = single_link(Shape::Box {
            half_extents: Vector3::new(0.5, 0.5, 0.5),
        });
        let s = sample_link_surface(&e, "body", 600, 3).unwrap();
        assert_eq!(s.len(), 600);
        for smp in &s {
            let n = smp.normal;
            let axis = n.iamax();
            assert!((n[axis].abs() - 1.0).abs() < 1e-12);
            assert!((smp.point[axis] - 0.5 * n[axis]).abs() < 1e-12);
            // Outward: away from the center.
            assert!(smp.point.coords.dot(&n) > 0.0);
        }
    }

    #[test]
    fn single_triangle_samples_have_valid_barycentrics() {
        let tri = TriMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.2, 0.7, 0.3),
            ],
            faces: vec![[0, 1, 2]],
        };
        let e = single_link(Shape::Mesh(tri));
        let tris = link_triangles(&e, 0);
        let s = sample_link_surface(&e, "body", 10, 0).unwrap();
        assert_eq!(s.len(), 10);
        for smp in s {
            let (plane, bary) = point_face_distance(&smp.point, &tris[0]);
            assert!(plane <= 1e-9);
            assert!(bary.iter().all(|&b| b >= -1e-12));
            assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn area_ratio_nine_to_one_within_three_sigma() {
        // Two disjoint right triangles with legs 3 and 1: areas 4.5 and 0.5.
        let mesh = TriMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(3.0, 0.0, 0.0),
                Point3::new(0.0, 3.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(11.0, 0.0, 0.0),
                Point3::new(10.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2], [3, 4, 5]],
        };
        let e = single_link(Shape::Mesh(mesh));
        let s = sample_link_surface(&e, "body", 10_000, 0).unwrap();
        let big = s.iter().filter(|x| x.face == 0).count() as f64;
        // Binomial(10000, 0.9): mean 9000, sigma 30.
        let sigma = (10_000.0f64 * 0.9 * 0.1).sqrt();
        assert!((big - 9000.0).abs() <= 3.0 * sigma, "big = {big}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let e = single_link(Shape::Box {
            half_extents: Vector3::new(0.1, 0.2, 0.3),
        });
        let a = sample_link_surface(&e, "body", 50, 11).unwrap();
        let b = sample_link_surface(&e, "body", 50, 11).unwrap();
        let c = sample_link_surface(&e, "body", 50, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn link_without_geometry_is_an_error() {
        let e = Embodiment::new("bare", vec![LinkSpec::new("body")], vec![]).unwrap();
        assert!(matches!(sample_link_surface(&e, "body", 4, 0), Err(Error::NoGeometry(_))));
    }

    #[test]
    fn inward_wound_mesh_is_flipped() {
        // Tetrahedron wound inward.
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let outward = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
        let inward: Vec<[usize; 3]> = outward.iter().map(|f| [f[0], f[2], f[1]]).collect();
        let c = Vector3::new(0.25, 0.25, 0.25);
        for faces in [outward, inward] {
            let g = Geometry {
                shape: Shape::Mesh(TriMesh {
                    vertices: v.clone(),
                    faces,
                }),
                origin: Pose::identity(),
            };
            for t in g.triangles() {
                let fc = (t[0].coords + t[1].coords + t[2].coords) / 3.0;
                assert!(triangle_normal(&t).dot(&(fc - c)) > 0.0);
            }
        }
    }

    #[test]
    fn obj_and_ascii_stl_parse() {
        let obj = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m = parse_obj(obj, Path::new("q.obj")).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        let stl =
            "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
        let m = parse_stl(stl.as_bytes(), Path::new("t.stl")).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }
}

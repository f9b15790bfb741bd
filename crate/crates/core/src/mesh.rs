//! Triangle meshes and the OBJ subset used for mesh-sequence I/O.
//!
//! Only `v x y z` and `f i j k` lines are meaningful; every other line type
//! is ignored. Faces are 1-based index triples and must reference three
//! distinct in-range vertices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh, validating the face invariants (in-range, distinct).
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for face in &faces {
            for &i in face {
                if i >= vertices.len() {
                    return Err(Error::FaceIndexOutOfRange {
                        line: 0,
                        index: i + 1,
                        vertices: vertices.len(),
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::DegenerateFace { line: 0 });
            }
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum: Vector3<f64> = self.vertices.iter().map(|p| p.coords).sum();
        Point3::from(sum / self.vertices.len() as f64)
    }
}

/// Parses the OBJ subset from `path`.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let text = fs::read_to_string(path)?;
    parse_obj(&text)
}

/// Parses the OBJ subset from an in-memory string.
pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    // Faces keep their source line for error reporting until validated.
    let mut faces: Vec<([usize; 3], usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for coord in &mut coords {
                    let tok = tokens.next().ok_or_else(|| Error::ObjParse {
                        line: line_no,
                        msg: "vertex line needs three coordinates".into(),
                    })?;
                    *coord = tok.parse::<f64>().map_err(|_| Error::ObjParse {
                        line: line_no,
                        msg: format!("invalid coordinate `{tok}`"),
                    })?;
                }
                if tokens.next().is_some() {
                    return Err(Error::ObjParse {
                        line: line_no,
                        msg: "vertex line has more than three coordinates".into(),
                    });
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idxs = [0usize; 3];
                for slot in &mut idxs {
                    let tok = tokens.next().ok_or_else(|| Error::ObjParse {
                        line: line_no,
                        msg: "face line needs three indices".into(),
                    })?;
                    let one_based: usize = tok.parse().map_err(|_| Error::ObjParse {
                        line: line_no,
                        msg: format!("invalid face index `{tok}`"),
                    })?;
                    if one_based == 0 {
                        return Err(Error::FaceIndexOutOfRange {
                            line: line_no,
                            index: 0,
                            vertices: 0,
                        });
                    }
                    *slot = one_based - 1;
                }
                if tokens.next().is_some() {
                    return Err(Error::ObjParse {
                        line: line_no,
                        msg: "face line has more than three indices".into(),
                    });
                }
                faces.push((idxs, line_no));
            }
            _ => {} // ignore comments, empty lines, and other line types
        }
    }

    if vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut validated = Vec::with_capacity(faces.len());
    for (face, line_no) in faces {
        for &i in &face {
            if i >= vertices.len() {
                return Err(Error::FaceIndexOutOfRange {
                    line: line_no,
                    index: i + 1,
                    vertices: vertices.len(),
                });
            }
        }
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
            return Err(Error::DegenerateFace { line: line_no });
        }
        validated.push(face);
    }
    Ok(TriMesh {
        vertices,
        faces: validated,
    })
}

/// Writes the mesh in the OBJ subset. Float formatting round-trips bit-exact
/// through `parse_obj`.
pub fn save_mesh(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    fs::write(path, format_obj(mesh))?;
    Ok(())
}

pub fn format_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 32 + mesh.faces.len() * 16);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// Keeps vertices within `radius` of `origin`, drops faces that reference a
/// removed vertex, and reindexes the survivors.
pub fn crop_face(mesh: &TriMesh, origin: &Point3<f64>, radius: f64) -> Result<TriMesh> {
    assert!(radius > 0.0, "crop radius must be positive");
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut kept = Vec::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        if (v - origin).norm() <= radius {
            remap[i] = kept.len();
            kept.push(*v);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyCrop { radius });
    }
    let faces = mesh
        .faces
        .iter()
        .filter(|f| f.iter().all(|&i| remap[i] != usize::MAX))
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    Ok(TriMesh {
        vertices: kept,
        faces,
    })
}

/// Returns the vertex with the largest projection onto `axis`; ties resolve
/// to the lowest vertex index.
pub fn find_nose_tip(mesh: &TriMesh, axis: &Vector3<f64>) -> Result<Point3<f64>> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut best = 0;
    let mut best_proj = mesh.vertices[0].coords.dot(axis);
    for (i, v) in mesh.vertices.iter().enumerate().skip(1) {
        let proj = v.coords.dot(axis);
        if proj > best_proj {
            best = i;
            best_proj = proj;
        }
    }
    Ok(mesh.vertices[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_mesh_parses() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let mesh = parse_obj(obj).unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert_eq!(mesh.face_count(), 1);
        assert_eq!(mesh.faces[0], [0, 1, 2]);
    }

    #[test]
    fn out_of_range_face_index_is_rejected() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n";
        match parse_obj(obj) {
            Err(Error::FaceIndexOutOfRange { index: 5, .. }) => {}
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n";
        assert!(matches!(parse_obj(obj), Err(Error::DegenerateFace { .. })));
    }

    #[test]
    fn malformed_lines_are_rejected_other_lines_ignored() {
        assert!(matches!(
            parse_obj("v 0 0\n"),
            Err(Error::ObjParse { line: 1, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 zero\n"),
            Err(Error::ObjParse { .. })
        ));
        let mesh = parse_obj("# comment\nvn 1 0 0\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(mesh.vertex_count(), 3);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        assert!(matches!(parse_obj("# nothing\n"), Err(Error::EmptyMesh)));
    }

    #[test]
    fn obj_round_trip_is_bit_exact() {
        let mesh = TriMesh::new(
            vec![
                Point3::new(0.1 + 0.2, -1.5e-7, 3.0f64.sqrt()),
                Point3::new(1.0, 2.0, std::f64::consts::PI),
                Point3::new(-0.0, 1e300, 5e-324),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let text = format_obj(&mesh);
        let back = parse_obj(&text).unwrap();
        for (a, b) in mesh.vertices.iter().zip(&back.vertices) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
        assert_eq!(format_obj(&back), text);
    }

    #[test]
    fn crop_keeps_distance_filtered_vertices() {
        // Brute-force distance filter is the oracle.
        let mesh = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(0.3, 0.0, 0.0),
                Point3::new(0.0, 0.4, 0.0),
                Point3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let origin = Point3::new(0.0, 0.0, 0.0);
        let cropped = crop_face(&mesh, &origin, 0.5).unwrap();
        let expected: Vec<_> = mesh
            .vertices
            .iter()
            .filter(|v| (*v - origin).norm() <= 0.5)
            .copied()
            .collect();
        assert_eq!(cropped.vertices, expected);
        // The face touching the removed vertex is gone.
        assert_eq!(cropped.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn crop_with_large_radius_is_identity() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        let cropped = crop_face(&mesh, &Point3::new(0.0, 0.0, 0.0), 100.0).unwrap();
        assert_eq!(cropped, mesh);
    }

    #[test]
    fn crop_to_nothing_is_an_error() {
        let mesh = parse_obj("v 5 0 0\nv 6 0 0\nv 5 1 0\nf 1 2 3\n").unwrap();
        assert!(matches!(
            crop_face(&mesh, &Point3::new(0.0, 0.0, 0.0), 1.0),
            Err(Error::EmptyCrop { .. })
        ));
    }

    #[test]
    fn nose_tip_tie_breaks_to_lowest_index() {
        // All vertices of a z=0 plane project equally onto +z.
        let mesh = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let tip = find_nose_tip(&mesh, &Vector3::z()).unwrap();
        assert_eq!(tip, mesh.vertices[0]);
    }
}

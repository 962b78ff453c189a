//! Wavefront OBJ triangle meshes (`v` and `f` records only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cppcn_core::geom::{Point3, TriangleMesh};

use crate::error::{Error, Result, ResultExt};

/// Parse OBJ text. Polygons are fan-triangulated from their first vertex;
/// `v/vt/vn` forms and negative (relative) indices are accepted.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut verts = Vec::new();
    let mut tris: Vec<[u32; 3]> = Vec::new();
    let mut tri_lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let err = |m: String| Error::parse(path, format!("line {ln}"), m);
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .by_ref()
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad coordinate `{t}`"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                let p = Point3::new(c[0], c[1], c[2]);
                if !p.is_finite() {
                    return Err(err("non-finite vertex".into()));
                }
                verts.push(p);
            }
            Some("f") => {
                let idx = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let v: i64 = head.parse().map_err(|_| err(format!("bad face index `{t}`")))?;
                        let n = verts.len() as i64;
                        let abs = if v > 0 { v - 1 } else { n + v };
                        if v == 0 || abs < 0 || abs >= n {
                            return Err(err(format!("face index {v} out of range (1..={n})")));
                        }
                        Ok(abs as u32)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if idx.len() < 3 {
                    return Err(err(format!("face has {} vertices, need at least 3", idx.len())));
                }
                for w in 1..idx.len() - 1 {
                    tris.push([idx[0], idx[w], idx[w + 1]]);
                    tri_lines.push(ln);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(verts, tris).map_err(|e| match e {
        cppcn_core::Error::DegenerateTriangle { index, .. } => {
            Error::parse(path, format!("line {}", tri_lines[index]), e.to_string())
        }
        other => Error::data(path, other),
    })
}

pub fn obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.vertices().len() + mesh.len()));
    for v in mesh.vertices() {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in mesh.triangles() {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path).at(path)?;
    parse_obj(&text, path)
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    fs::write(path, obj_string(mesh)).at(path)
}

use alloc::vec::Vec;

use rand::Rng;

use super::{Aabb, Point3};
use crate::{Error, Result};

/// Triangles with area at or below this (m²) are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh. Every index is in range and no triangle is degenerate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(Error::non_finite(alloc::format!("vertex {i}")));
        }
        let n = vertices.len();
        for t in &triangles {
            for &i in t {
                if i as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "mesh vertices",
                        index: i as usize,
                        len: n,
                    });
                }
            }
        }
        let mesh = TriangleMesh {
            vertices,
            triangles,
        };
        for i in 0..mesh.triangles.len() {
            let area = mesh.area(i);
            if area.is_nan() || area <= MIN_TRIANGLE_AREA {
                return Err(Error::DegenerateTriangle { index: i, area });
            }
        }
        Ok(mesh)
    }

    pub fn empty() -> Self {
        TriangleMesh::default()
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        (b - a).cross(c - a).norm() * 0.5
    }

    pub fn triangle_aabb(&self, i: usize) -> Aabb {
        let [a, b, c] = self.triangle(i);
        let mut bb = Aabb::from_point(a);
        bb.grow(b);
        bb.grow(c);
        bb
    }

    pub fn aabb(&self) -> Result<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    pub fn translate(&mut self, offset: Point3) {
        for v in &mut self.vertices {
            *v += offset;
        }
    }

    pub fn map_vertices(&mut self, mut f: impl FnMut(Point3) -> Point3) {
        for v in &mut self.vertices {
            *v = f(*v);
        }
    }

    /// Merge meshes, re-basing indices.
    pub fn concat(meshes: &[&TriangleMesh]) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles
                .extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
        }
        out
    }

    /// Area-weighted uniform samples on the surface. Returns the points and the
    /// triangle each was drawn from.
    pub fn sample_surface<R: Rng>(&self, count: usize, rng: &mut R) -> Result<(Vec<Point3>, Vec<usize>)> {
        if self.is_empty() {
            return Err(Error::Empty { what: "mesh" });
        }
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.area(i);
            cdf.push(acc);
        }
        let mut pts = Vec::with_capacity(count);
        let mut tris = Vec::with_capacity(count);
        for _ in 0..count {
            let r = rng.random::<f64>() * acc;
            let t = cdf.partition_point(|&c| c <= r).min(self.len() - 1);
            let [a, b, c] = self.triangle(t);
            let mut u = rng.random::<f64>();
            let mut v = rng.random::<f64>();
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            pts.push(a + (b - a) * u + (c - a) * v);
            tris.push(t);
        }
        Ok((pts, tris))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tri() -> Vec<Point3> {
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            TriangleMesh::new(tri(), vec![[0, 1, 3]]),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn degenerate_rejected() {
        let v = vec![Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 2]]),
            Err(Error::DegenerateTriangle { index: 0, .. })
        ));
    }

    #[test]
    fn samples_lie_on_triangle() {
        let m = TriangleMesh::new(tri(), vec![[0, 1, 2]]).unwrap();
        let mut rng = crate::rng::rng_from_seed(3);
        let (pts, tris) = m.sample_surface(200, &mut rng).unwrap();
        assert!(tris.iter().all(|&t| t == 0));
        for p in pts {
            assert_eq!(p.z, 0.0);
            assert!(p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0 + 1e-12);
        }
    }
}

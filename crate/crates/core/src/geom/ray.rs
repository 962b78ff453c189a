use super::Point3;
use crate::{Error, Result};

/// Half-line with a unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Point3,
}

impl Ray {
    /// Normalises `direction`.
    pub fn new(origin: Point3, direction: Point3) -> Result<Self> {
        let n = direction.norm();
        if !origin.is_finite() || !n.is_finite() {
            return Err(Error::non_finite("ray"));
        }
        if n == 0.0 {
            return Err(Error::invalid("ray", "zero direction"));
        }
        Ok(Ray {
            origin,
            direction: direction / n,
        })
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

/// Möller–Trumbore intersection restricted to the open segment `(eps, t_max - eps)`.
///
/// Hits on triangle edges and vertices count. Degenerate triangles and rays
/// parallel to the triangle plane never hit.
pub fn intersect_ray_triangle(ray: &Ray, tri: &[Point3; 3], t_max: f64, eps: f64) -> Option<f64> {
    let [v0, v1, v2] = *tri;
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    let scale = e1.norm() * e2.norm();
    if !(det.abs() > 1e-12 * scale) {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = ray.origin - v0;
    let u = tvec.dot(pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.direction.dot(qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv;
    (t > eps && t < t_max - eps).then_some(t)
}

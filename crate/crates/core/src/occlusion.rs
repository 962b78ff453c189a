//! Ray-traced surface/occluded labelling.
//!
//! A point is a surface point if at least one camera sees it, and occluded if
//! the segment towards every camera crosses the scene mesh.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use crate::geom::{intersect_ray_triangle, Ray};
use crate::geom::{Aabb, Bvh, Point3, PointCloud, TriangleMesh};
use crate::{math, Error, Result};

/// Default offset that lifts a ray's origin off the surface the point was sampled on.
pub const DEFAULT_SELF_EPS: f64 = 1e-4;

/// Parametric tolerance passed to the triangle test once the origin is lifted.
pub const INTERSECT_EPS: f64 = 1e-12;

/// Camera optical centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    positions: Vec<Point3>,
}

impl CameraRig {
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty { what: "camera rig" });
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::non_finite("camera position"));
        }
        Ok(CameraRig { positions })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Error if any camera sits inside the scene box.
    pub fn check_outside(&self, scene: &Aabb) -> Result<()> {
        match self.positions.iter().position(|p| scene.contains(*p)) {
            Some(i) => Err(Error::invalid(
                "camera rig",
                alloc::format!("camera {i} lies inside the scene bounds"),
            )),
            None => Ok(()),
        }
    }
}

/// `count` cameras evenly spaced in azimuth (starting at 0°) on a circle of
/// horizontal radius `distance * cos(elevation)`, `distance * sin(elevation)`
/// above `center`.
pub fn ring_cameras(center: Point3, distance: f64, elevation_deg: f64, count: usize) -> Result<CameraRig> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::invalid("camera distance", "must be positive"));
    }
    if count == 0 {
        return Err(Error::invalid("camera count", "must be at least 1"));
    }
    let (se, ce) = math::sin_cos_deg(elevation_deg);
    let radius = distance * ce;
    let height = distance * se;
    let positions = (0..count)
        .map(|i| {
            let az = 2.0 * core::f64::consts::PI * i as f64 / count as f64;
            let (sa, ca) = math::sin_cos(az);
            center + Point3::new(radius * ca, radius * sa, height)
        })
        .collect();
    CameraRig::new(positions)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Surface,
    Occluded,
}

/// Per-point labels; a point is occluded iff every view is blocked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OcclusionLabels {
    blocked: Vec<u32>,
    views: u32,
}

impl OcclusionLabels {
    pub fn from_blocked(blocked: Vec<u32>, views: u32) -> Self {
        OcclusionLabels { blocked, views }
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn views(&self) -> u32 {
        self.views
    }

    /// Number of cameras whose view of each point is blocked.
    pub fn blocked_views(&self) -> &[u32] {
        &self.blocked
    }

    pub fn is_occluded(&self, i: usize) -> bool {
        self.blocked[i] == self.views
    }

    pub fn visibility(&self, i: usize) -> Visibility {
        if self.is_occluded(i) {
            Visibility::Occluded
        } else {
            Visibility::Surface
        }
    }

    pub fn occluded_flags(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_occluded(i)).collect()
    }

    pub fn occluded_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_occluded(i)).count()
    }

    pub fn surface_count(&self) -> usize {
        self.len() - self.occluded_count()
    }
}

/// Segment from a lifted point to a camera, or `None` when the camera is
/// (nearly) coincident with the point, which counts as an unblocked view.
fn view_segment(p: Point3, cam: Point3, self_eps: f64) -> Option<(Ray, f64)> {
    let d = cam - p;
    let dist = d.norm();
    if dist <= 2.0 * self_eps {
        return None;
    }
    let dir = d / dist;
    let ray = Ray {
        origin: p + dir * self_eps,
        direction: dir,
    };
    Some((ray, dist - self_eps))
}

fn check_eps(self_eps: f64) -> Result<()> {
    if !(self_eps > 0.0) || !self_eps.is_finite() {
        return Err(Error::invalid("self_eps", "must be positive"));
    }
    Ok(())
}

/// Blocked-view count of one point against a BVH.
pub fn blocked_views_bvh(p: Point3, mesh: &TriangleMesh, bvh: &Bvh, rig: &CameraRig, self_eps: f64) -> u32 {
    rig.positions()
        .iter()
        .filter(|&&cam| match view_segment(p, cam, self_eps) {
            Some((ray, t_max)) => bvh.any_hit(mesh, &ray, t_max, INTERSECT_EPS),
            None => false,
        })
        .count() as u32
}

/// Label every point using the BVH for intersection queries.
pub fn classify_occlusion(
    cloud: &PointCloud,
    mesh: &TriangleMesh,
    bvh: &Bvh,
    rig: &CameraRig,
    self_eps: f64,
) -> Result<OcclusionLabels> {
    check_eps(self_eps)?;
    let blocked = cloud
        .points()
        .iter()
        .map(|&p| blocked_views_bvh(p, mesh, bvh, rig, self_eps))
        .collect();
    Ok(OcclusionLabels::from_blocked(blocked, rig.len() as u32))
}

/// Direct point × camera × triangle loop. Reference for [`classify_occlusion`].
pub fn classify_occlusion_bruteforce(
    cloud: &PointCloud,
    mesh: &TriangleMesh,
    rig: &CameraRig,
    self_eps: f64,
) -> Result<OcclusionLabels> {
    check_eps(self_eps)?;
    let mut blocked = Vec::with_capacity(cloud.len());
    for &p in cloud.points() {
        let mut occluded_directions = 0u32;
        for &cam in rig.positions() {
            let Some((ray, t_max)) = view_segment(p, cam, self_eps) else {
                continue;
            };
            let mut intersections = 0usize;
            for t in 0..mesh.len() {
                if intersect_ray_triangle(&ray, &mesh.triangle(t), t_max, INTERSECT_EPS).is_some() {
                    intersections += 1;
                }
            }
            if intersections > 0 {
                occluded_directions += 1;
            }
        }
        blocked.push(occluded_directions);
    }
    Ok(OcclusionLabels::from_blocked(blocked, rig.len() as u32))
}

/// Closed axis-aligned box as 12 outward-wound triangles.
pub fn box_mesh(b: &Aabb) -> TriangleMesh {
    let (lo, hi) = (b.min, b.max);
    let v = |i: usize| {
        Point3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    let triangles = alloc::vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    TriangleMesh::new(vertices, triangles).expect("box with positive extent")
}

use alloc::vec::Vec;

use super::{Aabb, Point3, PointCloud};
use crate::{math, Error, Result};

/// Coordinates within this fraction of a voxel below a boundary snap onto it,
/// so lattice points built as `i * edge` land in voxel `i` despite rounding.
pub const VOXEL_SNAP: f64 = 1e-9;

/// Occupied cells of a regular grid; cell `i` spans
/// `[origin + i * edge, origin + (i + 1) * edge)` on each axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    origin: Point3,
    edge: f64,
    /// Sorted, unique.
    occupied: Vec<[i64; 3]>,
}

impl VoxelGrid {
    pub fn with_origin(points: &[Point3], origin: Point3, edge: f64) -> Result<Self> {
        if !edge.is_finite() || !origin.is_finite() {
            return Err(Error::non_finite("voxel grid"));
        }
        if edge <= 0.0 {
            return Err(Error::invalid("voxel edge", "must be positive"));
        }
        let mut occupied: Vec<[i64; 3]> = points
            .iter()
            .map(|p| {
                let cell = |v: f64, o: f64| math::floor((v - o) / edge + VOXEL_SNAP) as i64;
                [cell(p.x, origin.x), cell(p.y, origin.y), cell(p.z, origin.z)]
            })
            .collect();
        occupied.sort_unstable();
        occupied.dedup();
        Ok(VoxelGrid {
            origin,
            edge,
            occupied,
        })
    }

    /// Grid anchored at the bounding-box minimum of `points`.
    pub fn from_points(points: &[Point3], edge: f64) -> Result<Self> {
        let origin = match Aabb::from_points(points) {
            Ok(b) => b.min,
            Err(_) => Point3::ORIGIN,
        };
        VoxelGrid::with_origin(points, origin, edge)
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn occupied(&self) -> &[[i64; 3]] {
        &self.occupied
    }

    pub fn count(&self) -> usize {
        self.occupied.len()
    }

    pub fn volume(&self) -> f64 {
        self.occupied.len() as f64 * self.edge * self.edge * self.edge
    }
}

/// Occupied-voxel volume (m³) of a cloud on a grid anchored at its bounding-box minimum.
pub fn voxel_volume(cloud: &PointCloud, edge: f64) -> Result<f64> {
    Ok(VoxelGrid::from_points(cloud.points(), edge)?.volume())
}

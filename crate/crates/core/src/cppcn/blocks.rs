use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::BlockGrid;
use crate::geom::{Aabb, Point3, PointCloud};
use crate::occlusion::OcclusionLabels;
use crate::popsim::{partition, sample_from_parts, CompletionSample, PopulationScene};
use crate::{math, Error, Result};

/// Identifier stored with trained weights for the coordinate mapping below.
pub const NORMALIZATION_RULE: &str = "frame-min-isotropic-v1";

/// `p' = (p − origin) · scale`, with `scale = 1 / longest frame side`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub origin: Point3,
    pub scale: f64,
}

impl Normalization {
    pub fn from_frame(frame: &Aabb) -> Self {
        let e = frame.max_extent();
        Normalization {
            origin: frame.min,
            scale: if e > 0.0 { 1.0 / e } else { 1.0 },
        }
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        (p - self.origin) * self.scale
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        p / self.scale + self.origin
    }

    pub fn apply_all(&self, pts: &[Point3]) -> Vec<Point3> {
        pts.iter().map(|&p| self.apply(p)).collect()
    }

    pub fn invert_all(&self, pts: &[Point3]) -> Vec<Point3> {
        pts.iter().map(|&p| self.invert(p)).collect()
    }
}

fn axis_cell(v: f64, lo: f64, hi: f64, div: usize) -> usize {
    let ext = hi - lo;
    if !(ext > 0.0) {
        return 0;
    }
    let c = math::floor((v - lo) / ext * div as f64);
    if c < 0.0 {
        0
    } else {
        (c as usize).min(div - 1)
    }
}

/// Block index `(iz·ny + iy)·nx + ix` of `p`. Cells are half-open; points on
/// the max face, or outside the box, are clamped into the nearest block.
pub fn block_index(bounds: &Aabb, grid: &BlockGrid, p: Point3) -> usize {
    let [nx, ny, nz] = grid.divisions;
    let ix = axis_cell(p.x, bounds.min.x, bounds.max.x, nx);
    let iy = axis_cell(p.y, bounds.min.y, bounds.max.y, ny);
    let iz = axis_cell(p.z, bounds.min.z, bounds.max.z, nz);
    (iz * ny + iy) * nx + ix
}

/// Sub-boxes of `bounds` in block index order.
pub fn block_frames(bounds: &Aabb, grid: &BlockGrid) -> Vec<Aabb> {
    let [nx, ny, nz] = grid.divisions;
    let e = bounds.extent();
    let at = |lo: f64, ext: f64, i: usize, n: usize| lo + ext * i as f64 / n as f64;
    let mut out = Vec::with_capacity(grid.count());
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let min = Point3::new(
                    at(bounds.min.x, e.x, ix, nx),
                    at(bounds.min.y, e.y, iy, ny),
                    at(bounds.min.z, e.z, iz, nz),
                );
                let max = Point3::new(
                    if ix + 1 == nx { bounds.max.x } else { at(bounds.min.x, e.x, ix + 1, nx) },
                    if iy + 1 == ny { bounds.max.y } else { at(bounds.min.y, e.y, iy + 1, ny) },
                    if iz + 1 == nz { bounds.max.z } else { at(bounds.min.z, e.z, iz + 1, nz) },
                );
                out.push(Aabb { min, max });
            }
        }
    }
    out
}

/// A cloud split over a block grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub bounds: Aabb,
    pub frames: Vec<Aabb>,
    /// Point indices per block, ascending.
    pub members: Vec<Vec<usize>>,
}

pub fn split_into_blocks(cloud: &PointCloud, grid: &BlockGrid) -> Result<Blocks> {
    grid.validate()?;
    let bounds = cloud.aabb()?;
    let mut members = vec![Vec::new(); grid.count()];
    for (i, &p) in cloud.points().iter().enumerate() {
        members[block_index(&bounds, grid, p)].push(i);
    }
    Ok(Blocks {
        bounds,
        frames: block_frames(&bounds, grid),
        members,
    })
}

/// One training sample per block of the surface box that holds both surface
/// and occluded points. Occluded points outside the surface box go to the
/// nearest block.
pub fn block_samples(
    scene: &PopulationScene,
    labels: &OcclusionLabels,
    grid: &BlockGrid,
    n_in: usize,
    m_out: usize,
    seed: u64,
) -> Result<Vec<CompletionSample>> {
    let (surface, occluded) = partition(&scene.cloud, labels)?;
    if occluded.is_empty() {
        return Err(Error::NoOccludedPoints);
    }
    let blocks = split_into_blocks(&surface, grid)?;
    let mut occ_members = vec![Vec::new(); grid.count()];
    for (i, &p) in occluded.points().iter().enumerate() {
        occ_members[block_index(&blocks.bounds, grid, p)].push(i);
    }
    let mut out = Vec::new();
    for (b, frame) in blocks.frames.iter().enumerate() {
        if blocks.members[b].is_empty() || occ_members[b].is_empty() {
            continue;
        }
        let s = surface.select(&blocks.members[b])?;
        let o = occluded.select(&occ_members[b])?;
        let sample_seed = crate::rng::derive_seed(seed, b as u64);
        out.push(sample_from_parts(scene, &s, &o, n_in, m_out, sample_seed, Some(*frame))?);
    }
    Ok(out)
}

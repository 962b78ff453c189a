//! Primitive-shape plants: a box stem, flat leaves, an ellipsoid canopy and
//! box siliques. Enough structure for occlusion to matter.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{PlantAsset, Stage};
use crate::geom::{Aabb, Organ, Point3, PointCloud, TriangleMesh};
use crate::occlusion::box_mesh;
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::{math, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticPlantParams {
    /// Points sampled on the mesh surface.
    pub points: usize,
    /// Multiplies every length.
    pub scale: f64,
}

impl Default for SyntheticPlantParams {
    fn default() -> Self {
        SyntheticPlantParams { points: 800, scale: 1.0 }
    }
}

struct Builder {
    meshes: Vec<TriangleMesh>,
    organs: Vec<Organ>,
}

impl Builder {
    fn add(&mut self, mesh: TriangleMesh, organ: Organ) {
        self.organs.extend(core::iter::repeat_n(organ, mesh.len()));
        self.meshes.push(mesh);
    }

    fn finish(self) -> (TriangleMesh, Vec<Organ>) {
        let refs: Vec<&TriangleMesh> = self.meshes.iter().collect();
        (TriangleMesh::concat(&refs), self.organs)
    }
}

fn ellipsoid(center: Point3, rxy: f64, rz: f64, lat: usize, lon: usize) -> Result<TriangleMesh> {
    let mut v = vec![center + Point3::new(0.0, 0.0, rz)];
    for i in 1..lat {
        let (st, ct) = math::sin_cos(core::f64::consts::PI * i as f64 / lat as f64);
        for j in 0..lon {
            let (sp, cp) = math::sin_cos(2.0 * core::f64::consts::PI * j as f64 / lon as f64);
            v.push(center + Point3::new(rxy * st * cp, rxy * st * sp, rz * ct));
        }
    }
    v.push(center - Point3::new(0.0, 0.0, rz));
    let bottom = (v.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * lon + j % lon) as u32;
    let mut t = Vec::new();
    for j in 0..lon {
        t.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..lat - 1 {
        for j in 0..lon {
            t.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            t.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..lon {
        t.push([ring(lat - 1, j), bottom, ring(lat - 1, j + 1)]);
    }
    TriangleMesh::new(v, t)
}

/// Diamond-shaped leaf leaving the stem at `base` towards azimuth `az_deg`.
fn leaf(base: Point3, az_deg: f64, length: f64, width: f64, rise: f64) -> Result<TriangleMesh> {
    let (s, c) = math::sin_cos_deg(az_deg);
    let dir = Point3::new(c, s, 0.0);
    let side = Point3::new(-s, c, 0.0);
    let tip = base + dir * length + Point3::new(0.0, 0.0, rise);
    let mid = base + dir * (0.5 * length) + Point3::new(0.0, 0.0, 0.6 * rise);
    let v = vec![base, mid + side * (0.5 * width), tip, mid - side * (0.5 * width)];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]])
}

fn stem(height: f64, half_width: f64) -> Result<TriangleMesh> {
    let b = Aabb::new(
        Point3::new(-half_width, -half_width, 0.0),
        Point3::new(half_width, half_width, height),
    )?;
    Ok(box_mesh(&b))
}

fn silique_box(center: Point3, axis: usize, length: f64, thick: f64) -> Result<TriangleMesh> {
    let mut h = Point3::splat(0.5 * thick);
    match axis {
        0 => h.x = 0.5 * length,
        1 => h.y = 0.5 * length,
        _ => h.z = 0.5 * length,
    }
    Ok(box_mesh(&Aabb::new(center - h, center + h)?))
}

fn span(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// One primitive plant for `stage`, with its base centre at the origin.
pub fn synthetic_plant(stage: Stage, seed: u64, params: &SyntheticPlantParams) -> Result<PlantAsset> {
    let mut rng = rng_from_seed(seed);
    let k = params.scale;
    let mut b = Builder {
        meshes: Vec::new(),
        organs: Vec::new(),
    };
    let (height, rosette, stem_leaves) = match stage {
        Stage::Seedling => (span(&mut rng, 0.05, 0.09), 5, 0),
        Stage::Bolting => (span(&mut rng, 0.30, 0.45), 5, 2),
        Stage::Flowering => (span(&mut rng, 0.55, 0.75), 4, 3),
        Stage::Silique => (span(&mut rng, 0.65, 0.90), 3, 3),
    };
    b.add(stem(height * k, 0.006 * k)?, Organ::Stem);

    let az0 = span(&mut rng, 0.0, 360.0);
    for i in 0..rosette {
        let az = az0 + 360.0 * i as f64 / rosette as f64;
        let len = span(&mut rng, 0.06, 0.10) * k;
        b.add(leaf(Point3::new(0.0, 0.0, 0.01 * k), az, len, 0.4 * len, 0.02 * k)?, Organ::Leaf);
    }
    for i in 0..stem_leaves {
        let z = height * k * (0.25 + 0.2 * i as f64);
        let az = span(&mut rng, 0.0, 360.0);
        let len = span(&mut rng, 0.05, 0.08) * k;
        b.add(leaf(Point3::new(0.0, 0.0, z), az, len, 0.35 * len, 0.03 * k)?, Organ::Leaf);
    }

    match stage {
        Stage::Flowering | Stage::Silique => {
            let rxy = span(&mut rng, 0.07, 0.11) * k;
            let rz = span(&mut rng, 0.06, 0.09) * k;
            let c = Point3::new(0.0, 0.0, height * k);
            let organ = if stage == Stage::Flowering { Organ::Flower } else { Organ::Silique };
            b.add(ellipsoid(c, rxy, rz, 6, 10)?, organ);
            if stage == Stage::Silique {
                let n = rng.random_range(8..16);
                for _ in 0..n {
                    let az = span(&mut rng, 0.0, 360.0);
                    let (s, co) = math::sin_cos_deg(az);
                    let r = span(&mut rng, 0.5, 1.1) * rxy;
                    let z = c.z + span(&mut rng, -0.8, 0.6) * rz;
                    let axis = rng.random_range(0..3);
                    let len = span(&mut rng, 0.04, 0.06) * k;
                    b.add(
                        silique_box(Point3::new(r * co, r * s, z), axis, len, 0.004 * k)?,
                        Organ::Silique,
                    );
                }
            }
        }
        _ => {}
    }

    let (mesh, organs) = b.finish();
    let (pts, tris) = mesh.sample_surface(params.points, &mut rng)?;
    let cloud = PointCloud::new(pts)?.with_organ(tris.iter().map(|&t| organs[t]).collect())?;
    let id = format!("syn-{}-{seed:016x}", stage.name());
    let mut asset = PlantAsset::new(id, stage, cloud, mesh)?;
    let base = asset.aabb().base_center();
    asset.translate(-base);
    Ok(asset)
}

/// `count` synthetic plants per stage, seeds derived from `seed`.
pub fn synthetic_pool(stages: &[Stage], count: usize, seed: u64, params: &SyntheticPlantParams) -> Result<Vec<PlantAsset>> {
    let mut out = Vec::with_capacity(stages.len() * count);
    for (si, &st) in stages.iter().enumerate() {
        for i in 0..count {
            let s = derive_seed(derive_seed(seed, si as u64), i as u64);
            out.push(synthetic_plant(st, s, params)?);
        }
    }
    Ok(out)
}

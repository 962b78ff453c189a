//! Population scenes built from single-plant assets, and the completion
//! samples cut from them.

mod synthetic;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use synthetic::{synthetic_plant, synthetic_pool, SyntheticPlantParams};

use crate::geom::{build_bvh, fps_sample, Aabb, Point3, PointCloud, TriangleMesh};
use crate::occlusion::{classify_occlusion, ring_cameras, CameraRig, OcclusionLabels};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{math, Error, Result};

/// Margin by which an asset's cloud may leave its mesh box.
pub const ASSET_CLOUD_MARGIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Seedling,
    Bolting,
    Flowering,
    Silique,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Seedling, Stage::Bolting, Stage::Flowering, Stage::Silique];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Seedling => "seedling",
            Stage::Bolting => "bolting",
            Stage::Flowering => "flowering",
            Stage::Silique => "silique",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }
}

/// One plant: sampled cloud plus mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantAsset {
    pub id: String,
    pub stage: Stage,
    cloud: PointCloud,
    mesh: TriangleMesh,
}

impl PlantAsset {
    pub fn new(id: impl Into<String>, stage: Stage, cloud: PointCloud, mesh: TriangleMesh) -> Result<Self> {
        let id = id.into();
        if cloud.is_empty() {
            return Err(Error::Empty { what: "asset cloud" });
        }
        if mesh.is_empty() {
            return Err(Error::Empty { what: "asset mesh" });
        }
        let bounds = mesh.aabb()?.inflate(ASSET_CLOUD_MARGIN);
        if let Some(i) = cloud.points().iter().position(|p| !bounds.contains(*p)) {
            return Err(Error::invalid(
                "plant asset",
                alloc::format!("{id}: cloud point {i} lies outside the mesh bounds"),
            ));
        }
        Ok(PlantAsset { id, stage, cloud, mesh })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Box around mesh and cloud together.
    pub fn aabb(&self) -> Aabb {
        let m = self.mesh.aabb().expect("mesh checked nonempty");
        let c = self.cloud.aabb().expect("cloud checked nonempty");
        m.union(&c)
    }

    pub fn translate(&mut self, offset: Point3) {
        self.cloud.translate(offset);
        self.mesh.translate(offset);
    }

    /// Rotate about the vertical axis through the base centre.
    pub fn rotate_yaw(&mut self, deg: f64) -> Result<()> {
        let pivot = self.aabb().base_center();
        let (s, c) = math::sin_cos_deg(deg);
        let rot = move |p: Point3| {
            let d = p - pivot;
            Point3::new(pivot.x + c * d.x - s * d.y, pivot.y + s * d.x + c * d.y, p.z)
        };
        self.cloud.map_points(rot)?;
        self.mesh.map_vertices(rot);
        Ok(())
    }
}

/// Rigid translation putting the asset's base centre on `target`.
pub fn anchor_plant(asset: &PlantAsset, target: Point3) -> PlantAsset {
    let mut a = asset.clone();
    let offset = target - a.aabb().base_center();
    a.translate(offset);
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotLayout {
    pub rows: usize,
    pub cols: usize,
    pub row_spacing: f64,
    pub plant_spacing: f64,
}

impl Default for PlotLayout {
    fn default() -> Self {
        PlotLayout {
            rows: 4,
            cols: 4,
            row_spacing: 0.28,
            plant_spacing: 0.25,
        }
    }
}

impl PlotLayout {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("plot layout", "rows and cols must be at least 1"));
        }
        if !(self.row_spacing > 0.0) || !(self.plant_spacing > 0.0) {
            return Err(Error::invalid("plot layout", "spacings must be positive"));
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        self.rows * self.cols
    }

    /// Width along x and depth along y of the anchor grid.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.cols - 1) as f64 * self.plant_spacing,
            (self.rows - 1) as f64 * self.row_spacing,
        )
    }
}

/// Row-major anchors: slot `r * cols + c` sits at `(c·plant_spacing, r·row_spacing, 0)`.
pub fn grid_positions(layout: &PlotLayout) -> Result<Vec<Point3>> {
    layout.validate()?;
    let mut out = Vec::with_capacity(layout.slots());
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            out.push(Point3::new(
                c as f64 * layout.plant_spacing,
                r as f64 * layout.row_spacing,
                0.0,
            ));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleOptions {
    /// Uniform random yaw in `[-deg, deg]` per instance. Off when `None`.
    pub yaw_jitter_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopulationScene {
    /// Merged cloud carrying per-point plant ids (slot index).
    pub cloud: PointCloud,
    pub mesh: TriangleMesh,
    pub layout: Option<PlotLayout>,
    pub anchors: Vec<Point3>,
    pub asset_ids: Vec<String>,
    pub stage: Option<Stage>,
    pub seed: u64,
}

impl PopulationScene {
    pub fn slots(&self) -> usize {
        self.anchors.len()
    }
}

fn merge(placed: &[PlantAsset], anchors: Vec<Point3>, layout: Option<PlotLayout>, seed: u64) -> Result<PopulationScene> {
    let mut clouds = Vec::with_capacity(placed.len());
    for (slot, a) in placed.iter().enumerate() {
        let mut c = a.cloud.clone();
        c.set_plant_ids(vec![slot as u32; c.len()])?;
        clouds.push(c);
    }
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let meshes: Vec<&TriangleMesh> = placed.iter().map(|a| &a.mesh).collect();
    let stage = placed.first().map(|a| a.stage).filter(|s| placed.iter().all(|a| a.stage == *s));
    Ok(PopulationScene {
        cloud: PointCloud::concat(&refs),
        mesh: TriangleMesh::concat(&meshes),
        layout,
        anchors,
        asset_ids: placed.iter().map(|a| a.id.clone()).collect(),
        stage,
        seed,
    })
}

/// Fill every slot of `layout` with a uniformly drawn asset of `stage`
/// (with replacement) and anchor it on the grid.
pub fn assemble_population(
    pool: &[PlantAsset],
    stage: Stage,
    layout: &PlotLayout,
    seed: u64,
    opts: &AssembleOptions,
) -> Result<PopulationScene> {
    let anchors = grid_positions(layout)?;
    let candidates: Vec<&PlantAsset> = pool.iter().filter(|a| a.stage == stage).collect();
    if candidates.is_empty() {
        return Err(Error::invalid(
            "asset pool",
            alloc::format!("no assets of stage {}", stage.name()),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut placed = Vec::with_capacity(anchors.len());
    for &anchor in &anchors {
        let pick = rng.random_range(0..candidates.len());
        let mut a = candidates[pick].clone();
        if let Some(j) = opts.yaw_jitter_deg {
            if j > 0.0 {
                a.rotate_yaw(rng.random_range(-j..=j))?;
            }
        }
        placed.push(anchor_plant(&a, anchor));
    }
    merge(&placed, anchors, Some(*layout), seed)
}

/// Place assets at recorded positions; asset `i` becomes plant id `i`.
pub fn assemble_recorded(assets: &[PlantAsset], positions: &[Point3]) -> Result<PopulationScene> {
    if assets.len() != positions.len() {
        return Err(Error::invalid(
            "recorded plot",
            alloc::format!("{} assets for {} positions", assets.len(), positions.len()),
        ));
    }
    if assets.is_empty() {
        return Err(Error::Empty { what: "recorded plot" });
    }
    let placed: Vec<PlantAsset> = assets
        .iter()
        .zip(positions)
        .map(|(a, &p)| anchor_plant(a, p))
        .collect();
    merge(&placed, positions.to_vec(), None, 0)
}

/// Camera ring placement relative to the scene.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigConfig {
    pub distance: f64,
    pub elevation_deg: f64,
    pub count: usize,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            distance: 5.0,
            elevation_deg: 60.0,
            count: 36,
        }
    }
}

impl RigConfig {
    /// Ring centred on the base centre of `scene`.
    pub fn build(&self, scene: &Aabb) -> Result<CameraRig> {
        ring_cameras(scene.base_center(), self.distance, self.elevation_deg, self.count)
    }
}

/// Occlusion labels for a scene cloud against its own mesh.
pub fn label_scene(scene: &PopulationScene, rig: &CameraRig, self_eps: f64) -> Result<OcclusionLabels> {
    let bvh = build_bvh(&scene.mesh)?;
    classify_occlusion(&scene.cloud, &scene.mesh, &bvh, rig, self_eps)
}

/// Exactly `target` indices into `points`: an FPS sample when there are
/// enough points, otherwise every point in FPS order repeated cyclically.
pub fn fps_resample(points: &[Point3], target: usize, start: usize) -> Result<Vec<usize>> {
    if target == 0 {
        return Err(Error::invalid("resample size", "must be positive"));
    }
    let n = points.len();
    if target <= n {
        return fps_sample(points, target, start);
    }
    let order = fps_sample(points, n, start)?;
    Ok((0..target).map(|i| order[i % n]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleProvenance {
    pub scene_seed: u64,
    pub sample_seed: u64,
    pub asset_ids: Vec<String>,
    pub stage: Option<Stage>,
    pub surface_total: usize,
    pub occluded_total: usize,
}

/// Model input and target for one completion example, in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletionSample {
    pub surface: PointCloud,
    pub occluded: PointCloud,
    /// Box the network normalises into; the surface box unless cut from a block.
    pub frame: Aabb,
    pub provenance: SampleProvenance,
}

impl CompletionSample {
    pub fn n_in(&self) -> usize {
        self.surface.len()
    }

    pub fn m_out(&self) -> usize {
        self.occluded.len()
    }
}

/// Split labelled points into surface and occluded clouds.
pub fn partition(cloud: &PointCloud, labels: &OcclusionLabels) -> Result<(PointCloud, PointCloud)> {
    if labels.len() != cloud.len() {
        return Err(Error::LabelLength {
            channel: "occlusion",
            expected: cloud.len(),
            got: labels.len(),
        });
    }
    let mut c = cloud.clone();
    c.set_occluded(labels.occluded_flags())?;
    let surface = c.filter(|i| !labels.is_occluded(i));
    let occluded = c.filter(|i| labels.is_occluded(i));
    Ok((surface, occluded))
}

fn random_start(rng: &mut crate::rng::Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

/// Resample a labelled scene (or block) into a fixed-size sample.
/// `frame` defaults to the box of the full surface cloud.
pub fn make_sample_from_labels(
    scene: &PopulationScene,
    labels: &OcclusionLabels,
    n_in: usize,
    m_out: usize,
    seed: u64,
    frame: Option<Aabb>,
) -> Result<CompletionSample> {
    let (surface, occluded) = partition(&scene.cloud, labels)?;
    sample_from_parts(scene, &surface, &occluded, n_in, m_out, seed, frame)
}

pub(crate) fn sample_from_parts(
    scene: &PopulationScene,
    surface: &PointCloud,
    occluded: &PointCloud,
    n_in: usize,
    m_out: usize,
    seed: u64,
    frame: Option<Aabb>,
) -> Result<CompletionSample> {
    if n_in == 0 || m_out == 0 {
        return Err(Error::invalid("sample size", "N and M must be positive"));
    }
    if occluded.is_empty() {
        return Err(Error::NoOccludedPoints);
    }
    if surface.is_empty() {
        return Err(Error::NoSurfacePoints);
    }
    let mut rng = rng_from_seed(seed);
    let s_idx = fps_resample(surface.points(), n_in, random_start(&mut rng, surface.len()))?;
    let o_idx = fps_resample(occluded.points(), m_out, random_start(&mut rng, occluded.len()))?;
    let frame = match frame {
        Some(f) => f,
        None => surface.aabb()?,
    };
    Ok(CompletionSample {
        surface: surface.select(&s_idx)?,
        occluded: occluded.select(&o_idx)?,
        frame,
        provenance: SampleProvenance {
            scene_seed: scene.seed,
            sample_seed: seed,
            asset_ids: scene.asset_ids.clone(),
            stage: scene.stage,
            surface_total: surface.len(),
            occluded_total: occluded.len(),
        },
    })
}

/// Label `scene` with `rig` and resample it into a sample.
pub fn make_sample(
    scene: &PopulationScene,
    rig: &CameraRig,
    self_eps: f64,
    n_in: usize,
    m_out: usize,
    seed: u64,
) -> Result<CompletionSample> {
    let labels = label_scene(scene, rig, self_eps)?;
    make_sample_from_labels(scene, &labels, n_in, m_out, seed, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Number of training items: `ceil(count · train_fraction)`, so rounding
/// favours the training side.
pub fn train_count(count: usize, train_fraction: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::invalid("train fraction", "must lie in [0, 1]"));
    }
    let t = math::ceil(count as f64 * train_fraction - 1e-9).max(0.0) as usize;
    Ok(t.min(count))
}

/// Split label per item, assigned by a seeded shuffle.
pub fn assign_splits(count: usize, train_fraction: f64, seed: u64) -> Result<Vec<Split>> {
    let n_train = train_count(count, train_fraction)?;
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, u64::MAX)));
    let mut out = vec![Split::Val; count];
    for &i in &order[..n_train] {
        out[i] = Split::Train;
    }
    Ok(out)
}

/// `total` spread evenly over `stages`, remainder to the earliest.
pub fn stage_counts(total: usize, stages: &[Stage]) -> Result<Vec<(Stage, usize)>> {
    if stages.is_empty() {
        return Err(Error::Empty { what: "stage list" });
    }
    let base = total / stages.len();
    let rem = total % stages.len();
    Ok(stages
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, base + usize::from(i < rem)))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    pub stage: Option<Stage>,
    pub split: Split,
    pub surface_path: String,
    pub occluded_path: String,
    pub n_surface: usize,
    pub n_occluded: usize,
    pub frame: Aabb,
    pub scene_seed: u64,
    pub sample_seed: u64,
    pub asset_ids: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_count: usize,
    pub val_count: usize,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(move |r| r.split == split)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.split(Split::Train).count();
        let v = self.split(Split::Val).count();
        if t != self.train_count || v != self.val_count {
            return Err(Error::invalid(
                "manifest",
                alloc::format!(
                    "counts say {}/{} but records hold {t}/{v}",
                    self.train_count, self.val_count
                ),
            ));
        }
        Ok(())
    }
}

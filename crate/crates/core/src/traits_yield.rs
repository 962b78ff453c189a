//! Silique layering, voxel volume, the silique efficiency index (SEI) and
//! per-variant yield regression.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{Organ, Point3, PointCloud, VoxelGrid};
use crate::metrics::{ols_fit_r2, OlsFit};
use crate::popsim::PlotLayout;
use crate::{math, Error, Result};

pub const DEFAULT_VOXEL_EDGE: f64 = 0.01;

/// Vertical band of the silique z-extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Lower,
    Middle,
    Upper,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Lower, Layer::Middle, Layer::Upper];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Lower => "lower",
            Layer::Middle => "middle",
            Layer::Upper => "upper",
        }
    }
}

/// How the silique z-extent is cut into three bands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSplit {
    #[default]
    EqualThirds,
    /// Boundaries at these quantiles of the silique z values.
    Quantiles { lower: f64, upper: f64 },
}

/// Band boundaries `z_min <= b1 <= b2 <= z_max`.
///
/// Bands are half-open `[z_min, b1)`, `[b1, b2)`, `[b2, z_max]`. A zero-height
/// extent puts everything in the lower band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPartition {
    pub z_min: f64,
    pub b1: f64,
    pub b2: f64,
    pub z_max: f64,
}

impl LayerPartition {
    pub fn layer_of(&self, z: f64) -> Layer {
        if self.z_max <= self.z_min || z < self.b1 {
            Layer::Lower
        } else if z < self.b2 {
            Layer::Middle
        } else {
            Layer::Upper
        }
    }

    pub fn bounds(&self, layer: Layer) -> (f64, f64) {
        match layer {
            Layer::Lower => (self.z_min, self.b1),
            Layer::Middle => (self.b1, self.b2),
            Layer::Upper => (self.b2, self.z_max),
        }
    }
}

fn silique_points(cloud: &PointCloud) -> Result<Vec<Point3>> {
    let organ = cloud
        .organ()
        .ok_or_else(|| Error::invalid("organ-labelled cloud", "organ channel missing"))?;
    Ok(cloud
        .points()
        .iter()
        .zip(organ)
        .filter(|(_, &o)| o == Organ::Silique)
        .map(|(p, _)| *p)
        .collect())
}

pub fn partition_layers(cloud: &PointCloud) -> Result<LayerPartition> {
    partition_layers_with(cloud, LayerSplit::EqualThirds)
}

pub fn partition_layers_with(cloud: &PointCloud, split: LayerSplit) -> Result<LayerPartition> {
    let pts = silique_points(cloud)?;
    if pts.is_empty() {
        return Err(Error::Empty { what: "silique points" });
    }
    let mut z: Vec<f64> = pts.iter().map(|p| p.z).collect();
    z.sort_unstable_by(f64::total_cmp);
    let (z_min, z_max) = (z[0], z[z.len() - 1]);
    let (b1, b2) = match split {
        LayerSplit::EqualThirds => {
            let h = z_max - z_min;
            (z_min + h / 3.0, z_min + 2.0 * h / 3.0)
        }
        LayerSplit::Quantiles { lower, upper } => {
            if !(0.0 <= lower && lower <= upper && upper <= 1.0) {
                return Err(Error::invalid("layer quantiles", "need 0 <= lower <= upper <= 1"));
            }
            let q = |f: f64| {
                let pos = f * (z.len() - 1) as f64;
                let i = math::floor(pos) as usize;
                let j = (i + 1).min(z.len() - 1);
                z[i] + (z[j] - z[i]) * (pos - i as f64)
            };
            (q(lower), q(upper))
        }
    };
    Ok(LayerPartition { z_min, b1, b2, z_max })
}

/// Ground area used as the SEI denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlaneArea {
    /// Anchor-grid extent only.
    GridExtent,
    /// Anchor grid plus half a spacing on every side.
    #[default]
    GridWithMargins,
    /// Convex hull of the cloud's ground projection.
    ConvexHull,
    Fixed { area: f64 },
}

impl PlaneArea {
    pub fn area(&self, layout: &PlotLayout, cloud: &PointCloud) -> Result<f64> {
        let a = match *self {
            PlaneArea::GridExtent => {
                layout.validate()?;
                let (w, d) = layout.extent();
                w * d
            }
            PlaneArea::GridWithMargins => {
                layout.validate()?;
                let (w, d) = layout.extent();
                (w + layout.plant_spacing) * (d + layout.row_spacing)
            }
            PlaneArea::ConvexHull => hull_area(cloud.points()),
            PlaneArea::Fixed { area } => area,
        };
        if !a.is_finite() {
            return Err(Error::non_finite("plane area"));
        }
        if a <= 0.0 {
            return Err(Error::invalid("plane area", "must be positive"));
        }
        Ok(a)
    }
}

/// Area of the convex hull of the xy projection (monotone chain).
pub fn hull_area(points: &[Point3]) -> f64 {
    let mut p: Vec<(f64, f64)> = points.iter().map(|q| (q.x, q.y)).collect();
    p.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: &mut dyn Iterator<Item = &(f64, f64)> = if pass == 0 { &mut p.iter() } else { &mut p.iter().rev() };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() / 2.0
}

/// Silique voxel volume (optionally within one band) over `plane_area`.
///
/// The voxel grid is anchored at the silique bounding-box minimum of the
/// whole cloud, so bands share one lattice.
pub fn sei(cloud: &PointCloud, layer: Option<(&LayerPartition, Layer)>, plane_area: f64, voxel_edge: f64) -> Result<f64> {
    if !plane_area.is_finite() {
        return Err(Error::non_finite("plane area"));
    }
    if plane_area <= 0.0 {
        return Err(Error::invalid("plane area", "must be positive"));
    }
    Ok(silique_volume(cloud, layer, voxel_edge)? / plane_area)
}

pub fn silique_volume(cloud: &PointCloud, layer: Option<(&LayerPartition, Layer)>, voxel_edge: f64) -> Result<f64> {
    let pts = silique_points(cloud)?;
    let origin = pts.iter().skip(1).fold(pts.first().copied().unwrap_or(Point3::ORIGIN), |a, &p| a.min(p));
    let pts: Vec<Point3> = match layer {
        Some((part, l)) => pts.into_iter().filter(|p| part.layer_of(p.z) == l).collect(),
        None => pts,
    };
    Ok(VoxelGrid::with_origin(&pts, origin, voxel_edge)?.volume())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CloudKind {
    Complete,
    Incomplete,
}

impl CloudKind {
    pub fn name(self) -> &'static str {
        match self {
            CloudKind::Complete => "complete",
            CloudKind::Incomplete => "incomplete",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraitConfig {
    pub voxel_edge: f64,
    pub plane_area: PlaneArea,
    pub split: LayerSplit,
}

impl Default for TraitConfig {
    fn default() -> Self {
        TraitConfig {
            voxel_edge: DEFAULT_VOXEL_EDGE,
            plane_area: PlaneArea::default(),
            split: LayerSplit::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerTrait {
    pub layer: Layer,
    pub z_range: (f64, f64),
    pub volume: f64,
    pub sei: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraitReport {
    pub cloud_id: String,
    pub kind: CloudKind,
    pub voxel_edge: f64,
    pub plane_area: f64,
    pub silique_points: usize,
    pub partition: LayerPartition,
    pub layers: Vec<LayerTrait>,
    pub total_volume: f64,
    pub total_sei: f64,
}

impl TraitReport {
    pub fn layer(&self, layer: Layer) -> &LayerTrait {
        &self.layers[layer as usize]
    }
}

pub fn trait_report(
    cloud: &PointCloud,
    cloud_id: &str,
    kind: CloudKind,
    layout: &PlotLayout,
    cfg: &TraitConfig,
) -> Result<TraitReport> {
    let partition = partition_layers_with(cloud, cfg.split)?;
    let area = cfg.plane_area.area(layout, cloud)?;
    let total_volume = silique_volume(cloud, None, cfg.voxel_edge)?;
    let layers = Layer::ALL
        .iter()
        .map(|&l| {
            let volume = silique_volume(cloud, Some((&partition, l)), cfg.voxel_edge)?;
            Ok(LayerTrait {
                layer: l,
                z_range: partition.bounds(l),
                volume,
                sei: volume / area,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraitReport {
        cloud_id: cloud_id.into(),
        kind,
        voxel_edge: cfg.voxel_edge,
        plane_area: area,
        silique_points: silique_points(cloud)?.len(),
        partition,
        layers,
        total_volume,
        total_sei: total_volume / area,
    })
}

/// Cloud kind and band (`None` for the whole canopy).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub kind: CloudKind,
    pub layer: Option<Layer>,
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        let mut v = Vec::new();
        for kind in [CloudKind::Complete, CloudKind::Incomplete] {
            v.push(Variant { kind, layer: None });
            for l in Layer::ALL {
                v.push(Variant { kind, layer: Some(l) });
            }
        }
        v
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let layer = self.layer.map_or("all", Layer::name);
        write!(f, "{}/{}", self.kind.name(), layer)
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    /// Inverse of the `Display` form, e.g. `incomplete/upper`.
    fn from_str(s: &str) -> Result<Variant> {
        let bad = || Error::invalid("variant", alloc::format!("`{s}` is not <complete|incomplete>/<all|lower|middle|upper>"));
        let (k, l) = s.split_once('/').ok_or_else(bad)?;
        let kind = match k {
            "complete" => CloudKind::Complete,
            "incomplete" => CloudKind::Incomplete,
            _ => return Err(bad()),
        };
        let layer = match l {
            "all" => None,
            _ => Some(Layer::ALL.into_iter().find(|x| x.name() == l).ok_or_else(bad)?),
        };
        Ok(Variant { kind, layer })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldRecord {
    pub plot: String,
    pub variant: Variant,
    pub sei: f64,
    #[serde(rename = "yield")]
    pub yield_: f64,
}

/// One SEI record per variant from a report.
pub fn records_from_report(report: &TraitReport, plot: &str, yield_: f64) -> Vec<YieldRecord> {
    let mut out = Vec::with_capacity(4);
    out.push(YieldRecord {
        plot: plot.into(),
        variant: Variant { kind: report.kind, layer: None },
        sei: report.total_sei,
        yield_,
    });
    for lt in &report.layers {
        out.push(YieldRecord {
            plot: plot.into(),
            variant: Variant {
                kind: report.kind,
                layer: Some(lt.layer),
            },
            sei: lt.sei,
            yield_,
        });
    }
    out
}

/// OLS of yield on SEI, fitted separately for every variant present.
pub fn yield_regression(records: &[YieldRecord]) -> Result<BTreeMap<Variant, OlsFit>> {
    let mut groups: BTreeMap<Variant, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.variant).or_default();
        g.0.push(r.sei);
        g.1.push(r.yield_);
    }
    if groups.is_empty() {
        return Err(Error::Empty { what: "yield records" });
    }
    groups
        .into_iter()
        .map(|(v, (x, y))| Ok((v, ols_fit_r2(&x, &y)?)))
        .collect()
}

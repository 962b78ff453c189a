//! Asset pools, scene generation and on-disk completion datasets.

use std::fs;
use std::path::{Path, PathBuf};

use cppcn_core::cppcn::{block_samples, prepare_example, BlockGrid, NetworkConfig, TrainingExample};
use cppcn_core::occlusion::OcclusionLabels;
use cppcn_core::popsim::{
    assemble_population, assign_splits, label_scene, make_sample_from_labels, stage_counts, synthetic_pool,
    AssembleOptions, CompletionSample, DatasetManifest, PlantAsset, PopulationScene, SampleProvenance, SampleRecord,
    Split, Stage,
};
use cppcn_core::rng::derive_seed;

use crate::config::RunConfig;
use crate::error::{Error, Result, ResultExt};
use crate::manifest::{load_manifest, save_manifest};
use crate::obj::{read_obj, write_obj};
use crate::ply::{read_cloud, write_cloud, write_cloud_file, CloudFile, Format, ScalarType};

pub const MANIFEST_FILE: &str = "manifest.json";
const POOL_STREAM: u64 = 0xA55E_7500;
const SCENE_STREAM: u64 = 0x5CE9_E000;

/// Results of `f` over `items` in input order, computed on up to `threads`
/// scoped threads.
pub fn par_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let f = &f;
                s.spawn(move || {
                    (t..items.len())
                        .step_by(threads)
                        .map(|i| (i, f(i, &items[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Assets stored as `<dir>/<stage>/<id>.obj` with a matching `<id>.ply`,
/// in stage then file-name order.
pub fn load_assets(dir: &Path) -> Result<Vec<PlantAsset>> {
    let mut out = Vec::new();
    for stage in Stage::ALL {
        let sub = dir.join(stage.name());
        if !sub.is_dir() {
            continue;
        }
        let mut objs: Vec<PathBuf> = fs::read_dir(&sub)
            .at(&sub)?
            .map(|e| e.map(|e| e.path()).at(&sub))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "obj"))
            .collect();
        objs.sort();
        for obj in objs {
            let ply = obj.with_extension("ply");
            let id = obj.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let mesh = read_obj(&obj)?;
            let cloud = read_cloud(&ply)?;
            out.push(PlantAsset::new(id, stage, cloud, mesh).map_err(|e| Error::data(&obj, e))?);
        }
    }
    if out.is_empty() {
        return Err(Error::Usage(format!("no assets found under {}", dir.display())));
    }
    Ok(out)
}

pub fn write_assets(dir: &Path, assets: &[PlantAsset]) -> Result<()> {
    for a in assets {
        let sub = dir.join(a.stage.name());
        fs::create_dir_all(&sub).at(&sub)?;
        write_obj(&sub.join(format!("{}.obj", a.id)), a.mesh())?;
        write_exact(&sub.join(format!("{}.ply", a.id)), a.cloud())?;
    }
    Ok(())
}

/// Binary PLY with 64-bit coordinates.
pub fn write_exact(path: &Path, cloud: &cppcn_core::geom::PointCloud) -> Result<()> {
    let mut f = CloudFile::new(cloud.clone());
    f.coord_type = ScalarType::Float64;
    write_cloud_file(path, &f, Format::BinaryLittleEndian)
}

/// The configured asset directory, or a synthetic pool.
pub fn asset_pool(cfg: &RunConfig) -> Result<Vec<PlantAsset>> {
    match &cfg.paths.assets {
        Some(dir) => load_assets(dir),
        None => Ok(synthetic_pool(
            &cfg.dataset.stages,
            cfg.dataset.synthetic_per_stage,
            derive_seed(cfg.seed, POOL_STREAM),
            &cfg.dataset.synthetic,
        )?),
    }
}

/// Stage and seed for each of `dataset.count` whole scenes.
pub fn scene_plan(cfg: &RunConfig) -> Result<Vec<(Stage, u64)>> {
    let root = derive_seed(cfg.seed, SCENE_STREAM);
    let mut out = Vec::with_capacity(cfg.dataset.count);
    for (stage, n) in stage_counts(cfg.dataset.count, &cfg.dataset.stages)? {
        for _ in 0..n {
            let i = out.len() as u64;
            out.push((stage, derive_seed(root, i)));
        }
    }
    Ok(out)
}

pub fn assemble(pool: &[PlantAsset], cfg: &RunConfig, stage: Stage, seed: u64) -> Result<PopulationScene> {
    let opts = AssembleOptions {
        yaw_jitter_deg: cfg.dataset.yaw_jitter_deg,
    };
    Ok(assemble_population(pool, stage, &cfg.layout, seed, &opts)?)
}

pub fn label(scene: &PopulationScene, cfg: &RunConfig) -> Result<OcclusionLabels> {
    let bounds = scene.mesh.aabb()?.union(&scene.cloud.aabb()?);
    let rig = cfg.rig.build(&bounds)?;
    Ok(label_scene(scene, &rig, cfg.self_eps)?)
}

pub fn samples_for(scene: &PopulationScene, labels: &OcclusionLabels, cfg: &RunConfig) -> cppcn_core::Result<Vec<CompletionSample>> {
    let (n, m) = (cfg.network.n_in, cfg.network.m_out);
    let seed = derive_seed(scene.seed, 1);
    if cfg.blocks == BlockGrid::WHOLE {
        make_sample_from_labels(scene, labels, n, m, seed, None).map(|s| vec![s])
    } else {
        block_samples(scene, labels, &cfg.blocks, n, m, seed)
    }
}

/// One scene's samples. Scenes without surface or occluded points are
/// redrawn with derived seeds up to `dataset.max_attempts` times.
pub fn generate(pool: &[PlantAsset], cfg: &RunConfig, stage: Stage, seed: u64) -> Result<Vec<CompletionSample>> {
    let mut last = None;
    for attempt in 0..cfg.dataset.max_attempts {
        let s = if attempt == 0 { seed } else { derive_seed(seed, attempt as u64) };
        let scene = assemble(pool, cfg, stage, s)?;
        let labels = label(&scene, cfg)?;
        match samples_for(&scene, &labels, cfg) {
            Ok(v) if !v.is_empty() => return Ok(v),
            Ok(_) => last = Some(cppcn_core::Error::NoOccludedPoints),
            Err(e @ (cppcn_core::Error::NoOccludedPoints | cppcn_core::Error::NoSurfacePoints)) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    let e = last.expect("at least one attempt");
    Err(Error::Check(format!(
        "scene seed {seed}: no usable sample after {} attempts ({e})",
        cfg.dataset.max_attempts
    )))
}

/// `quota` samples of `stage`, taken in order from scenes seeded by
/// `derive_seed(root, j)`. Scenes are generated in waves of `threads`; the
/// result does not depend on the wave size.
fn fill_quota(pool: &[PlantAsset], cfg: &RunConfig, stage: Stage, root: u64, quota: usize) -> Result<Vec<CompletionSample>> {
    let wave = cfg.threads.max(1);
    let mut got = Vec::with_capacity(quota);
    let mut next = 0u64;
    while got.len() < quota {
        let seeds: Vec<u64> = (next..next + wave as u64).map(|j| derive_seed(root, j)).collect();
        next += wave as u64;
        for r in par_map(&seeds, cfg.threads, |_, &s| generate(pool, cfg, stage, s)) {
            if got.len() == quota {
                break;
            }
            for s in r? {
                if got.len() < quota {
                    got.push(s);
                }
            }
        }
    }
    Ok(got)
}

/// Generate `dataset.count` samples spread evenly over `dataset.stages`,
/// write `<out>/samples/*.ply` and `<out>/manifest.json`.
pub fn build_dataset(cfg: &RunConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let pool = asset_pool(cfg)?;
    let root = derive_seed(cfg.seed, SCENE_STREAM);
    let mut all = Vec::with_capacity(cfg.dataset.count);
    for (si, (stage, quota)) in stage_counts(cfg.dataset.count, &cfg.dataset.stages)?.into_iter().enumerate() {
        all.extend(fill_quota(&pool, cfg, stage, derive_seed(root, si as u64), quota)?);
    }
    let dir = out.join("samples");
    fs::create_dir_all(&dir).at(&dir)?;
    let format = if cfg.dataset.binary { Format::BinaryLittleEndian } else { Format::Ascii };

    let mut records = Vec::with_capacity(all.len());
    for (i, s) in all.iter().enumerate() {
        let id = format!("s{i:05}");
        let surface_path = format!("samples/{id}_surface.ply");
        let occluded_path = format!("samples/{id}_occluded.ply");
        write_cloud(&out.join(&surface_path), &s.surface, format)?;
        write_cloud(&out.join(&occluded_path), &s.occluded, format)?;
        records.push(SampleRecord {
            id,
            stage: s.provenance.stage,
            split: Split::Train,
            surface_path,
            occluded_path,
            n_surface: s.surface.len(),
            n_occluded: s.occluded.len(),
            frame: s.frame,
            scene_seed: s.provenance.scene_seed,
            sample_seed: s.provenance.sample_seed,
            asset_ids: s.provenance.asset_ids.clone(),
        });
    }
    let splits = assign_splits(records.len(), cfg.dataset.train_fraction, cfg.seed)?;
    for (r, s) in records.iter_mut().zip(splits) {
        r.split = s;
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        train_fraction: cfg.dataset.train_fraction,
        train_count: records.iter().filter(|r| r.split == Split::Train).count(),
        val_count: records.iter().filter(|r| r.split == Split::Val).count(),
        samples: records,
    };
    save_manifest(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// A sample read back from the files a record points at (relative to `root`).
pub fn load_sample(root: &Path, rec: &SampleRecord) -> Result<CompletionSample> {
    let read = |rel: &str, expected: usize| -> Result<cppcn_core::geom::PointCloud> {
        let p = root.join(rel);
        let c = read_cloud(&p)?;
        if c.len() != expected {
            return Err(Error::parse(&p, "element vertex", format!("manifest says {expected} points, file has {}", c.len())));
        }
        Ok(c)
    };
    let surface = read(&rec.surface_path, rec.n_surface)?;
    let occluded = read(&rec.occluded_path, rec.n_occluded)?;
    Ok(CompletionSample {
        provenance: SampleProvenance {
            scene_seed: rec.scene_seed,
            sample_seed: rec.sample_seed,
            asset_ids: rec.asset_ids.clone(),
            stage: rec.stage,
            surface_total: surface.len(),
            occluded_total: occluded.len(),
        },
        surface,
        occluded,
        frame: rec.frame,
    })
}

/// Training and validation examples of the dataset whose manifest is at `path`.
pub fn load_examples(path: &Path, net: &NetworkConfig) -> Result<(Vec<TrainingExample>, Vec<TrainingExample>)> {
    let manifest = load_manifest(path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    let mut train = Vec::new();
    let mut val = Vec::new();
    for rec in &manifest.samples {
        let s = load_sample(root, rec)?;
        let ex = prepare_example(&s, net).map_err(|e| Error::data(root.join(&rec.surface_path), e))?;
        match rec.split {
            Split::Train => train.push(ex),
            Split::Val => val.push(ex),
        }
    }
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<u32> = (0..37).collect();
        let a = par_map(&v, 1, |i, &x| x * 2 + i as u32);
        let b = par_map(&v, 4, |i, &x| x * 2 + i as u32);
        assert_eq!(a, b);
        assert!(par_map(&[] as &[u8], 3, |_, &x| x).is_empty());
    }
}

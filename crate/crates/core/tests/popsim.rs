use std::collections::HashSet;

use cppcn_core::geom::{Aabb, Organ, Point3, PointCloud};
use cppcn_core::occlusion::{box_mesh, CameraRig, DEFAULT_SELF_EPS};
use cppcn_core::popsim::*;
use cppcn_core::Error;
use proptest::prelude::*;

fn cube_asset(id: &str, lo: Point3, size: f64) -> PlantAsset {
    let b = Aabb::new(lo, lo + Point3::splat(size)).unwrap();
    let mesh = box_mesh(&b);
    let cloud = PointCloud::new(mesh.vertices().to_vec()).unwrap();
    PlantAsset::new(id, Stage::Silique, cloud, mesh).unwrap()
}

#[test]
fn slot_frequencies_are_uniform() {
    let pool: Vec<PlantAsset> = (0..100)
        .map(|i| cube_asset(&format!("a{i}"), Point3::ORIGIN, 0.05))
        .collect();
    let layout = PlotLayout::default();
    let mut counts = vec![0usize; 100];
    for s in 0..1000u64 {
        let scene = assemble_population(&pool, Stage::Silique, &layout, s, &AssembleOptions::default()).unwrap();
        for id in &scene.asset_ids {
            counts[id[1..].parse::<usize>().unwrap()] += 1;
        }
    }
    let draws: f64 = 16_000.0;
    let p = 0.01;
    let mean = draws * p;
    let sigma = (draws * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!((c as f64 - mean).abs() <= 4.0 * sigma, "asset {i}: {c}");
    }
}

#[test]
fn assembly_is_deterministic() {
    let pool = synthetic_pool(&[Stage::Silique], 4, 2, &SyntheticPlantParams::default()).unwrap();
    let layout = PlotLayout { rows: 2, cols: 2, ..PlotLayout::default() };
    let opts = AssembleOptions { yaw_jitter_deg: Some(30.0) };
    let a = assemble_population(&pool, Stage::Silique, &layout, 5, &opts).unwrap();
    let b = assemble_population(&pool, Stage::Silique, &layout, 5, &opts).unwrap();
    let bits = |s: &PopulationScene| -> Vec<u64> {
        s.cloud.points().iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a, b);
}

#[test]
fn recorded_positions_keep_order() {
    let assets: Vec<PlantAsset> = (0..16).map(|i| cube_asset(&format!("r{i}"), Point3::ORIGIN, 0.05)).collect();
    let pos = grid_positions(&PlotLayout::default()).unwrap();
    let scene = assemble_recorded(&assets, &pos).unwrap();
    assert_eq!(scene.cloud.len(), assets.iter().map(|a| a.cloud().len()).sum::<usize>());
    let ids = scene.cloud.plant_ids().unwrap();
    for (i, p) in pos.iter().enumerate() {
        let pts: Vec<Point3> = scene
            .cloud
            .points()
            .iter()
            .zip(ids)
            .filter(|(_, &id)| id as usize == i)
            .map(|(p, _)| *p)
            .collect();
        let base = Aabb::from_points(&pts).unwrap().base_center();
        assert!(base.dist(*p) < 1e-12);
    }
}

fn enclosure_scene() -> PopulationScene {
    // A small box hidden inside a large closed box: its points are occluded,
    // the outer shell's points are not.
    let outer = cube_asset("outer", Point3::new(-0.5, -0.5, 0.0), 1.0);
    let inner = cube_asset("inner", Point3::new(-0.1, -0.1, 0.0), 0.2);
    let mut s = assemble_recorded(&[outer, inner], &[Point3::ORIGIN, Point3::new(0.0, 0.0, 0.3)]).unwrap();
    s.seed = 11;
    s
}

#[test]
fn sample_partition_and_padding() {
    let scene = enclosure_scene();
    let rig = CameraRig::new(vec![Point3::new(0.0, 0.0, 5.0), Point3::new(5.0, 0.0, 2.0)]).unwrap();
    let labels = label_scene(&scene, &rig, DEFAULT_SELF_EPS).unwrap();
    let (surf, occ) = partition(&scene.cloud, &labels).unwrap();
    assert_eq!(surf.len() + occ.len(), scene.cloud.len());
    // All 8 inner corners are hidden (plant id 1); some outer bottom corners too.
    assert_eq!(occ.plant_ids().unwrap().iter().filter(|&&i| i == 1).count(), 8);
    let sp: HashSet<[u64; 3]> = surf.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect();
    assert!(occ.points().iter().all(|p| !sp.contains(&[p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])));

    let s = make_sample(&scene, &rig, DEFAULT_SELF_EPS, 6, 40, 3).unwrap();
    assert_eq!(s.n_in(), 6);
    assert_eq!(s.m_out(), 40);
    assert!(occ.len() < 40);
    for p in occ.points() {
        assert!(s.occluded.points().contains(p));
    }
    assert_eq!(s.provenance.occluded_total, occ.len());
    assert_eq!(s.provenance.scene_seed, 11);
}

#[test]
fn no_occluded_points_is_a_distinct_error() {
    let scene = assemble_recorded(&[cube_asset("c", Point3::ORIGIN, 1.0)], &[Point3::ORIGIN]).unwrap();
    // Cameras above and below: every cube vertex sees one of them.
    let labels_rig = CameraRig::new(vec![Point3::new(0.0, 0.0, 5.0), Point3::new(0.0, 0.0, -5.0)]).unwrap();
    let r = make_sample(&scene, &labels_rig, DEFAULT_SELF_EPS, 4, 4, 0);
    assert_eq!(r.unwrap_err(), Error::NoOccludedPoints);
}

#[test]
fn large_surface_gives_distinct_points() {
    let mut pts = Vec::with_capacity(10_000);
    for i in 0..100 {
        for j in 0..100 {
            pts.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
        }
    }
    let idx = fps_resample(&pts, 8192, 0).unwrap();
    assert_eq!(idx.len(), 8192);
    assert_eq!(idx.iter().collect::<HashSet<_>>().len(), 8192);
}

#[test]
fn synthetic_scene_has_both_classes() {
    let pool = synthetic_pool(&[Stage::Silique], 3, 4, &SyntheticPlantParams::default()).unwrap();
    let layout = PlotLayout { rows: 2, cols: 2, ..PlotLayout::default() };
    let scene = assemble_population(&pool, Stage::Silique, &layout, 1, &AssembleOptions::default()).unwrap();
    let rig = RigConfig::default().build(&scene.mesh.aabb().unwrap()).unwrap();
    let labels = label_scene(&scene, &rig, DEFAULT_SELF_EPS).unwrap();
    assert!(labels.occluded_count() > 0);
    assert!(labels.surface_count() > 0);
    assert!(scene.cloud.organ().unwrap().contains(&Organ::Silique));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn anchoring_hits_target(
        lo in prop::array::uniform3(-10.0f64..10.0),
        size in 0.01f64..2.0,
        target in prop::array::uniform3(-100.0f64..100.0),
    ) {
        let a = cube_asset("p", Point3::from_array(lo), size);
        let t = Point3::from_array(target);
        let moved = anchor_plant(&a, t);
        prop_assert!(moved.aabb().base_center().dist(t) < 1e-9);
        prop_assert!((moved.aabb().extent() - a.aabb().extent()).norm() < 1e-9);
    }

    #[test]
    fn grid_anchors_match_plants(seed in 0u64..1000, rows in 1usize..4, cols in 1usize..4) {
        let pool: Vec<PlantAsset> = (0..3).map(|i| cube_asset(&format!("g{i}"), Point3::new(i as f64, 0.0, 0.0), 0.03 + 0.01 * i as f64)).collect();
        let layout = PlotLayout { rows, cols, ..PlotLayout::default() };
        let scene = assemble_population(&pool, Stage::Silique, &layout, seed, &AssembleOptions::default()).unwrap();
        let ids = scene.cloud.plant_ids().unwrap();
        for (slot, anchor) in scene.anchors.iter().enumerate() {
            let pts: Vec<Point3> = scene.cloud.points().iter().zip(ids).filter(|(_, &i)| i as usize == slot).map(|(p, _)| *p).collect();
            prop_assert!(Aabb::from_points(&pts).unwrap().base_center().dist(*anchor) < 1e-9);
        }
    }

    #[test]
    fn split_counts_exact(count in 0usize..5000, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let s = assign_splits(count, frac, seed).unwrap();
        let t = s.iter().filter(|&&x| x == Split::Train).count();
        prop_assert_eq!(t, train_count(count, frac).unwrap());
        prop_assert!(t as f64 >= count as f64 * frac - 1e-6);
        prop_assert!((t as f64) < count as f64 * frac + 1.0);
    }

    #[test]
    fn padding_contains_every_point(n in 1usize..40, extra in 0usize..60, seed in 0usize..40) {
        let pts: Vec<Point3> = (0..n).map(|i| Point3::new((i * 7 % 13) as f64, (i % 5) as f64, i as f64 * 0.1)).collect();
        let target = n + extra;
        let idx = fps_resample(&pts, target, seed % n).unwrap();
        prop_assert_eq!(idx.len(), target);
        let set: HashSet<usize> = idx.iter().copied().collect();
        prop_assert_eq!(set.len(), n);
    }
}

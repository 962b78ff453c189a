use cppcn_core::geom::{Organ, Point3, PointCloud};
use cppcn_core::popsim::PlotLayout;
use cppcn_core::traits_yield::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense random points filling a box, labelled silique, plus stem clutter.
fn slab(min: Point3, size: Point3, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n + 10);
    let mut organ = Vec::with_capacity(n + 10);
    for _ in 0..n {
        pts.push(Point3::new(
            min.x + rng.random_range(0.0..size.x),
            min.y + rng.random_range(0.0..size.y),
            min.z + rng.random_range(0.0..size.z),
        ));
        organ.push(Organ::Silique);
    }
    for i in 0..10 {
        pts.push(Point3::new(min.x - 0.5, min.y, i as f64 * 0.1));
        organ.push(Organ::Stem);
    }
    PointCloud::new(pts).unwrap().with_organ(organ).unwrap()
}

#[test]
fn analytic_slab() {
    let edge = 0.01;
    let area = 0.63;
    for (seed, size) in [(1, [0.2, 0.1, 0.05]), (2, [0.31, 0.07, 0.12]), (3, [0.05, 0.05, 0.05])] {
        let s = Point3::from_array(size);
        let c = slab(Point3::new(1.234, -0.77, 0.3), s, 60_000, seed);
        let got = sei(&c, None, area, edge).unwrap();
        let exact = s.x * s.y * s.z / area;
        // One extra voxel layer on every face at most.
        let loose = (s.x + edge) * (s.y + edge) * (s.z + edge) / area;
        assert!(got >= exact * (1.0 - 1e-9) && got <= loose * (1.0 + 1e-9), "{got} vs [{exact}, {loose}]");
    }
}

#[test]
fn grid_aligned_slab_is_exact() {
    // Cell-centred lattice points: every covered voxel holds exactly one point.
    let edge = 0.01;
    let mut pts = Vec::new();
    for i in 0..20 {
        for j in 0..10 {
            for k in 0..5 {
                pts.push(Point3::new((i as f64 + 0.5) * edge, (j as f64 + 0.5) * edge, (k as f64 + 0.5) * edge));
            }
        }
    }
    let n = pts.len();
    let c = PointCloud::new(pts).unwrap().with_organ(vec![Organ::Silique; n]).unwrap();
    let got = sei(&c, None, 0.63, edge).unwrap();
    assert!((got - 0.2 * 0.1 * 0.05 / 0.63).abs() < 1e-15);
}

#[test]
fn empty_band_is_zero() {
    let mut pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 0.0, 0.9)];
    pts.push(Point3::new(0.0, 0.0, 0.05));
    let c = PointCloud::new(pts).unwrap().with_organ(vec![Organ::Silique; 3]).unwrap();
    let p = partition_layers(&c).unwrap();
    assert_eq!(sei(&c, Some((&p, Layer::Middle)), 0.63, 0.01).unwrap(), 0.0);
    assert!(sei(&c, Some((&p, Layer::Lower)), 0.63, 0.01).unwrap() > 0.0);
}

#[test]
fn aligned_bands_sum_to_total() {
    let edge = 0.01;
    // z from 0 to 0.30: thirds land on voxel boundaries 0.1 and 0.2.
    let mut pts = Vec::new();
    for i in 0..4 {
        for k in 0..=30 {
            pts.push(Point3::new(i as f64 * edge, 0.0, k as f64 * edge));
        }
    }
    let n = pts.len();
    let c = PointCloud::new(pts).unwrap().with_organ(vec![Organ::Silique; n]).unwrap();
    let p = partition_layers(&c).unwrap();
    assert!((p.b1 - 0.1).abs() < 1e-15 && (p.b2 - 0.2).abs() < 1e-15);
    let total = sei(&c, None, 1.0, edge).unwrap();
    let parts: f64 = Layer::ALL.iter().map(|&l| sei(&c, Some((&p, l)), 1.0, edge).unwrap()).sum();
    assert!((total - parts).abs() < 1e-15, "{total} vs {parts}");
}

#[test]
fn report_fields() {
    let c = slab(Point3::new(0.0, 0.0, 0.0), Point3::new(0.3, 0.2, 0.3), 20_000, 9);
    let layout = PlotLayout::default();
    let r = trait_report(&c, "plot-a", CloudKind::Complete, &layout, &TraitConfig::default()).unwrap();
    assert_eq!(r.silique_points, 20_000);
    assert!((r.plane_area - 1.12).abs() < 1e-12);
    assert!((r.total_sei - r.total_volume / r.plane_area).abs() < 1e-15);
    let sum: f64 = r.layers.iter().map(|l| l.volume).sum();
    // Bands voxelised separately share at most two boundary layers.
    let slack = 2.0 * 0.31 * 0.21 * 0.01;
    assert!(sum >= r.total_volume - 1e-12 && sum <= r.total_volume + slack);
    assert_eq!(r.layer(Layer::Upper).layer, Layer::Upper);
    let hull = TraitConfig { plane_area: PlaneArea::ConvexHull, ..TraitConfig::default() };
    let r2 = trait_report(&c, "plot-a", CloudKind::Complete, &layout, &hull).unwrap();
    assert!(r2.plane_area > 0.3 * 0.2);
}

#[test]
fn regression_by_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut recs = Vec::new();
    for i in 0..30 {
        let s: f64 = rng.random_range(0.005..0.03);
        for v in Variant::all() {
            recs.push(YieldRecord { plot: format!("p{i}"), variant: v, sei: s, yield_: 2.0 * s + 1e-12 * rng.random::<f64>() });
        }
    }
    let fits = yield_regression(&recs).unwrap();
    assert_eq!(fits.len(), 8);
    for f in fits.values() {
        assert!(f.r2 > 1.0 - 1e-9);
        assert!((f.slope - 2.0).abs() < 1e-6);
    }
}

#[test]
fn shuffled_yields_have_no_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = Variant { kind: CloudKind::Complete, layer: None };
    let sei: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..0.05)).collect();
    let mut y: Vec<f64> = sei.iter().map(|s| 2.0 * s).collect();
    y.shuffle(&mut rng);
    let recs: Vec<YieldRecord> = sei
        .iter()
        .zip(&y)
        .map(|(&s, &y)| YieldRecord { plot: String::new(), variant: v, sei: s, yield_: y })
        .collect();
    let r2 = yield_regression(&recs).unwrap()[&v].r2;
    assert!(r2 < 0.03, "{r2}");
}

#[test]
fn too_few_records() {
    let v = Variant { kind: CloudKind::Incomplete, layer: Some(Layer::Lower) };
    let recs: Vec<YieldRecord> = (0..2).map(|i| YieldRecord { plot: String::new(), variant: v, sei: i as f64, yield_: 1.0 }).collect();
    assert!(yield_regression(&recs).is_err());
    assert!(yield_regression(&[]).is_err());
}

#[test]
fn variant_names() {
    let names: Vec<String> = Variant::all().iter().map(|v| v.to_string()).collect();
    assert_eq!(names[0], "complete/all");
    assert_eq!(names[7], "incomplete/upper");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn horizontal_translation_invariant(seed in any::<u64>(), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let c = slab(Point3::new(0.0, 0.0, 0.0), Point3::new(0.2, 0.1, 0.1), 3000, seed);
        let mut moved = c.clone();
        moved.translate(Point3::new(dx, dy, 0.0));
        let a = sei(&c, None, 0.63, 0.01).unwrap();
        let b = sei(&moved, None, 0.63, 0.01).unwrap();
        // Translation can move points across a snapped boundary by rounding only.
        prop_assert!((a - b).abs() <= 0.02 * a, "{} vs {}", a, b);
        let pa = partition_layers(&c).unwrap();
        let pb = partition_layers(&moved).unwrap();
        prop_assert_eq!(pa, pb);
    }

    #[test]
    fn doubling_slab_doubles_sei(seed in any::<u64>(), h in 0.05f64..0.2) {
        let edge = 0.01;
        let one = slab(Point3::new(0.0, 0.0, 0.0), Point3::new(0.2, 0.1, h), 40_000, seed);
        let two = slab(Point3::new(0.0, 0.0, 0.0), Point3::new(0.4, 0.1, h), 80_000, seed ^ 7);
        let a = sei(&one, None, 1.0, edge).unwrap();
        let b = sei(&two, None, 1.0, edge).unwrap();
        // Within one voxel layer on each slab.
        let tol = 2.0 * ((0.4 + edge) * (0.1 + edge) * (h + edge) - 0.4 * 0.1 * h);
        prop_assert!((b - 2.0 * a).abs() <= tol, "{} vs {}", b, 2.0 * a);
    }

    #[test]
    fn every_silique_point_in_one_band(seed in any::<u64>(), n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3> = (0..n).map(|_| Point3::new(0.0, 0.0, rng.random_range(-1.0..1.0))).collect();
        let c = PointCloud::new(pts.clone()).unwrap().with_organ(vec![Organ::Silique; n]).unwrap();
        let p = partition_layers(&c).unwrap();
        prop_assert!(p.z_min <= p.b1 && p.b1 <= p.b2 && p.b2 <= p.z_max);
        for q in &pts {
            let l = p.layer_of(q.z);
            let (lo, hi) = p.bounds(l);
            prop_assert!(lo <= q.z && q.z <= hi);
            let hits = Layer::ALL.iter().filter(|&&m| {
                let (a, b) = p.bounds(m);
                a <= q.z && (q.z < b || (m == Layer::Upper && q.z <= b))
            }).count();
            prop_assert!(hits == 1 || p.z_min == p.z_max);
        }
    }
}

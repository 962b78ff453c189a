use std::path::Path;

use cppcn::checkpoint::Checkpoint;
use cppcn::config::RunConfig;
use cppcn::manifest::{parse_manifest, to_json_string};
use cppcn::obj::parse_obj;
use cppcn::ply::{CloudFile, Format, PlyData, ScalarType};
use cppcn_core::cppcn::{BlockGrid, Generator, NetworkConfig};
use cppcn_core::geom::{Aabb, Organ, Point3, PointCloud};
use cppcn_core::popsim::{DatasetManifest, SampleRecord, Split, Stage};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(rng: &mut ChaCha8Rng, exact_f32: bool) -> PointCloud {
    let n = rng.random_range(1..200);
    let coord = |rng: &mut ChaCha8Rng| {
        let v: f64 = rng.random_range(-100.0..100.0);
        if exact_f32 {
            v as f32 as f64
        } else {
            v
        }
    };
    let pts = (0..n).map(|_| Point3::new(coord(rng), coord(rng), coord(rng))).collect();
    let mut c = PointCloud::new(pts).unwrap();
    if rng.random_bool(0.5) {
        let organs = (0..n).map(|_| Organ::ALL[rng.random_range(0..5)]).collect();
        c = c.with_organ(organs).unwrap();
    }
    if rng.random_bool(0.5) {
        c = c.with_plant_ids((0..n).map(|_| rng.random_range(0..16)).collect()).unwrap();
    }
    if rng.random_bool(0.5) {
        c = c.with_occluded((0..n).map(|_| rng.random_bool(0.3)).collect()).unwrap();
    }
    if rng.random_bool(0.5) {
        c = c.with_synthetic((0..n).map(|_| rng.random_bool(0.3)).collect()).unwrap();
    }
    c
}

fn bits(c: &PointCloud) -> Vec<[u64; 3]> {
    c.points().iter().map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect()
}

#[test]
fn binary_round_trip_is_bit_exact_on_1000_clouds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let p = Path::new("r.ply");
    for i in 0..1000 {
        let f64_coords = i % 2 == 1;
        let cloud = random_cloud(&mut rng, !f64_coords);
        let mut file = CloudFile::new(cloud.clone());
        if f64_coords {
            file.coord_type = ScalarType::Float64;
        }
        let bytes = file.to_ply(Format::BinaryLittleEndian).to_bytes().unwrap();
        let back = CloudFile::from_ply(PlyData::parse(&bytes, p).unwrap(), p).unwrap();
        assert_eq!(bits(&back.cloud), bits(&cloud), "cloud {i}");
        assert_eq!(back.cloud, cloud, "cloud {i}");
        let again = back.to_ply(Format::BinaryLittleEndian).to_bytes().unwrap();
        assert_eq!(again, bytes, "cloud {i}");
    }
}

#[test]
fn ascii_round_trip_within_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = Path::new("a.ply");
    for _ in 0..100 {
        let cloud = random_cloud(&mut rng, false);
        let bytes = CloudFile::new(cloud.clone()).to_ply(Format::Ascii).to_bytes().unwrap();
        let back = CloudFile::from_ply(PlyData::parse(&bytes, p).unwrap(), p).unwrap().cloud;
        for (a, b) in back.points().iter().zip(cloud.points()) {
            assert!((*a - *b).norm() <= 1e-6 * b.norm().max(1.0), "{a:?} {b:?}");
        }
        assert_eq!(back.organ(), cloud.organ());
        assert_eq!(back.plant_ids(), cloud.plant_ids());
    }
}

fn record(i: usize, rng: &mut ChaCha8Rng) -> SampleRecord {
    let lo = Point3::new(rng.random(), rng.random(), rng.random());
    SampleRecord {
        id: format!("s{i:05}"),
        stage: Some(Stage::ALL[i % 4]),
        split: if rng.random_bool(0.8) { Split::Train } else { Split::Val },
        surface_path: format!("samples/s{i:05}_surface.ply"),
        occluded_path: format!("samples/s{i:05}_occluded.ply"),
        n_surface: 2048,
        n_occluded: 2048,
        frame: Aabb::new(lo, lo + Point3::new(rng.random(), 1.0 / 3.0, rng.random::<f64>() * 1e-7)).unwrap(),
        scene_seed: rng.random(),
        sample_seed: rng.random(),
        asset_ids: (0..4).map(|k| format!("plant-{}", (i + k) % 7)).collect(),
    }
}

fn manifest(n: usize, seed: u64) -> DatasetManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<SampleRecord> = (0..n).map(|i| record(i, &mut rng)).collect();
    DatasetManifest {
        seed,
        train_fraction: 0.8,
        train_count: samples.iter().filter(|r| r.split == Split::Train).count(),
        val_count: samples.iter().filter(|r| r.split == Split::Val).count(),
        samples,
    }
}

#[test]
fn manifest_round_trips() {
    let p = Path::new("m.json");
    let empty = DatasetManifest::default();
    assert_eq!(parse_manifest(&to_json_string(&empty), p).unwrap(), empty);

    let big = manifest(4000, 11);
    let text = to_json_string(&big);
    let back = parse_manifest(&text, p).unwrap();
    assert_eq!(back, big);
    assert_eq!(to_json_string(&back), text);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_save_is_byte_stable(n in 0usize..40, seed in any::<u64>()) {
        let m = manifest(n, seed);
        let s = to_json_string(&m);
        let back = parse_manifest(&s, Path::new("m.json")).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(to_json_string(&back), s);
    }
}

#[test]
fn unknown_keys_are_named() {
    let p = Path::new("m.json");
    let text = to_json_string(&manifest(3, 1)).replacen("\"n_surface\"", "\"n_surfaces\"", 1);
    let e = parse_manifest(&text, p).unwrap_err().to_string();
    assert!(e.contains("n_surfaces") && e.contains("/samples/0"), "{e}");

    let e = RunConfig::parse("[network]\nlayers = 3\n", Path::new("run.toml"), Vec::new())
        .unwrap_err()
        .to_string();
    assert!(e.starts_with("run.toml:/network") && e.contains("`layers`"), "{e}");
}

#[test]
fn manifest_count_mismatch_is_rejected() {
    let mut m = manifest(5, 3);
    m.train_count += 1;
    let e = parse_manifest(&to_json_string(&m), Path::new("m.json")).unwrap_err().to_string();
    assert!(e.starts_with("m.json:"), "{e}");
}

#[test]
fn malformed_files_report_locations() {
    let p = Path::new("x.ply");
    let header = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    let mut bytes = header.as_bytes().to_vec();
    bytes.extend_from_slice(&[0u8; 20]);
    let e = PlyData::parse(&bytes, p).unwrap_err().to_string();
    assert!(e.starts_with("x.ply:byte "), "{e}");

    let e = PlyData::parse(b"ply\nformat binary_big_endian 1.0\nend_header\n", p).unwrap_err().to_string();
    assert!(e.starts_with("x.ply:line 2:"), "{e}");

    let e = PlyData::parse(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3 4\n", p)
        .unwrap_err()
        .to_string();
    assert!(e.starts_with("x.ply:line 8:"), "{e}");

    let e = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 x\n", Path::new("y.obj")).unwrap_err().to_string();
    assert!(e.starts_with("y.obj:line 4:"), "{e}");

    let e = parse_manifest("{\"seed\": 1,\n\"train_fraction\": }", Path::new("m.json")).unwrap_err().to_string();
    assert!(e.starts_with("m.json:line 2 column"), "{e}");
    let e = parse_manifest("{\"seed\": 1, \"samples\": [{\"id\": 5}]}", Path::new("m.json")).unwrap_err().to_string();
    assert!(e.starts_with("m.json:/samples/0/id:"), "{e}");

    let net = NetworkConfig {
        k: 4,
        layer_dims: vec![4, 8],
        n_in: 32,
        m_out: 16,
        m1: 4,
        m2: 8,
        fc_dims: [8, 8, 8],
        pooled_layers: 2,
    };
    let g: Generator<f32> = Generator::new(&net, 1).unwrap();
    let ck = Checkpoint::new(g, BlockGrid::WHOLE, 1e-5, 3).to_bytes();
    let mut extra = ck.clone();
    extra.push(0);
    let e = Checkpoint::from_bytes(&extra, Path::new("c.cpcn")).unwrap_err().to_string();
    assert!(e.starts_with(&format!("c.cpcn:byte {}:", ck.len())), "{e}");
}

#[test]
fn unknown_ply_properties_survive() {
    let p = Path::new("u.ply");
    let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty int plant_id\nend_header\n0 0 0 255 3\n1 1 1 7 -1\n";
    let f = CloudFile::from_ply(PlyData::parse(text.as_bytes(), p).unwrap(), p);
    // A negative plant id is not representable as a label.
    assert!(f.is_err());
    let text = text.replace(" -1\n", " 4\n");
    let f = CloudFile::from_ply(PlyData::parse(text.as_bytes(), p).unwrap(), p).unwrap();
    assert_eq!(f.cloud.plant_ids().unwrap(), &[3, 4]);
    let bin = f.to_ply(Format::BinaryLittleEndian).to_bytes().unwrap();
    let g = CloudFile::from_ply(PlyData::parse(&bin, p).unwrap(), p).unwrap();
    assert_eq!(g, f);
    // Label properties are written first, extras after them in file order.
    let ascii = String::from_utf8(g.to_ply(Format::Ascii).to_bytes().unwrap()).unwrap();
    let canonical = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty int plant_id\nproperty uchar red\nend_header\n0 0 0 3 255\n1 1 1 4 7\n";
    assert_eq!(ascii, canonical);
}

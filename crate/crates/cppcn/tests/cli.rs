use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cppcn::manifest::load_manifest;
use cppcn::ply::{read_cloud, write_cloud, Format};
use cppcn_core::popsim::{synthetic_plant, Split, Stage, SyntheticPlantParams};
use serde_json::Value;

/// Small enough for a debug-profile run in seconds.
pub const TINY: &str = r#"
seed = 5
[layout]
rows = 2
cols = 2
[rig]
count = 12
[dataset]
count = 10
stages = ["silique"]
synthetic_per_stage = 2
[dataset.synthetic]
points = 300
[network]
k = 4
layer_dims = [4, 8, 16]
n_in = 64
m_out = 64
m1 = 16
m2 = 32
fc_dims = [32, 16, 8]
pooled_layers = 3
[discriminator]
k = 4
layer_dims = [4, 8]
pooled_layers = 2
fc_dims = [8, 4]
[train]
max_epochs = 2
batch_size = 4
validate_every = 1
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cppcn"));
    c.env_remove("CPPCN_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, TINY).unwrap();
    (dir, cfg)
}

#[test]
fn dataset_ten_at_point_eight_splits_eight_two() {
    let (dir, _) = setup();
    let v = ok_json(&run(dir.path(), &["--config", "run.toml", "dataset", "--out", "ds", "--train-fraction", "0.8"]));
    assert_eq!(v["samples"], 10);
    assert_eq!(v["train"], 8);
    assert_eq!(v["val"], 2);
    let m = load_manifest(&dir.path().join("ds/manifest.json")).unwrap();
    assert_eq!(m.split(Split::Train).count(), 8);
    assert_eq!(m.split(Split::Val).count(), 2);
    for r in &m.samples {
        let s = read_cloud(&dir.path().join("ds").join(&r.surface_path)).unwrap();
        assert_eq!(s.len(), 64);
    }
}

#[test]
fn eval_identical_files() {
    let (dir, _) = setup();
    let plant = synthetic_plant(Stage::Silique, 3, &SyntheticPlantParams::default()).unwrap();
    let p = dir.path().join("a.ply");
    write_cloud(&p, plant.cloud(), Format::BinaryLittleEndian).unwrap();
    let v = ok_json(&run(dir.path(), &["eval", "a.ply", "a.ply"]));
    assert_eq!(v["cd_sq"], 0.0);
    assert_eq!(v["cd_rms"], 0.0);
    assert_eq!(v["ssim3d"], 1.0);
}

#[test]
fn eval_best_of_finds_planted_copy() {
    let (dir, _) = setup();
    let sims = dir.path().join("sims");
    fs::create_dir(&sims).unwrap();
    let params = SyntheticPlantParams::default();
    for i in 0..5u64 {
        let c = synthetic_plant(Stage::Silique, 100 + i, &params).unwrap();
        write_cloud(&sims.join(format!("sim_{i}.ply")), c.cloud(), Format::BinaryLittleEndian).unwrap();
    }
    fs::copy(sims.join("sim_3.ply"), dir.path().join("real.ply")).unwrap();
    let v = ok_json(&run(dir.path(), &["eval", "--best-of", "real.ply", "sims"]));
    assert_eq!(v["best_index"], 3);
    assert_eq!(v["ssim3d"], 1.0);
    assert_eq!(v["candidates"], 5);
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let (dir, _) = setup();
    let o = run(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());

    let o = run(dir.path(), &["eval", "missing.ply", "missing.ply"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.ply"));

    fs::write(dir.path().join("bad.toml"), "[train]\nlearning_rate = 1\n").unwrap();
    let o = run(dir.path(), &["--config", "bad.toml", "gradcheck"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:/train") && err.contains("learning_rate"), "{err}");

    fs::write(dir.path().join("bad.ply"), "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n").unwrap();
    let o = run(dir.path(), &["eval", "bad.ply", "bad.ply"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.ply:line"), "{err}");
}

#[test]
fn env_override_reaches_config() {
    let (dir, _) = setup();
    let o = bin()
        .current_dir(dir.path())
        .env("CPPCN_DATASET__COUNT", "3")
        .args(["--config", "run.toml", "dataset", "--out", "ds"])
        .output()
        .unwrap();
    assert_eq!(ok_json(&o)["samples"], 3);
}

#[test]
fn simulate_then_occlude() {
    let (dir, _) = setup();
    let v = ok_json(&run(dir.path(), &["--config", "run.toml", "simulate", "--out", "scenes", "--count", "2"]));
    assert_eq!(v["scenes"].as_array().unwrap().len(), 2);
    let v = ok_json(&run(
        dir.path(),
        &[
            "--config",
            "run.toml",
            "occlude",
            "--cloud",
            "scenes/scene_0000.ply",
            "--mesh",
            "scenes/scene_0000.obj",
            "--out",
            "labelled.ply",
        ],
    ));
    let total = v["points"].as_u64().unwrap();
    assert_eq!(total, 4 * 300);
    assert_eq!(v["surface"].as_u64().unwrap() + v["occluded"].as_u64().unwrap(), total);
    let c = read_cloud(&dir.path().join("labelled.ply")).unwrap();
    let occ = c.occluded().unwrap().iter().filter(|&&f| f).count() as u64;
    assert_eq!(occ, v["occluded"].as_u64().unwrap());
    assert_eq!(c.plant_ids().unwrap().iter().max(), Some(&3));
}

#[test]
fn sei_and_regress() {
    let (dir, _) = setup();
    let plant = synthetic_plant(Stage::Silique, 9, &SyntheticPlantParams::default()).unwrap();
    write_cloud(&dir.path().join("p.ply"), plant.cloud(), Format::BinaryLittleEndian).unwrap();
    let v = ok_json(&run(dir.path(), &["sei", "--cloud", "p.ply", "--id", "plot-1"]));
    assert_eq!(v["cloud_id"], "plot-1");
    assert_eq!(v["layers"].as_array().unwrap().len(), 3);
    assert!(v["total_sei"].as_f64().unwrap() > 0.0);

    let mut csv = String::from("plot,variant,sei,yield\n");
    for i in 0..6 {
        let s = 1.0 + i as f64;
        csv.push_str(&format!("p{i},complete/all,{s},{}\n", 2.0 * s + 1.0));
        csv.push_str(&format!("p{i},incomplete/upper,{s},{}\n", [3.0, 1.0, 4.0, 1.0, 5.0, 9.0][i]));
    }
    fs::write(dir.path().join("y.csv"), csv).unwrap();
    let o = run(dir.path(), &["regress", "--csv", "y.csv", "--svg-dir", "plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(o.stdout).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("variant,n,slope,intercept,r2"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "complete/all");
    assert!((first[2].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
    assert!((first[4].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert!(dir.path().join("plots/complete_all.svg").exists());
    assert!(dir.path().join("plots/incomplete_upper.svg").exists());

    fs::write(dir.path().join("bad.csv"), "plot,variant,sei,yield\np0,complete/sideways,1,2\n").unwrap();
    let o = run(dir.path(), &["regress", "--csv", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("bad2.csv"), "plot,variant,sei,yield\np0,complete/all,1,2\np1,complete/all,x,2\n").unwrap();
    let o = run(dir.path(), &["regress", "--csv", "bad2.csv"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad2.csv:line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_complete_eval() {
    let (dir, _) = setup();
    ok_json(&run(dir.path(), &["--config", "run.toml", "dataset", "--out", "ds"]));
    let v = ok_json(&run(dir.path(), &["--config", "run.toml", "train", "--manifest", "ds/manifest.json", "--out", "model"]));
    assert_eq!(v["epochs"], 2);
    let log = fs::read_to_string(dir.path().join("model/train_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,l_com,l_adv,val_cd,alpha"));
    assert_eq!(log.lines().count(), 3);

    let m = load_manifest(&dir.path().join("ds/manifest.json")).unwrap();
    let surf = format!("ds/{}", m.samples[0].surface_path);
    let v = ok_json(&run(
        dir.path(),
        &["complete", "--input", &surf, "--checkpoint", "model/checkpoint.cpcn", "--out", "done.ply"],
    ));
    assert_eq!(v["input_points"], 64);
    // One block of `m_out` points per cell of the default 2x2x2 grid.
    assert_eq!(v["added_points"], 8 * 64);
    let done = read_cloud(&dir.path().join("done.ply")).unwrap();
    assert_eq!(done.synthetic().unwrap().iter().filter(|&&f| f).count(), 8 * 64);
    let v = ok_json(&run(dir.path(), &["eval", "done.ply", &surf]));
    assert!(v["cd_sq"].as_f64().unwrap() > 0.0);
}

#[test]
fn gradcheck_passes() {
    let (dir, _) = setup();
    let v = ok_json(&run(dir.path(), &["gradcheck", "--entries", "3"]));
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() > 20);
}

/// Written by the toy training acceptance run with `CPPCN_TOY_FIXTURE` set.
#[test]
fn toy_fixture_completion_beats_input_only() {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy");
    let (dir, _) = setup();
    let out = dir.path().join("done.ply");
    let v = ok_json(&run(
        dir.path(),
        &[
            "complete",
            "--input",
            fx.join("surface.ply").to_str().unwrap(),
            "--checkpoint",
            fx.join("checkpoint.cpcn").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
    ));
    assert_eq!(v["added_points"], 512);
    let v = ok_json(&run(dir.path(), &["eval", out.to_str().unwrap(), fx.join("full.ply").to_str().unwrap()]));
    let meta: Value = serde_json::from_str(&fs::read_to_string(fx.join("meta.json")).unwrap()).unwrap();
    let cd = v["cd_sq"].as_f64().unwrap();
    assert!(cd < meta["input_only_cd_sq"].as_f64().unwrap(), "{cd} vs {meta}");
    // Written clouds carry 32-bit coordinates.
    assert!((cd - meta["completed_cd_sq"].as_f64().unwrap()).abs() <= 1e-4 * cd);
}

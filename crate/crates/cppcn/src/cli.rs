//! Command-line surface. Machine-readable results go to the writer passed
//! to [`run`]; diagnostics are left to the caller.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use cppcn_core::autodiff::{primitive_suite, CheckEntry};
use cppcn_core::cppcn::{complete_cloud, generator_graph_check, log_row, train, LOG_HEADER};
use cppcn_core::metrics::{best_match_ssim, chamfer_report, ssim3d, surface_only};
use cppcn_core::popsim::Stage;
use cppcn_core::traits_yield::{trait_report, yield_regression, CloudKind, Variant, YieldRecord};
use serde::Serialize;
use serde_json::json;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{asset_pool, assemble, build_dataset, label, load_examples, scene_plan, write_exact};
use crate::error::{Error, Result, ResultExt};
use crate::manifest::to_json_string;
use crate::obj::{read_obj, write_obj};
use crate::ply::{read_cloud, read_cloud_file, write_cloud_file, CloudFile, Format};
use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "cppcn", version, about = "Canopy point cloud completion: simulate, label, train, complete, measure")]
pub struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` and `train.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble population scenes from plant assets.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Scene count (default `dataset.count`).
        #[arg(long)]
        count: Option<usize>,
        /// Use this stage for every scene instead of `dataset.stages`.
        #[arg(long)]
        stage: Option<String>,
        /// Asset directory (default `paths.assets`, else synthetic plants).
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Label a cloud against its mesh as surface or occluded.
    Occlude {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate completion samples and a manifest.
    Dataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Train the completion network on a dataset.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for `checkpoint.cpcn` and `train_log.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Complete a surface cloud with a trained checkpoint.
    Complete {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ascii: bool,
    },
    /// Compare clouds: `eval A B`, or `eval --best-of REAL SIM...`
    /// (directories are expanded to their `.ply` files).
    Eval {
        first: PathBuf,
        #[arg(required = true)]
        rest: Vec<PathBuf>,
        #[arg(long)]
        best_of: bool,
    },
    /// Silique volume and efficiency index of an organ-labelled cloud.
    Sei {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, value_enum, default_value_t = Kind::Complete)]
        kind: Kind,
    },
    /// Regress yield on SEI from a `plot,variant,sei,yield` CSV.
    Regress {
        #[arg(long)]
        csv: PathBuf,
        /// Write one scatter plot per variant here.
        #[arg(long)]
        svg_dir: Option<PathBuf>,
    },
    /// Verify analytic gradients against central differences.
    Gradcheck {
        /// Sampled entries per tensor for the full-graph check.
        #[arg(long, default_value_t = 6)]
        entries: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Complete,
    Incomplete,
}

impl From<Kind> for CloudKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Complete => CloudKind::Complete,
            Kind::Incomplete => CloudKind::Incomplete,
        }
    }
}

/// Configuration file, environment and global flags combined.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    out.write_all(to_json_string(value).as_bytes()).at("<stdout>")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Simulate { out: dir, count, stage, assets } => {
            if let Some(c) = count {
                cfg.dataset.count = *c;
            }
            if let Some(s) = stage {
                let st = Stage::parse(s).ok_or_else(|| Error::Usage(format!("unknown stage `{s}`")))?;
                cfg.dataset.stages = vec![st];
            }
            if assets.is_some() {
                cfg.paths.assets = assets.clone();
            }
            simulate(&cfg, dir, out)
        }
        Command::Occlude { cloud, mesh, out: path } => occlude(&cfg, cloud, mesh, path, out),
        Command::Dataset { out: dir, count, train_fraction } => {
            if let Some(c) = count {
                cfg.dataset.count = *c;
            }
            if let Some(f) = train_fraction {
                cfg.dataset.train_fraction = *f;
            }
            cfg.validate()?;
            let m = build_dataset(&cfg, dir)?;
            emit(
                out,
                &json!({
                    "manifest": dir.join(crate::dataset::MANIFEST_FILE),
                    "samples": m.samples.len(),
                    "train": m.train_count,
                    "val": m.val_count,
                }),
            )
        }
        Command::Train { manifest, out: dir, epochs } => {
            if let Some(e) = epochs {
                cfg.train.max_epochs = *e;
            }
            cfg.validate()?;
            train_cmd(&cfg, manifest, dir, out)
        }
        Command::Complete { input, checkpoint, out: path, ascii } => complete(input, checkpoint, path, *ascii, out),
        Command::Eval { first, rest, best_of } => eval(&cfg, first, rest, *best_of, out),
        Command::Sei { cloud, id, kind } => {
            let c = read_cloud(cloud)?;
            let id = id.clone().unwrap_or_else(|| cloud.display().to_string());
            let r = trait_report(&c, &id, (*kind).into(), &cfg.layout, &cfg.traits).map_err(|e| Error::data(cloud, e))?;
            emit(out, &r)
        }
        Command::Regress { csv, svg_dir } => regress(csv, svg_dir.as_deref(), out),
        Command::Gradcheck { entries } => gradcheck(cfg.seed, *entries, out),
    }
}

#[derive(Serialize)]
struct SceneMeta<'a> {
    seed: u64,
    stage: Option<Stage>,
    asset_ids: &'a [String],
    anchors: Vec<[f64; 3]>,
    layout: Option<cppcn_core::popsim::PlotLayout>,
}

fn simulate(cfg: &RunConfig, dir: &Path, out: &mut dyn Write) -> Result<()> {
    create_dir(dir)?;
    let pool = asset_pool(cfg)?;
    let mut names = Vec::new();
    for (i, (stage, seed)) in scene_plan(cfg)?.into_iter().enumerate() {
        let scene = assemble(&pool, cfg, stage, seed)?;
        let name = format!("scene_{i:04}");
        write_exact(&dir.join(format!("{name}.ply")), &scene.cloud)?;
        write_obj(&dir.join(format!("{name}.obj")), &scene.mesh)?;
        let meta = SceneMeta {
            seed: scene.seed,
            stage: scene.stage,
            asset_ids: &scene.asset_ids,
            anchors: scene.anchors.iter().map(|p| [p.x, p.y, p.z]).collect(),
            layout: scene.layout,
        };
        let p = dir.join(format!("{name}.json"));
        fs::write(&p, to_json_string(&meta)).at(&p)?;
        names.push(name);
    }
    emit(out, &json!({ "scenes": names }))
}

fn occlude(cfg: &RunConfig, cloud: &Path, mesh: &Path, path: &Path, out: &mut dyn Write) -> Result<()> {
    let mut file = read_cloud_file(cloud)?;
    let m = read_obj(mesh)?;
    let scene = cppcn_core::popsim::PopulationScene {
        cloud: file.cloud.clone(),
        mesh: m,
        layout: None,
        anchors: Vec::new(),
        asset_ids: Vec::new(),
        stage: None,
        seed: 0,
    };
    let labels = label(&scene, cfg)?;
    file.cloud.set_occluded(labels.occluded_flags()).map_err(|e| Error::data(cloud, e))?;
    write_cloud_file(path, &file, Format::BinaryLittleEndian)?;
    emit(
        out,
        &json!({
            "points": labels.len(),
            "surface": labels.surface_count(),
            "occluded": labels.occluded_count(),
            "cameras": cfg.rig.count,
        }),
    )
}

fn train_cmd(cfg: &RunConfig, manifest: &Path, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let (train_set, val_set) = load_examples(manifest, &cfg.network)?;
    create_dir(dir)?;
    let log_path = dir.join("train_log.csv");
    let mut log = String::from(LOG_HEADER);
    log.push('\n');
    let outcome = train::<f32>(&train_set, &val_set, &cfg.network, &cfg.discriminator, &cfg.train, |e| {
        log.push_str(&log_row(e));
        log.push('\n');
        eprintln!("epoch {} l_com {:.6} l_adv {:.4}", e.epoch, e.l_com, e.l_adv);
    })?;
    fs::write(&log_path, log).at(&log_path)?;
    let last = outcome.log.last().map_or(0, |e| e.epoch);
    let epoch = outcome.best_epoch.unwrap_or(last);
    let ckpt_path = dir.join("checkpoint.cpcn");
    Checkpoint::new(outcome.generator, cfg.blocks, cfg.train.bn_eps, epoch).save(&ckpt_path)?;
    emit(
        out,
        &json!({
            "checkpoint": ckpt_path,
            "log": log_path,
            "epochs": outcome.log.len(),
            "kept_epoch": epoch,
            "first_l_com": outcome.log.first().map(|e| e.l_com),
            "last_l_com": outcome.log.last().map(|e| e.l_com),
            "stopped_early": outcome.stopped_early,
        }),
    )
}

fn complete(input: &Path, checkpoint: &Path, path: &Path, ascii: bool, out: &mut dyn Write) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let surface = read_cloud(input)?;
    let done = complete_cloud(&surface, &ck.generator, &ck.header.blocks, ck.header.bn_eps)
        .map_err(|e| Error::data(input, e))?;
    let format = if ascii { Format::Ascii } else { Format::BinaryLittleEndian };
    write_cloud_file(path, &CloudFile::new(done.clone()), format)?;
    emit(
        out,
        &json!({
            "input_points": surface.len(),
            "added_points": done.len() - surface.len(),
            "total_points": done.len(),
        }),
    )
}

/// Paths as given, with directories replaced by their `.ply` files in name order.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut v: Vec<PathBuf> = fs::read_dir(p)
                .at(p)?
                .map(|e| e.map(|e| e.path()).at(p))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|f| f.extension().is_some_and(|e| e == "ply"))
                .collect();
            v.sort();
            out.extend(v);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn eval(cfg: &RunConfig, first: &Path, rest: &[PathBuf], best_of: bool, out: &mut dyn Write) -> Result<()> {
    let a = read_cloud(first)?;
    if best_of {
        let files = expand(rest)?;
        let sims = files
            .iter()
            .map(|p| read_cloud(p).map(|c| surface_only(&c)))
            .collect::<Result<Vec<_>>>()?;
        let (i, score) = best_match_ssim(&a, &sims, &cfg.ssim)?;
        return emit(out, &json!({ "best_index": i, "best_file": files[i], "ssim3d": score, "candidates": files.len() }));
    }
    if rest.len() != 1 {
        return Err(Error::Usage("eval takes exactly two clouds unless --best-of is given".into()));
    }
    let b = read_cloud(&rest[0])?;
    let cd = chamfer_report(&a, &b)?;
    let s = ssim3d(&a, &b, &cfg.ssim)?;
    emit(out, &json!({ "cd_sq": cd.cd_sq, "cd_rms": cd.cd_rms, "ssim3d": s.similarity }))
}

#[derive(Debug, serde::Deserialize)]
struct CsvRow {
    plot: String,
    variant: String,
    sei: f64,
    #[serde(rename = "yield")]
    yield_: f64,
}

/// `plot,variant,sei,yield` records; locations are CSV line numbers.
pub fn read_yield_csv(path: &Path) -> Result<Vec<YieldRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let variant: Variant = row
            .variant
            .parse()
            .map_err(|e: cppcn_core::Error| Error::parse(path, format!("plot {}", row.plot), e.to_string()))?;
        out.push(YieldRecord {
            plot: row.plot,
            variant,
            sei: row.sei,
            yield_: row.yield_,
        });
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let loc = e.position().map_or("record".to_string(), |p| format!("line {}", p.line()));
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::Deserialize { err, .. } => Error::parse(path, loc, err.to_string()),
        other => Error::parse(path, loc, format!("{other:?}")),
    }
}

fn regress(csv_path: &Path, svg_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let records = read_yield_csv(csv_path)?;
    let fits = yield_regression(&records).map_err(|e| Error::data(csv_path, e))?;
    let mut table = String::from("variant,n,slope,intercept,r2\n");
    for (v, f) in &fits {
        table.push_str(&format!("{v},{},{},{},{}\n", f.n, f.slope, f.intercept, f.r2));
    }
    out.write_all(table.as_bytes()).at("<stdout>")?;
    if let Some(dir) = svg_dir {
        create_dir(dir)?;
        for (v, f) in &fits {
            let pts: Vec<(f64, f64)> = records.iter().filter(|r| r.variant == *v).map(|r| (r.sei, r.yield_)).collect();
            let title = format!("{v}  R² = {:.3}", f.r2);
            let s = svg::scatter(&pts, Some((f.slope, f.intercept)), &title, "SEI", "yield");
            let p = dir.join(format!("{}.svg", v.to_string().replace('/', "_")));
            fs::write(&p, s).at(&p)?;
        }
    }
    Ok(())
}

fn gradcheck(seed: u64, entries: usize, out: &mut dyn Write) -> Result<()> {
    let mut all: Vec<CheckEntry> = primitive_suite(seed)?;
    all.push(generator_graph_check(seed, entries)?);
    let passed = all.iter().all(CheckEntry::passed);
    emit(out, &json!({ "passed": passed, "checks": all }))?;
    if !passed {
        let bad: Vec<&str> = all.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
        return Err(Error::Check(format!("gradient check failed: {}", bad.join(", "))));
    }
    Ok(())
}

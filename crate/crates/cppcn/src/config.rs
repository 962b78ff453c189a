//! The run configuration document (TOML) and its environment overrides.

use std::fs;
use std::path::{Path, PathBuf};

use cppcn_core::cppcn::{BlockGrid, DiscriminatorConfig, NetworkConfig, TrainConfig};
use cppcn_core::metrics::Ssim3dConfig;
use cppcn_core::occlusion::DEFAULT_SELF_EPS;
use cppcn_core::popsim::{PlotLayout, RigConfig, Stage, SyntheticPlantParams};
use cppcn_core::traits_yield::TraitConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::manifest::pointer;

/// Prefix of environment overrides. `CPPCN_TRAIN__LR=0.01` sets `train.lr`.
pub const ENV_PREFIX: &str = "CPPCN_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed for scene assembly, sampling and splits.
    pub seed: u64,
    /// Worker threads for dataset generation.
    pub threads: usize,
    pub paths: Paths,
    pub layout: PlotLayout,
    pub rig: RigConfig,
    pub self_eps: f64,
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub discriminator: DiscriminatorConfig,
    pub train: TrainConfig,
    pub blocks: BlockGrid,
    pub traits: TraitConfig,
    pub ssim: Ssim3dConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            paths: Paths::default(),
            layout: PlotLayout::default(),
            rig: RigConfig::default(),
            self_eps: DEFAULT_SELF_EPS,
            dataset: DatasetConfig::default(),
            network: NetworkConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            train: TrainConfig::default(),
            blocks: BlockGrid::default(),
            traits: TraitConfig::default(),
            ssim: Ssim3dConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory of `<stage>/<id>.obj` + `<stage>/<id>.ply` plant assets.
    /// Synthetic plants are generated when unset.
    pub assets: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
    pub stages: Vec<Stage>,
    pub train_fraction: f64,
    pub yaw_jitter_deg: Option<f64>,
    /// Scenes redrawn at most this many times when they yield no sample.
    pub max_attempts: usize,
    /// Binary little-endian sample files; ASCII otherwise.
    pub binary: bool,
    /// Size of the synthetic asset pool per stage.
    pub synthetic_per_stage: usize,
    pub synthetic: SyntheticPlantParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 4000,
            stages: Stage::ALL.to_vec(),
            train_fraction: 0.8,
            yaw_jitter_deg: None,
            max_attempts: 8,
            binary: true,
            synthetic_per_stage: 8,
            synthetic: SyntheticPlantParams::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.network.validate()?;
        self.discriminator.validate(self.network.m_out)?;
        self.train.validate()?;
        self.blocks.validate()?;
        let bad = |m: &str| {
            Err(Error::Core(cppcn_core::Error::Invalid {
                what: "config",
                reason: m.to_string(),
            }))
        };
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        if !(self.self_eps >= 0.0) {
            return bad("self_eps must be non-negative");
        }
        if self.rig.count == 0 {
            return bad("rig.count must be positive");
        }
        if self.dataset.stages.is_empty() || self.dataset.max_attempts == 0 {
            return bad("dataset.stages and dataset.max_attempts must be nonempty/positive");
        }
        if !(0.0..=1.0).contains(&self.dataset.train_fraction) {
            return bad("dataset.train_fraction must lie in [0, 1]");
        }
        if !(self.traits.voxel_edge > 0.0) {
            return bad("traits.voxel_edge must be positive");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Parse a document, apply `overrides` (environment style key/value
    /// pairs, see [`ENV_PREFIX`]) and validate.
    pub fn parse<I>(text: &str, path: &Path, overrides: I) -> Result<RunConfig>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, path, &e))?;
        for (k, v) in overrides {
            if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
                set_path(&mut table, rest, &v).map_err(|m| Error::parse(path, format!("env {k}"), m))?;
            }
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| Error::parse(path, pointer(e.path()), e.inner().message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load `path` (defaults when `None`) with `CPPCN_*` environment overrides.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let (text, shown) = match path {
            Some(p) => (fs::read_to_string(p).at(p)?, p.to_path_buf()),
            None => (String::new(), PathBuf::from("<defaults>")),
        };
        RunConfig::parse(&text, &shown, std::env::vars())
    }
}

fn toml_error(text: &str, path: &Path, e: &toml::de::Error) -> Error {
    let loc = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line} column {col}")
        }
        None => "document".to_string(),
    };
    Error::parse(path, loc, e.message().trim_end().to_string())
}

/// `TRAIN__LR` → `train.lr`; the value is read as a TOML literal and falls
/// back to a plain string.
fn set_path(table: &mut toml::Table, key: &str, raw: &str) -> std::result::Result<(), String> {
    let parts: Vec<String> = key.split("__").map(str::to_ascii_lowercase).collect();
    if parts.iter().any(String::is_empty) {
        return Err("empty key segment".into());
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = parts.split_last().expect("nonempty");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(format!("`{p}` is not a table")),
        };
    }
    cur.insert(last.clone(), value);
    Ok(())
}

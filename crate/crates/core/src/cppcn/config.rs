use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::metrics::GeneratorAdversarial;
use crate::{Error, Result};

/// Generator shape: encoder stack, point counts and decoder widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub k: usize,
    pub layer_dims: Vec<usize>,
    pub n_in: usize,
    pub m_out: usize,
    pub m1: usize,
    pub m2: usize,
    /// Widths of FC_1, FC_2, FC_3 (fine, middle, coarse heads in that order).
    pub fc_dims: [usize; 3],
    /// Trailing encoder layers max-pooled into the latent.
    pub pooled_layers: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            k: 20,
            layer_dims: vec![64, 128, 256, 512, 1024],
            n_in: 8192,
            m_out: 8192,
            m1: 2048,
            m2: 4096,
            fc_dims: [1920, 1024, 512],
            pooled_layers: 4,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("network config", reason));
        if self.layer_dims.len() < 2 {
            return bad("at least two encoder layers required");
        }
        if self.layer_dims.iter().chain(&self.fc_dims).any(|&d| d == 0) {
            return bad("layer widths must be positive");
        }
        if self.pooled_layers == 0 {
            return bad("pooled_layers must be positive");
        }
        if self.n_in == 0 || self.n_in % 4 != 0 {
            return bad("n_in must be a positive multiple of 4");
        }
        if self.m1 == 0 || self.m2 == 0 || self.m2 % self.m1 != 0 || self.m_out % self.m2 != 0 {
            return bad("m_out must be divisible by m2 and m2 by m1");
        }
        if self.k == 0 || self.k >= self.n_in / 4 {
            return bad("k must be in [1, n_in/4)");
        }
        Ok(())
    }

    pub fn resolutions(&self) -> [usize; 3] {
        [self.n_in, self.n_in / 2, self.n_in / 4]
    }

    /// Encoder layers whose outputs are pooled.
    pub fn pooled_range(&self) -> core::ops::Range<usize> {
        let l = self.layer_dims.len();
        l.saturating_sub(self.pooled_layers)..l
    }

    pub fn latent_per_resolution(&self) -> usize {
        self.layer_dims[self.pooled_range()].iter().sum()
    }

    pub fn latent_width(&self) -> usize {
        3 * self.latent_per_resolution()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub k: usize,
    pub layer_dims: Vec<usize>,
    pub pooled_layers: usize,
    /// Hidden classifier widths; a final width-1 layer and sigmoid follow.
    pub fc_dims: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            k: 20,
            layer_dims: vec![64, 64, 128, 256],
            pooled_layers: 3,
            fc_dims: vec![256, 128, 16],
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self, m_out: usize) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("discriminator config", reason));
        if self.layer_dims.is_empty() || self.pooled_layers == 0 {
            return bad("needs at least one layer and one pooled layer");
        }
        if self.layer_dims.iter().chain(&self.fc_dims).any(|&d| d == 0) {
            return bad("layer widths must be positive");
        }
        if self.k == 0 || self.k >= m_out {
            return bad("k must be in [1, m_out)");
        }
        Ok(())
    }

    pub fn pooled_range(&self) -> core::ops::Range<usize> {
        let l = self.layer_dims.len();
        l.saturating_sub(self.pooled_layers)..l
    }

    pub fn latent_width(&self) -> usize {
        self.layer_dims[self.pooled_range()].iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Cosine-anneal both learning rates from `lr` to this value over
    /// `max_epochs`. Constant when unset.
    pub lr_final: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once the epoch's mean generator loss falls below this.
    pub stop_loss: Option<f64>,
    /// `(first epoch, alpha)` pairs, ascending.
    pub alpha_schedule: Vec<(usize, f64)>,
    pub lambda_com: f64,
    pub lambda_adv: f64,
    pub validate_every: usize,
    pub seed: u64,
    pub generator_adversarial: GeneratorAdversarial,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            lr_final: None,
            batch_size: 8,
            max_epochs: 200,
            stop_loss: Some(0.1),
            alpha_schedule: vec![(0, 0.01), (30, 0.05), (80, 0.1)],
            lambda_com: 0.9,
            lambda_adv: 0.1,
            validate_every: 10,
            seed: 0,
            generator_adversarial: GeneratorAdversarial::NonSaturating,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::invalid("train config", reason));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.lr_final.is_some_and(|f| !(f > 0.0)) {
            return bad("lr_final must be positive");
        }
        if self.batch_size == 0 || self.validate_every == 0 {
            return bad("batch_size and validate_every must be positive");
        }
        match self.alpha_schedule.first() {
            Some((0, _)) => {}
            _ => return bad("alpha schedule must start at epoch 0"),
        }
        if self.alpha_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("alpha schedule epochs must increase");
        }
        if self.alpha_schedule.iter().any(|&(_, a)| !(a >= 0.0)) {
            return bad("alpha must be non-negative");
        }
        crate::metrics::LossWeights::new(self.alpha_at(0), self.lambda_com, self.lambda_adv)?;
        if !(0.0..1.0).contains(&self.bn_momentum) || !(self.bn_eps > 0.0) {
            return bad("bn_momentum must lie in [0, 1) and bn_eps be positive");
        }
        Ok(())
    }

    /// Learning rate for zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_final {
            None => self.lr,
            Some(end) => {
                let t = epoch as f64 / self.max_epochs.saturating_sub(1).max(1) as f64;
                end + 0.5 * (self.lr - end) * (1.0 + libm::cos(core::f64::consts::PI * t.min(1.0)))
            }
        }
    }

    /// Alpha in force at zero-based `epoch`.
    pub fn alpha_at(&self, epoch: usize) -> f64 {
        self.alpha_schedule
            .iter()
            .rev()
            .find(|&&(start, _)| start <= epoch)
            .map_or(0.0, |&(_, a)| a)
    }
}

/// Divisions of the scene box along x, y, z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockGrid {
    pub divisions: [usize; 3],
}

impl Default for BlockGrid {
    fn default() -> Self {
        BlockGrid { divisions: [2, 2, 2] }
    }
}

impl BlockGrid {
    pub const WHOLE: BlockGrid = BlockGrid { divisions: [1, 1, 1] };

    pub fn count(&self) -> usize {
        self.divisions.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.divisions.contains(&0) {
            return Err(Error::invalid("block grid", "divisions must be positive"));
        }
        Ok(())
    }
}


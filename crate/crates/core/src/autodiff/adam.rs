use alloc::vec::Vec;

use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers for a fixed, ordered list of parameters. Moments are kept in
/// 64-bit regardless of the parameter scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<T: Scalar>(config: AdamConfig, params: &[Tensor<T>]) -> Self {
        AdamState {
            config,
            t: 0,
            m: params.iter().map(|p| alloc::vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| alloc::vec![0.0; p.len()]).collect(),
        }
    }

    /// State for parameters with the given element counts.
    pub fn for_lengths(config: AdamConfig, lens: &[usize]) -> Self {
        AdamState {
            config,
            t: 0,
            m: lens.iter().map(|&n| alloc::vec![0.0; n]).collect(),
            v: lens.iter().map(|&n| alloc::vec![0.0; n]).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.m.len()
    }
}

/// One bias-corrected Adam update. A missing gradient (`None`) counts as zero.
/// Every gradient is checked before any parameter is touched.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Option<&Tensor<T>>],
    state: &mut AdamState,
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != params.len() {
        return Err(Error::invalid(
            "adam_step",
            alloc::format!(
                "{} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                state.m.len()
            ),
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != state.m[i].len() {
            return Err(Error::Shape {
                op: "adam_step",
                shapes: alloc::vec![p.shape().to_vec(), alloc::vec![state.m[i].len()]],
            });
        }
        if let Some(g) = g {
            if g.shape() != p.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    shapes: alloc::vec![p.shape().to_vec(), g.shape().to_vec()],
                });
            }
            if !g.is_finite() {
                return Err(Error::non_finite(alloc::format!("gradient of parameter {i}")));
            }
        }
    }
    state.t += 1;
    let c = state.config;
    let t = state.t as i32;
    let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(c.beta2, t as f64);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let gd = g.map(|g| g.data());
        for (j, w) in p.data_mut().iter_mut().enumerate() {
            let gj = gd.map_or(0.0, |d| d[j].as_f64());
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
            let mh = m[j] / bc1;
            let vh = v[j] / bc2;
            let upd = c.lr * mh / (libm::sqrt(vh) + c.eps);
            *w = T::of_f64(w.as_f64() - upd);
        }
    }
    Ok(())
}

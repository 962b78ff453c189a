use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::autodiff::{adam_step, AdamConfig, AdamState, Gradients, Scalar, Tape, Tensor, Var};
use crate::rng::Rng;
use crate::{math, Error, Result};

/// Named tensors of one network, in a fixed order. Batch-norm running
/// statistics are stored alongside the learned values but never trained.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    trainable: Vec<bool>,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Weights {
            names: Vec::new(),
            tensors: Vec::new(),
            trainable: Vec::new(),
        }
    }
}

impl<T: Scalar> Weights<T> {
    pub(crate) fn push(&mut self, name: String, t: Tensor<T>, trainable: bool) -> usize {
        self.names.push(name);
        self.tensors.push(t);
        self.trainable.push(trainable);
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn is_trainable(&self, i: usize) -> bool {
        self.trainable[i]
    }

    pub fn tensor(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub(crate) fn tensor_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn trainable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.trainable[i]).collect()
    }

    /// Total learned scalars.
    pub fn parameter_count(&self) -> usize {
        self.trainable_indices().iter().map(|&i| self.tensors[i].len()).sum()
    }

    /// Put every tensor on `tape`. Trainable entries become parameters when
    /// `train` is set, constants otherwise.
    pub fn bind(&self, tape: &mut Tape<T>, train: bool) -> Result<Vec<Var>> {
        self.tensors
            .iter()
            .zip(&self.trainable)
            .map(|(t, &tr)| {
                if train && tr {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            trainable: self.trainable.clone(),
        }
    }

    /// Replace every tensor with the same-named entry of `named`; names and
    /// shapes must match exactly.
    pub fn load(&mut self, named: Vec<(String, Tensor<T>)>) -> Result<()> {
        if named.len() != self.len() {
            return Err(Error::invalid(
                "weights",
                format!("expected {} tensors, found {}", self.len(), named.len()),
            ));
        }
        for (i, (name, t)) in named.into_iter().enumerate() {
            if name != self.names[i] {
                return Err(Error::invalid(
                    "weights",
                    format!("tensor {i} is `{name}`, expected `{}`", self.names[i]),
                ));
            }
            if t.shape() != self.tensors[i].shape() {
                return Err(Error::Shape {
                    op: "load weights",
                    shapes: vec![self.tensors[i].shape().to_vec(), t.shape().to_vec()],
                });
            }
            if !t.is_finite() {
                return Err(Error::non_finite(format!("weight `{name}`")));
            }
            self.tensors[i] = t;
        }
        Ok(())
    }
}

/// Uniform fan-in scaled values in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`.
pub(crate) fn kaiming_uniform<T: Scalar>(rng: &mut Rng, fan_in: usize, shape: &[usize]) -> Tensor<T> {
    let bound = math::sqrt(6.0 / fan_in as f64);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of_f64(rng.random_range(-bound..bound))).collect();
    Tensor::new(shape, data).expect("shape matches length")
}

pub(crate) struct LinearIdx {
    pub w: usize,
    pub b: usize,
}

pub(crate) fn add_linear<T: Scalar>(w: &mut Weights<T>, rng: &mut Rng, name: &str, d_in: usize, d_out: usize) -> LinearIdx {
    LinearIdx {
        w: w.push(format!("{name}.weight"), kaiming_uniform(rng, d_in, &[d_in, d_out]), true),
        b: w.push(format!("{name}.bias"), Tensor::zeros(&[d_out]), true),
    }
}

pub(crate) struct EdgeConvIdx {
    pub w_center: usize,
    pub w_edge: usize,
    pub gamma: usize,
    pub beta: usize,
    pub run_mean: usize,
    pub run_var: usize,
}

/// One EdgeConv layer: `[x_i, x_j − x_i] · W` with `W` stored as its two
/// row blocks, followed by batch norm.
pub(crate) fn add_edge_conv<T: Scalar>(w: &mut Weights<T>, rng: &mut Rng, name: &str, d_in: usize, d_out: usize) -> EdgeConvIdx {
    let fan_in = 2 * d_in;
    EdgeConvIdx {
        w_center: w.push(format!("{name}.w_center"), kaiming_uniform(rng, fan_in, &[d_in, d_out]), true),
        w_edge: w.push(format!("{name}.w_edge"), kaiming_uniform(rng, fan_in, &[d_in, d_out]), true),
        gamma: w.push(format!("{name}.bn.gamma"), Tensor::full(&[d_out], T::one()), true),
        beta: w.push(format!("{name}.bn.beta"), Tensor::zeros(&[d_out]), true),
        run_mean: w.push(format!("{name}.bn.running_mean"), Tensor::zeros(&[d_out]), false),
        run_var: w.push(format!("{name}.bn.running_var"), Tensor::full(&[d_out], T::one()), false),
    }
}

impl<T: Scalar> Weights<T> {
    /// Fresh Adam moments for the trainable tensors.
    pub fn adam_state(&self, config: AdamConfig) -> AdamState {
        let lens: Vec<usize> = self.trainable_indices().iter().map(|&i| self.tensors[i].len()).collect();
        AdamState::for_lengths(config, &lens)
    }

    /// One Adam step on the trainable tensors, reading gradients of the
    /// handles `vars` produced by [`Weights::bind`].
    pub fn adam_update(&mut self, grads: &Gradients<T>, vars: &[Var], state: &mut AdamState) -> Result<()> {
        let idx = self.trainable_indices();
        let mut params: Vec<Tensor<T>> = idx
            .iter()
            .map(|&i| core::mem::replace(&mut self.tensors[i], Tensor::zeros(&[0])))
            .collect();
        let g: Vec<Option<&Tensor<T>>> = idx.iter().map(|&i| grads.get(vars[i])).collect();
        let r = adam_step(&mut params, &g, state);
        for (&i, t) in idx.iter().zip(params) {
            self.tensors[i] = t;
        }
        r
    }
}

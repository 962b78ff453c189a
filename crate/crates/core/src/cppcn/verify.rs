use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{generator_objective, make_batch, Discriminator, DiscriminatorConfig, Generator, NetworkConfig, TrainConfig, TrainingExample};
use crate::autodiff::{grad_check, CheckEntry, GradCheckOptions, Tape, Tensor, Var};
use crate::geom::Point3;
use crate::rng::{derive_seed, rng_from_seed};
use crate::Result;

/// Tolerance for the whole generator objective.
pub const GRAPH_TOLERANCE: f64 = 1e-4;

fn unit_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| Point3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect()
}

/// Finite-difference check of the generator objective (completion plus
/// adversarial term) with respect to every trainable generator tensor, on a
/// tiny network and a two-cloud batch. `entries` caps the sampled entries
/// per tensor.
pub fn generator_graph_check(seed: u64, entries: usize) -> Result<CheckEntry> {
    let net = NetworkConfig {
        k: 4,
        layer_dims: vec![4, 6, 8],
        n_in: 32,
        m_out: 16,
        m1: 4,
        m2: 8,
        fc_dims: [12, 10, 8],
        pooled_layers: 4,
    };
    let dc = DiscriminatorConfig {
        k: 4,
        layer_dims: vec![4, 6, 8],
        pooled_layers: 3,
        fc_dims: vec![8, 4],
    };
    let tc = TrainConfig::default();
    let gen: Generator<f64> = Generator::new(&net, derive_seed(seed, 1))?;
    let disc: Discriminator<f64> = Discriminator::new(&dc, net.m_out, derive_seed(seed, 2))?;
    let ex: Vec<TrainingExample> = (0..2u64)
        .map(|i| {
            let gt = unit_points(16, derive_seed(seed, 10 + i));
            let mid = gt[..8].to_vec();
            TrainingExample {
                input: unit_points(32, derive_seed(seed, 20 + i)),
                gt_coarse: mid[..4].to_vec(),
                gt_mid: mid,
                gt,
            }
        })
        .collect();
    let refs: Vec<&TrainingExample> = ex.iter().collect();
    let batch = make_batch(&refs);
    let trainable = gen.weights().trainable_indices();
    let inputs: Vec<Tensor<f64>> = trainable.iter().map(|&i| gen.weights().tensor(i).clone()).collect();
    let f = |t: &mut Tape<f64>, vs: &[Var]| {
        let mut vars = gen.weights().bind(t, false)?;
        for (slot, &i) in trainable.iter().enumerate() {
            vars[i] = vs[slot];
        }
        Ok(generator_objective(t, &gen, &vars, &disc, &batch, 0.05, &tc)?.loss)
    };
    let opts = GradCheckOptions {
        h: 1e-6,
        max_entries: Some(entries),
        seed,
    };
    let r = grad_check(f, &inputs, &opts)?;
    Ok(CheckEntry {
        name: "generator_objective".into(),
        max_rel_error: r.max_rel_error,
        checked: r.checked,
        tolerance: GRAPH_TOLERANCE,
    })
}

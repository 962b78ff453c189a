//! Finite-difference verification of every tape primitive.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{grad_check, GradCheckOptions, Tape, Tensor, Var};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::Result;

/// Tolerance for single primitives in 64-bit arithmetic.
pub const PRIMITIVE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub tolerance: f64,
}

impl CheckEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape, &v).expect("shape matches")
}

/// Mean of `y ⊙ w` for a fixed random `w`, so each entry gets its own gradient.
fn weighted(t: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let shape = t.shape(y).to_vec();
    let w = t.constant(uniform(&mut rng_from_seed(seed), &shape, -1.0, 1.0))?;
    let p = t.mul(y, w)?;
    t.reduce_mean(p)
}

type Case = (&'static str, Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>>, Vec<Tensor<f64>>);

/// Central-difference checks of each primitive on random inputs drawn from `seed`.
pub fn primitive_suite(seed: u64) -> Result<Vec<CheckEntry>> {
    let mut rng = rng_from_seed(seed);
    let a = uniform(&mut rng, &[5, 4], -1.0, 1.0);
    let b = uniform(&mut rng, &[5, 4], -1.0, 1.0);
    let row = uniform(&mut rng, &[4], -1.0, 1.0);
    let pos = uniform(&mut rng, &[5, 4], 0.5, 2.0);
    let w = uniform(&mut rng, &[4, 3], -1.0, 1.0);
    let x = uniform(&mut rng, &[8, 3], -2.0, 2.0);
    let gamma = uniform(&mut rng, &[3], 0.5, 1.5);
    let beta = uniform(&mut rng, &[3], -0.5, 0.5);
    let s = move |i: u64| derive_seed(seed, i);

    let cases: Vec<Case> = vec![
        ("add", Box::new(move |t, v| { let y = t.add(v[0], v[1])?; weighted(t, y, s(1)) }), vec![a.clone(), b.clone()]),
        ("sub", Box::new(move |t, v| { let y = t.sub(v[0], v[1])?; weighted(t, y, s(2)) }), vec![a.clone(), b.clone()]),
        ("add_row", Box::new(move |t, v| { let y = t.add(v[0], v[1])?; weighted(t, y, s(3)) }), vec![a.clone(), row.clone()]),
        ("sub_row", Box::new(move |t, v| { let y = t.sub(v[0], v[1])?; weighted(t, y, s(4)) }), vec![a.clone(), row.clone()]),
        ("mul", Box::new(move |t, v| { let y = t.mul(v[0], v[1])?; weighted(t, y, s(5)) }), vec![a.clone(), b.clone()]),
        ("scalar_mul", Box::new(move |t, v| { let y = t.scalar_mul(v[0], -2.5)?; weighted(t, y, s(6)) }), vec![a.clone()]),
        ("matmul", Box::new(move |t, v| { let y = t.matmul(v[0], v[1])?; weighted(t, y, s(7)) }), vec![a.clone(), w.clone()]),
        ("concat_rows", Box::new(move |t, v| { let y = t.concat(&[v[0], v[1]], 0)?; weighted(t, y, s(8)) }), vec![a.clone(), b.clone()]),
        ("concat_cols", Box::new(move |t, v| { let y = t.concat(&[v[0], v[1]], 1)?; weighted(t, y, s(9)) }), vec![a.clone(), b.clone()]),
        ("reshape", Box::new(move |t, v| { let y = t.reshape(v[0], &[2, 10])?; let z = t.square(y)?; weighted(t, z, s(10)) }), vec![a.clone()]),
        ("gather_rows", Box::new(move |t, v| { let y = t.gather_rows(v[0], &[4, 0, 0, 2, 4, 4])?; weighted(t, y, s(11)) }), vec![a.clone()]),
        ("relu", Box::new(move |t, v| { let y = t.relu(v[0])?; weighted(t, y, s(12)) }), vec![a.clone()]),
        ("sigmoid", Box::new(move |t, v| { let y = t.sigmoid(v[0])?; weighted(t, y, s(13)) }), vec![a.clone()]),
        ("log", Box::new(move |t, v| { let y = t.log(v[0])?; weighted(t, y, s(14)) }), vec![pos.clone()]),
        ("square", Box::new(move |t, v| { let y = t.square(v[0])?; weighted(t, y, s(15)) }), vec![a.clone()]),
        ("clamp", Box::new(move |t, v| { let y = t.clamp(v[0], -0.5, 0.5)?; weighted(t, y, s(16)) }), vec![a.clone()]),
        ("reduce_mean", Box::new(|t, v| t.reduce_mean(v[0])), vec![a.clone()]),
        ("reduce_max_rows", Box::new(move |t, v| { let y = t.reduce_max(v[0], 0)?; weighted(t, y, s(17)) }), vec![a.clone()]),
        ("reduce_max_cols", Box::new(move |t, v| { let y = t.reduce_max(v[0], 1)?; weighted(t, y, s(18)) }), vec![a.clone()]),
        (
            "batch_norm",
            Box::new(move |t, v| {
                let (y, _) = t.batch_norm(v[0], v[1], v[2], 1e-5)?;
                weighted(t, y, s(19))
            }),
            vec![x.clone(), gamma.clone(), beta.clone()],
        ),
        (
            "batch_norm_inference",
            Box::new(move |t, v| {
                let y = t.batch_norm_inference(v[0], v[1], v[2], &[0.1, -0.2, 0.3], &[1.0, 2.0, 0.5], 1e-5)?;
                weighted(t, y, s(20))
            }),
            vec![x, gamma, beta],
        ),
    ];

    let opts = GradCheckOptions {
        seed,
        ..GradCheckOptions::default()
    };
    cases
        .into_iter()
        .map(|(name, f, inputs)| {
            let r = grad_check(f, &inputs, &opts)?;
            Ok(CheckEntry {
                name: name.into(),
                max_rel_error: r.max_rel_error,
                checked: r.checked,
                tolerance: PRIMITIVE_TOLERANCE,
            })
        })
        .collect()
}

use cppcn_core::autodiff::{grad_check, GradCheckOptions, Tape, Tensor, Var};
use cppcn_core::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape, &v).unwrap()
}

/// Weighted sum so every output entry carries a distinct gradient.
fn weighted_sum(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = tape.shape(y).to_vec();
    let w = tape.constant(rand_tensor(&mut rng, &shape, -1.0, 1.0))?;
    let p = tape.mul(y, w)?;
    tape.reduce_mean(p)
}

fn check<F>(f: F, inputs: &[Tensor<f64>]) -> f64
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    grad_check(f, inputs, &GradCheckOptions::default()).unwrap().max_rel_error
}

#[test]
fn linear_map_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = rand_tensor(&mut rng, &[4, 3], -1.0, 1.0);
    let w = rand_tensor(&mut rng, &[3, 2], -1.0, 1.0);
    let err = check(
        |t, v| {
            let y = t.matmul(v[0], v[1])?;
            weighted_sum(t, y, 9)
        },
        &[x, w],
    );
    assert!(err < 1e-10, "{err}");
}

#[test]
fn each_primitive_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = rand_tensor(&mut rng, &[5, 4], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[5, 4], -1.0, 1.0);
    let row = rand_tensor(&mut rng, &[4], -1.0, 1.0);
    let pos = rand_tensor(&mut rng, &[5, 4], 0.5, 2.0);

    type Case = (&'static str, Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var>>, Vec<Tensor<f64>>);
    let cases: Vec<Case> = vec![
        ("add", Box::new(|t, v| { let y = t.add(v[0], v[1])?; weighted_sum(t, y, 1) }), vec![a.clone(), b.clone()]),
        ("sub", Box::new(|t, v| { let y = t.sub(v[0], v[1])?; weighted_sum(t, y, 2) }), vec![a.clone(), b.clone()]),
        ("add_row", Box::new(|t, v| { let y = t.add(v[0], v[1])?; weighted_sum(t, y, 3) }), vec![a.clone(), row.clone()]),
        ("sub_row", Box::new(|t, v| { let y = t.sub(v[0], v[1])?; weighted_sum(t, y, 4) }), vec![a.clone(), row.clone()]),
        ("scalar_mul", Box::new(|t, v| { let y = t.scalar_mul(v[0], -2.5)?; weighted_sum(t, y, 5) }), vec![a.clone()]),
        ("concat0", Box::new(|t, v| { let y = t.concat(&[v[0], v[1]], 0)?; weighted_sum(t, y, 6) }), vec![a.clone(), b.clone()]),
        ("concat1", Box::new(|t, v| { let y = t.concat(&[v[0], v[1]], 1)?; weighted_sum(t, y, 7) }), vec![a.clone(), b.clone()]),
        ("relu", Box::new(|t, v| { let y = t.relu(v[0])?; weighted_sum(t, y, 8) }), vec![a.clone()]),
        ("reduce_max0", Box::new(|t, v| { let y = t.reduce_max(v[0], 0)?; weighted_sum(t, y, 9) }), vec![a.clone()]),
        ("reduce_max1", Box::new(|t, v| { let y = t.reduce_max(v[0], 1)?; weighted_sum(t, y, 10) }), vec![a.clone()]),
        ("gather_rows", Box::new(|t, v| { let y = t.gather_rows(v[0], &[4, 0, 0, 2, 4, 4])?; weighted_sum(t, y, 11) }), vec![a.clone()]),
        ("square", Box::new(|t, v| { let y = t.square(v[0])?; weighted_sum(t, y, 12) }), vec![a.clone()]),
        ("reduce_mean", Box::new(|t, v| t.reduce_mean(v[0])), vec![a.clone()]),
        ("log", Box::new(|t, v| { let y = t.log(v[0])?; weighted_sum(t, y, 13) }), vec![pos.clone()]),
        ("sigmoid", Box::new(|t, v| { let y = t.sigmoid(v[0])?; weighted_sum(t, y, 14) }), vec![a.clone()]),
        ("mul", Box::new(|t, v| { let y = t.mul(v[0], v[1])?; weighted_sum(t, y, 15) }), vec![a.clone(), b.clone()]),
        ("reshape", Box::new(|t, v| { let y = t.reshape(v[0], &[2, 10])?; let z = t.reduce_max(y, 1)?; weighted_sum(t, z, 16) }), vec![a.clone()]),
        ("clamp", Box::new(|t, v| { let y = t.clamp(v[0], -0.5, 0.5)?; weighted_sum(t, y, 17) }), vec![a.clone()]),
        ("matmul", Box::new(|t, v| { let y = t.matmul(v[0], v[1])?; let z = t.sigmoid(y)?; weighted_sum(t, z, 18) }), vec![a.clone(), rand_tensor(&mut ChaCha8Rng::seed_from_u64(3), &[4, 3], -1.0, 1.0)]),
    ];
    for (name, f, inputs) in cases {
        let err = check(f, &inputs);
        assert!(err < 1e-6, "{name}: {err}");
    }
}

#[test]
fn batch_norm_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rand_tensor(&mut rng, &[8, 3], -2.0, 2.0);
    let g = rand_tensor(&mut rng, &[3], 0.5, 1.5);
    let b = rand_tensor(&mut rng, &[3], -0.5, 0.5);
    let err = check(
        |t, v| {
            let (y, _) = t.batch_norm(v[0], v[1], v[2], 1e-5)?;
            let z = t.sigmoid(y)?;
            weighted_sum(t, z, 5)
        },
        &[x.clone(), g.clone(), b.clone()],
    );
    assert!(err < 1e-5, "{err}");
    let err = check(
        |t, v| {
            let y = t.batch_norm_inference(v[0], v[1], v[2], &[0.1, -0.2, 0.3], &[1.0, 2.0, 0.5], 1e-5)?;
            weighted_sum(t, y, 6)
        },
        &[x, g, b],
    );
    assert!(err < 1e-6, "{err}");
}

fn mlp(t: &mut Tape<f64>, v: &[Var]) -> Result<Var> {
    let mut h = v[0];
    for layer in 0..3 {
        let w = v[1 + 2 * layer];
        let b = v[2 + 2 * layer];
        let z = t.matmul(h, w)?;
        let z = t.add(z, b)?;
        h = if layer < 2 { t.relu(z)? } else { z };
    }
    let s = t.square(h)?;
    t.reduce_mean(s)
}

fn mlp_inputs(seed: u64) -> Vec<Tensor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [5, 8, 6, 3];
    let mut v = vec![rand_tensor(&mut rng, &[7, dims[0]], -1.0, 1.0)];
    for l in 0..3 {
        v.push(rand_tensor(&mut rng, &[dims[l], dims[l + 1]], -1.0, 1.0));
        v.push(rand_tensor(&mut rng, &[dims[l + 1]], -0.2, 0.2));
    }
    v
}

#[test]
fn three_layer_mlp() {
    let err = check(mlp, &mlp_inputs(11));
    assert!(err < 1e-6, "{err}");
}

#[test]
fn sampled_check_reports_count() {
    let opts = GradCheckOptions {
        max_entries: Some(5),
        seed: 3,
        ..GradCheckOptions::default()
    };
    let inputs = mlp_inputs(12);
    let r = grad_check(mlp, &inputs, &opts).unwrap();
    let expected: usize = inputs.iter().map(|x| x.len().min(5)).sum();
    assert_eq!(r.checked, expected);
    assert!(r.max_rel_error < 1e-6);
}

#[test]
fn backward_is_bitwise_deterministic() {
    let inputs = mlp_inputs(13);
    let run = || {
        let mut t = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| t.param(x.clone()).unwrap()).collect();
        let l = mlp(&mut t, &vars).unwrap();
        let g = t.backward(l).unwrap();
        vars.iter().map(|&v| g.get(v).unwrap().clone()).collect::<Vec<_>>()
    };
    let a = run();
    let b = run();
    for (x, y) in a.iter().zip(&b) {
        let xb: Vec<u64> = x.data().iter().map(|v| v.to_bits()).collect();
        let yb: Vec<u64> = y.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(xb, yb);
    }
}

#[test]
fn constants_get_no_gradient() {
    let mut t = Tape::new();
    let c = t.constant(Tensor::<f64>::from_f64(&[2], &[1.0, 2.0]).unwrap()).unwrap();
    let p = t.param(Tensor::from_f64(&[2], &[3.0, 4.0]).unwrap()).unwrap();
    let y = t.mul(c, p).unwrap();
    let l = t.reduce_mean(y).unwrap();
    let g = t.backward(l).unwrap();
    assert!(g.get(c).is_none());
    assert_eq!(g.get(p).unwrap().data(), &[0.5, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smooth_chain_matches_differences(seed in 0u64..10_000, rows in 2usize..6, cols in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[rows, cols], -1.0, 1.0);
        let w = rand_tensor(&mut rng, &[cols, 3], -1.0, 1.0);
        let b = rand_tensor(&mut rng, &[3], -1.0, 1.0);
        let err = check(
            |t, v| {
                let z = t.matmul(v[0], v[1])?;
                let z = t.add(z, v[2])?;
                let s = t.sigmoid(z)?;
                let l = t.log(s)?;
                let q = t.square(l)?;
                t.reduce_mean(q)
            },
            &[x, w, b],
        );
        prop_assert!(err < 1e-6, "{}", err);
    }

    #[test]
    fn inference_norm_is_affine(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, &[4, 3], -3.0, 3.0);
        let g = rand_tensor(&mut rng, &[3], -2.0, 2.0);
        let b = rand_tensor(&mut rng, &[3], -2.0, 2.0);
        let mean: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let var: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..4.0)).collect();
        let mut t = Tape::new();
        let (xv, gv, bv) = (t.constant(x.clone()).unwrap(), t.constant(g.clone()).unwrap(), t.constant(b.clone()).unwrap());
        let y = t.batch_norm_inference(xv, gv, bv, &mean, &var, 1e-5).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                let direct = g.data()[c] * (x.data()[r * 3 + c] - mean[c]) / (var[c] + 1e-5).sqrt() + b.data()[c];
                prop_assert!((t.value(y).data()[r * 3 + c] - direct).abs() < 1e-12);
            }
        }
    }
}

use cppcn_core::autodiff::{grad_check, GradCheckOptions, Tape, Tensor};
use cppcn_core::cppcn::*;
use cppcn_core::geom::{knn, Point3, PointCloud};
use cppcn_core::metrics::chamfer_sq_points;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;

fn random_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect()
}

fn toy_net() -> NetworkConfig {
    NetworkConfig {
        k: 8,
        layer_dims: vec![8, 16, 32, 64, 128],
        n_in: 256,
        m_out: 256,
        m1: 64,
        m2: 128,
        fc_dims: [64, 32, 16],
        pooled_layers: 4,
    }
}

#[test]
fn edge_feature_examples() {
    let f = [1.0, 0.0, 3.0, 0.0];
    let e = edge_features(&f, 2, &[1, 0], 1).unwrap();
    assert_eq!(&e[..4], &[1.0, 0.0, 2.0, 0.0]);
    let same = edge_features(&[1.0, 2.0, 1.0, 2.0], 2, &[1, 0], 1).unwrap();
    assert_eq!(&same[2..4], &[0.0, 0.0]);
}

/// Straight-line EdgeConv: explicit edge vectors, full weight, max, then
/// batch norm with batch statistics and ReLU.
fn reference_layer(x: &[f64], dim: usize, k: usize, wc: &[f64], we: &[f64], out: usize) -> Vec<f64> {
    let n = x.len() / dim;
    let nb = knn(x, dim, k).unwrap();
    let edges = edge_features(x, dim, nb.as_flat(), k).unwrap();
    let mut h = vec![f64::NEG_INFINITY; n * out];
    for i in 0..n {
        for s in 0..k {
            let e = &edges[(i * k + s) * 2 * dim..(i * k + s + 1) * 2 * dim];
            for o in 0..out {
                let mut v = 0.0;
                for d in 0..dim {
                    v += e[d] * wc[d * out + o] + e[dim + d] * we[d * out + o];
                }
                h[i * out + o] = h[i * out + o].max(v);
            }
        }
    }
    for o in 0..out {
        let mean: f64 = (0..n).map(|i| h[i * out + o]).sum::<f64>() / n as f64;
        let var: f64 = (0..n).map(|i| (h[i * out + o] - mean).powi(2)).sum::<f64>() / n as f64;
        for i in 0..n {
            let y = (h[i * out + o] - mean) / (var + EPS).sqrt();
            h[i * out + o] = y.max(0.0);
        }
    }
    h
}

fn run_layer(x: &[f64], dim: usize, k: usize, wc: &[f64], we: &[f64], out: usize) -> Vec<f64> {
    let n = x.len() / dim;
    let mut t = Tape::<f64>::new();
    let xv = t.constant(Tensor::from_f64(&[n, dim], x).unwrap()).unwrap();
    let a = t.constant(Tensor::from_f64(&[dim, out], wc).unwrap()).unwrap();
    let b = t.constant(Tensor::from_f64(&[dim, out], we).unwrap()).unwrap();
    let g = t.constant(Tensor::full(&[out], 1.0)).unwrap();
    let be = t.constant(Tensor::zeros(&[out])).unwrap();
    let (y, _) = dgcfe_layer(&mut t, xv, 1, k, a, b, g, be, BnMode::Batch { eps: EPS }).unwrap();
    t.value(y).data().to_vec()
}

#[test]
fn factored_layer_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (dim, out, k) in [(3, 5, 4), (4, 6, 1), (2, 3, 9)] {
        let x: Vec<f64> = (0..10 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wc: Vec<f64> = (0..dim * out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let we: Vec<f64> = (0..dim * out).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = run_layer(&x, dim, k, &wc, &we, out);
        let want = reference_layer(&x, dim, k, &wc, &we, out);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn single_neighbor_layer_is_its_edge() {
    // With k = 1 and no normalisation effects on a two-column check, each
    // pre-norm output is exactly the one edge feature times W.
    let x = [0.0, 0.0, 1.0, 0.0, 0.0, 2.0];
    let n = 3;
    let mut t = Tape::<f64>::new();
    let xv = t.constant(Tensor::from_f64(&[n, 2], &x).unwrap()).unwrap();
    let wc = t.constant(Tensor::from_f64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
    let we = t.constant(Tensor::from_f64(&[2, 2], &[1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
    let g = t.constant(Tensor::full(&[2], 1.0)).unwrap();
    let b = t.constant(Tensor::zeros(&[2])).unwrap();
    let mean = [0.0, 0.0];
    let var = [1.0, 1.0];
    let (y, _) = dgcfe_layer(&mut t, xv, 1, 1, wc, we, g, b, BnMode::Fixed { mean: &mean, var: &var, eps: 0.0 }).unwrap();
    // x_i·I + (x_j − x_i)·I = x_j, the nearest neighbour.
    assert_eq!(t.value(y).data(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn latent_width_at_paper_dims() {
    let mut cfg = NetworkConfig::default();
    assert_eq!(cfg.latent_width(), 5760);
    assert_eq!(cfg.latent_per_resolution(), 1920);
    // Same dims, small point count, so the forward pass is cheap.
    cfg.n_in = 64;
    cfg.k = 8;
    cfg.m_out = 64;
    cfg.m1 = 16;
    cfg.m2 = 32;
    cfg.fc_dims = [32, 16, 8];
    let g: Generator<f32> = Generator::new(&cfg, 1).unwrap();
    let pts = random_points(64, 2);
    let v = g.latent(&[&pts], Mode::Train, EPS).unwrap();
    assert_eq!(v.shape(), &[1, 5760]);
}

#[test]
fn toy_latent_width() {
    let cfg = toy_net();
    assert_eq!(cfg.latent_width(), 720);
    let g: Generator<f32> = Generator::new(&cfg, 1).unwrap();
    let v = g.latent(&[&random_points(256, 3)], Mode::Train, EPS).unwrap();
    assert_eq!(v.shape(), &[1, 720]);
}

#[test]
fn decoder_sizes_at_paper_counts() {
    let mut cfg = NetworkConfig::default();
    cfg.layer_dims = vec![4, 4];
    cfg.fc_dims = [8, 8, 8];
    cfg.n_in = 128;
    let g: Generator<f32> = Generator::new(&cfg, 2).unwrap();
    let mut t = Tape::new();
    let vars = g.weights().bind(&mut t, false).unwrap();
    let x = t.constant(points_tensor(&[&random_points(128, 5)])).unwrap();
    let mut pass = Pass::new(&vars, 1, Mode::Train, EPS);
    let d = g.forward(&mut t, &mut pass, x).unwrap();
    assert_eq!(t.shape(d.coarse), &[2048, 3]);
    assert_eq!(t.shape(d.middle), &[4096, 3]);
    assert_eq!(t.shape(d.fine), &[8192, 3]);
}

#[test]
fn zero_offset_heads_copy_parents() {
    let cfg = NetworkConfig { m1: 4, m2: 8, m_out: 16, ..toy_net() };
    let mut g: Generator<f64> = Generator::new(&cfg, 3).unwrap();
    let names: Vec<String> = g.weights().names().to_vec();
    let named: Vec<(String, Tensor<f64>)> = names
        .iter()
        .zip(g.weights().tensors())
        .map(|(n, t)| {
            let zero = n.starts_with("ppd.head_middle") || n.starts_with("ppd.head_fine");
            (n.clone(), if zero { Tensor::zeros(t.shape()) } else { t.clone() })
        })
        .collect();
    g.weights_mut().load(named).unwrap();
    let mut t = Tape::new();
    let vars = g.weights().bind(&mut t, false).unwrap();
    let x = t.constant(points_tensor(&[&random_points(256, 6), &random_points(256, 7)])).unwrap();
    let mut pass = Pass::new(&vars, 2, Mode::Train, EPS);
    let d = g.forward(&mut t, &mut pass, x).unwrap();
    let coarse = tensor_points(t.value(d.coarse));
    let middle = tensor_points(t.value(d.middle));
    let fine = tensor_points(t.value(d.fine));
    assert_eq!((coarse.len(), middle.len(), fine.len()), (8, 16, 32));
    for s in 0..2 {
        for c in 0..8 {
            assert_eq!(middle[s * 8 + c], coarse[s * 4 + c / 2]);
        }
        for c in 0..16 {
            assert_eq!(fine[s * 16 + c], middle[s * 8 + c / 2]);
        }
    }
    assert_eq!(parent_rows(2, 4, 8), vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7]);
}

#[test]
fn ablation_sweep_shapes() {
    for layers in 4..=7 {
        let dims_all = [64, 128, 256, 512, 1024, 2048, 4096];
        let dims: Vec<usize> = dims_all[7 - layers..].iter().map(|d| d / 64).collect();
        for &k in &[8, 16, 32] {
            for &(n, m) in &[(2048usize, 2048usize), (16384, 16384)] {
                let cfg = NetworkConfig {
                    k,
                    layer_dims: dims.clone(),
                    n_in: n,
                    m_out: m,
                    m1: m / 4,
                    m2: m / 2,
                    fc_dims: [8, 8, 8],
                    pooled_layers: 4,
                };
                cfg.validate().unwrap();
                let last4: usize = dims[dims.len() - 4..].iter().sum();
                assert_eq!(cfg.latent_width(), 3 * last4);
                // Full-scale dims satisfy the same law.
                let full = NetworkConfig { layer_dims: dims_all[7 - layers..].to_vec(), ..cfg.clone() };
                let want: usize = dims_all[7 - layers..][layers - 4..].iter().sum();
                assert_eq!(full.latent_width(), 3 * want);
            }
        }
    }
    // Forward at toy point counts across the sweep.
    for layers in 4..=7 {
        for &k in &[8, 12] {
            let cfg = NetworkConfig {
                k,
                layer_dims: (0..layers).map(|i| 4 + 2 * i).collect(),
                n_in: 64,
                m_out: 96,
                m1: 24,
                m2: 48,
                fc_dims: [16, 8, 8],
                pooled_layers: 4,
            };
            let g: Generator<f32> = Generator::new(&cfg, 9).unwrap();
            let out = g.predict(&[&random_points(64, 10)], EPS);
            // Eval mode with untouched running statistics is valid too.
            assert_eq!(out.unwrap()[0].len(), 96);
            let v = g.latent(&[&random_points(64, 11)], Mode::Train, EPS).unwrap();
            assert_eq!(v.shape()[1], cfg.latent_width());
        }
    }
}

#[test]
fn invalid_configs_rejected() {
    let mut c = toy_net();
    c.n_in = 258;
    assert!(c.validate().is_err());
    let mut c = toy_net();
    c.m2 = 100;
    assert!(c.validate().is_err());
    let mut c = toy_net();
    c.layer_dims = vec![8];
    assert!(c.validate().is_err());
    let mut c = toy_net();
    c.k = 64;
    assert!(c.validate().is_err());
}

#[test]
fn discriminator_latent_and_range() {
    let cfg = DiscriminatorConfig::default();
    assert_eq!(cfg.latent_width(), 448);
    let d: Discriminator<f32> = Discriminator::new(&cfg, 128, 4).unwrap();
    let a = random_points(128, 12);
    let b = random_points(128, 13);
    let mut t = Tape::new();
    let vars = d.weights().bind(&mut t, false).unwrap();
    let x = t.constant(points_tensor(&[&a, &b])).unwrap();
    let mut pass = Pass::new(&vars, 2, Mode::Train, EPS);
    let f = d.features(&mut t, &mut pass, x).unwrap();
    assert_eq!(t.shape(f), &[2, 448]);
    let p = d.probability(&[&a, &b], Mode::Train, EPS).unwrap();
    assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    let q = d.probability(&[&a, &b], Mode::Train, EPS).unwrap();
    assert_eq!(p, q);
}

#[test]
fn full_generator_graph_gradients() {
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
    let gen: Generator<f64> = Generator::new(&net, 21).unwrap();
    let disc: Discriminator<f64> = Discriminator::new(&dc, 16, 22).unwrap();
    let ex: Vec<TrainingExample> = (0..2)
        .map(|i| {
            let gt = random_points(16, 40 + i);
            let mid = gt[..8].to_vec();
            TrainingExample {
                input: random_points(32, 30 + i),
                gt_coarse: mid[..4].to_vec(),
                gt_mid: mid,
                gt,
            }
        })
        .collect();
    let refs: Vec<&TrainingExample> = ex.iter().collect();
    let batch: Batch<f64> = make_batch(&refs);
    let inputs: Vec<Tensor<f64>> = gen
        .weights()
        .trainable_indices()
        .iter()
        .map(|&i| gen.weights().tensor(i).clone())
        .collect();
    let trainable = gen.weights().trainable_indices();
    let f = |t: &mut Tape<f64>, vs: &[cppcn_core::autodiff::Var]| {
        let all = gen.weights().bind(t, false)?;
        let mut vars = all.clone();
        for (slot, &i) in trainable.iter().enumerate() {
            vars[i] = vs[slot];
        }
        let step = generator_objective(t, &gen, &vars, &disc, &batch, 0.05, &tc)?;
        Ok(step.loss)
    };
    let opts = GradCheckOptions { h: 1e-6, max_entries: Some(6), seed: 5 };
    let r = grad_check(f, &inputs, &opts).unwrap();
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn blocks_examples() {
    let grid = BlockGrid::default();
    let mut pts = Vec::new();
    for z in [0.25, 0.75] {
        for y in [0.25, 0.75] {
            for x in [0.25, 0.75] {
                pts.push(Point3::new(x, y, z));
            }
        }
    }
    pts.push(Point3::new(0.0, 0.0, 0.0));
    pts.push(Point3::new(1.0, 1.0, 1.0));
    let cloud = PointCloud::new(pts.clone()).unwrap();
    let b = split_into_blocks(&cloud, &grid).unwrap();
    let counts: Vec<usize> = b.members.iter().map(Vec::len).collect();
    assert_eq!(counts, vec![2, 1, 1, 1, 1, 1, 1, 2]);
    for (blk, m) in b.members[..8].iter().enumerate() {
        assert!(m.contains(&blk));
    }
    let on_mid = Point3::new(0.5, 0.2, 0.2);
    assert_eq!(block_index(&b.bounds, &grid, on_mid), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn blocks_partition_cloud(seed in any::<u64>(), n in 1usize..300, div in prop::array::uniform3(1usize..4)) {
        let cloud = PointCloud::new(random_points(n, seed)).unwrap();
        let grid = BlockGrid { divisions: div };
        let b = split_into_blocks(&cloud, &grid).unwrap();
        let mut all: Vec<usize> = b.members.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for (blk, m) in b.members.iter().enumerate() {
            for &i in m {
                prop_assert!(b.frames[blk].inflate(1e-12).contains(cloud.points()[i]));
            }
        }
    }

    #[test]
    fn latent_permutation_invariant(seed in any::<u64>()) {
        let cfg = NetworkConfig { n_in: 64, m_out: 64, m1: 16, m2: 32, ..toy_net() };
        let g: Generator<f64> = Generator::new(&cfg, 8).unwrap();
        let pts = random_points(64, seed);
        let mut shuffled = pts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        for mode in [Mode::Train, Mode::Eval] {
            let a = g.latent(&[&pts], mode, EPS).unwrap();
            let b = g.latent(&[&shuffled], mode, EPS).unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() <= 1e-5 * x.abs().max(y.abs()).max(1e-12));
            }
        }
    }
}

#[test]
fn overfit_single_sample() {
    let net = NetworkConfig {
        k: 4,
        layer_dims: vec![8, 16, 32],
        n_in: 64,
        m_out: 64,
        m1: 16,
        m2: 32,
        fc_dims: [64, 32, 32],
        pooled_layers: 4,
    };
    let dc = DiscriminatorConfig { k: 4, layer_dims: vec![4, 8, 8], pooled_layers: 3, fc_dims: vec![8, 4] };
    let tc = TrainConfig { lr: 1e-3, max_epochs: 50, stop_loss: None, batch_size: 1, seed: 1, ..TrainConfig::default() };
    let mut gt = random_points(64, 50);
    for p in &mut gt {
        p.z *= 0.2;
    }
    let mid = {
        let s = cppcn_core::geom::fps_sample(&gt, 32, 0).unwrap();
        s.iter().map(|&i| gt[i]).collect::<Vec<_>>()
    };
    let ex = TrainingExample { input: random_points(64, 51), gt_coarse: mid[..16].to_vec(), gt_mid: mid, gt };
    let out = train::<f32>(std::slice::from_ref(&ex), &[], &net, &dc, &tc, |_| {}).unwrap();
    let first = out.log[0].l_com;
    let last = out.log.last().unwrap().l_com;
    assert_eq!(out.log.len(), 50);
    assert!(last <= 0.5 * first, "{first} -> {last}");
    assert!(out.log.iter().all(|e| e.l_com.is_finite() && e.l_adv.is_finite()));
    let alphas: Vec<f64> = out.log.iter().map(|e| e.alpha).collect();
    assert!(alphas[..30].iter().all(|&a| a == 0.01));
    assert!(alphas[30..].iter().all(|&a| a == 0.05));
    let again = train::<f32>(std::slice::from_ref(&ex), &[], &net, &dc, &tc, |_| {}).unwrap();
    assert_eq!(again.generator.weights(), out.generator.weights());
    assert_eq!(again.log, out.log);
    let pred = out.generator.predict(&[&ex.input], tc.bn_eps).unwrap();
    assert!(chamfer_sq_points(&pred[0], &ex.gt).unwrap().is_finite());
}

#[test]
fn alpha_schedule_boundaries() {
    let tc = TrainConfig::default();
    assert_eq!(tc.alpha_at(0), 0.01);
    assert_eq!(tc.alpha_at(29), 0.01);
    assert_eq!(tc.alpha_at(30), 0.05);
    assert_eq!(tc.alpha_at(79), 0.05);
    assert_eq!(tc.alpha_at(80), 0.1);
    assert_eq!(tc.alpha_at(199), 0.1);
    assert_eq!((tc.lambda_com, tc.lambda_adv), (0.9, 0.1));
}

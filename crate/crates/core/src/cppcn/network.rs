use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::layers::{dgcfe_layer, linear, pool_clouds, BnMode};
use super::weights::{add_edge_conv, add_linear, EdgeConvIdx, LinearIdx, Weights};
use super::{DiscriminatorConfig, NetworkConfig};
use crate::autodiff::{BnStats, Scalar, Tape, Tensor, Var};
use crate::geom::{fps_sample, fps_seed_lowest, Point3};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are reported for update.
    Train,
    /// Stored running statistics.
    Eval,
}

/// Batch statistics of one norm layer, to be folded into its running values.
#[derive(Clone, Debug)]
pub struct BnUpdate {
    pub mean: usize,
    pub var: usize,
    pub stats: BnStats,
}

/// Settings shared by one forward pass.
pub struct Pass<'a> {
    pub vars: &'a [Var],
    pub clouds: usize,
    pub mode: Mode,
    pub eps: f64,
    pub updates: Vec<BnUpdate>,
}

impl<'a> Pass<'a> {
    pub fn new(vars: &'a [Var], clouds: usize, mode: Mode, eps: f64) -> Self {
        Pass {
            vars,
            clouds,
            mode,
            eps,
            updates: Vec::new(),
        }
    }
}

/// `running ← momentum·running + (1 − momentum)·batch`.
pub fn apply_bn_updates<T: Scalar>(weights: &mut Weights<T>, updates: &[BnUpdate], momentum: f64) {
    for u in updates {
        for (idx, batch) in [(u.mean, &u.stats.mean), (u.var, &u.stats.var)] {
            for (r, &b) in weights.tensor_mut(idx).data_mut().iter_mut().zip(batch) {
                *r = T::of_f64(momentum * r.as_f64() + (1.0 - momentum) * b);
            }
        }
    }
}

fn edge_conv<T: Scalar>(
    tape: &mut Tape<T>,
    w: &Weights<T>,
    pass: &mut Pass<'_>,
    idx: &EdgeConvIdx,
    x: Var,
    k: usize,
) -> Result<Var> {
    let v = pass.vars;
    let mean = w.tensor(idx.run_mean).to_f64_vec();
    let var = w.tensor(idx.run_var).to_f64_vec();
    let bn = match pass.mode {
        Mode::Train => BnMode::Batch { eps: pass.eps },
        Mode::Eval => BnMode::Fixed {
            mean: &mean,
            var: &var,
            eps: pass.eps,
        },
    };
    let (y, stats) = dgcfe_layer(
        tape,
        x,
        pass.clouds,
        k,
        v[idx.w_center],
        v[idx.w_edge],
        v[idx.gamma],
        v[idx.beta],
        bn,
    )?;
    if let Some(stats) = stats {
        pass.updates.push(BnUpdate {
            mean: idx.run_mean,
            var: idx.run_var,
            stats,
        });
    }
    Ok(y)
}

/// Stack of EdgeConv layers; returns the per-cloud max-pool of the layers in
/// `pooled`, concatenated.
fn dgcfe_stack<T: Scalar>(
    tape: &mut Tape<T>,
    w: &Weights<T>,
    pass: &mut Pass<'_>,
    layers: &[EdgeConvIdx],
    pooled: core::ops::Range<usize>,
    x: Var,
    k: usize,
) -> Result<Var> {
    let mut h = x;
    let mut pools = Vec::with_capacity(pooled.len());
    for (l, idx) in layers.iter().enumerate() {
        h = edge_conv(tape, w, pass, idx, h, k)?;
        if pooled.contains(&l) {
            pools.push(pool_clouds(tape, h, pass.clouds)?);
        }
    }
    tape.concat(&pools, 1)
}

fn check_points(tape: &Tape<impl Scalar>, x: Var, rows: usize, op: &'static str) -> Result<()> {
    if tape.shape(x) != [rows, 3] {
        return Err(Error::Shape {
            op,
            shapes: alloc::vec![tape.shape(x).to_vec(), alloc::vec![rows, 3]],
        });
    }
    Ok(())
}

/// Stack clouds into a `(Σn) × 3` tensor.
pub fn points_tensor<T: Scalar>(clouds: &[&[Point3]]) -> Tensor<T> {
    let data: Vec<T> = clouds
        .iter()
        .flat_map(|c| c.iter())
        .flat_map(|p| [T::of_f64(p.x), T::of_f64(p.y), T::of_f64(p.z)])
        .collect();
    let rows = data.len() / 3;
    Tensor::new(&[rows, 3], data).expect("three values per point")
}

/// Rows of an `n × 3` tensor as points.
pub fn tensor_points<T: Scalar>(t: &Tensor<T>) -> Vec<Point3> {
    t.data()
        .chunks_exact(3)
        .map(|c| Point3::new(c[0].as_f64(), c[1].as_f64(), c[2].as_f64()))
        .collect()
}

/// Rows of the parent level for each child row of a stacked batch; child
/// `c` of a cloud hangs off parent `c / (children / parents)`.
pub fn parent_rows(clouds: usize, parents: usize, children: usize) -> Vec<usize> {
    let r = children / parents;
    (0..clouds)
        .flat_map(|s| (0..children).map(move |c| s * parents + c / r))
        .collect()
}

/// Decoder outputs, each a stacked `(clouds·size) × 3` tensor.
#[derive(Clone, Copy, Debug)]
pub struct Decoded {
    pub coarse: Var,
    pub middle: Var,
    pub fine: Var,
}

/// Multi-resolution encoder plus pyramid decoder.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    cfg: NetworkConfig,
    weights: Weights<T>,
    enc: Vec<Vec<usize>>,
    fc: Vec<[usize; 2]>,
    heads: Vec<[usize; 2]>,
}

// Index bundles are stored flat so the struct can derive Clone.
fn ec_from(v: &[usize]) -> EdgeConvIdx {
    EdgeConvIdx {
        w_center: v[0],
        w_edge: v[1],
        gamma: v[2],
        beta: v[3],
        run_mean: v[4],
        run_var: v[5],
    }
}

fn ec_flat(e: EdgeConvIdx) -> [usize; 6] {
    [e.w_center, e.w_edge, e.gamma, e.beta, e.run_mean, e.run_var]
}

fn lin(l: LinearIdx) -> [usize; 2] {
    [l.w, l.b]
}

impl<T: Scalar> Generator<T> {
    /// Fresh weights drawn from `seed`.
    pub fn new(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut w = Weights::default();
        let mut enc = Vec::new();
        for r in 0..3 {
            let mut d_in = 3;
            for (l, &d) in cfg.layer_dims.iter().enumerate() {
                let e = add_edge_conv(&mut w, &mut rng, &format!("enc.r{r}.l{l}"), d_in, d);
                enc.extend(ec_flat(e));
                d_in = d;
            }
        }
        let [f1, f2, f3] = cfg.fc_dims;
        let fc = alloc::vec![
            lin(add_linear(&mut w, &mut rng, "ppd.fc1", cfg.latent_width(), f1)),
            lin(add_linear(&mut w, &mut rng, "ppd.fc2", f1, f2)),
            lin(add_linear(&mut w, &mut rng, "ppd.fc3", f2, f3)),
        ];
        let heads = alloc::vec![
            lin(add_linear(&mut w, &mut rng, "ppd.head_coarse", f3, cfg.m1 * 3)),
            lin(add_linear(&mut w, &mut rng, "ppd.head_middle", f2, cfg.m2 * 3)),
            lin(add_linear(&mut w, &mut rng, "ppd.head_fine", f1, cfg.m_out * 3)),
        ];
        let per_res = cfg.layer_dims.len() * 6;
        Ok(Generator {
            cfg: cfg.clone(),
            weights: w,
            enc: enc.chunks(per_res).map(<[usize]>::to_vec).collect(),
            fc,
            heads,
        })
    }

    /// Generator with the given named tensors.
    pub fn from_named(cfg: &NetworkConfig, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut g = Generator::new(cfg, 0)?;
        g.weights.load(named)?;
        Ok(g)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &Weights<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Weights<T> {
        &mut self.weights
    }

    pub fn cast<U: Scalar>(&self) -> Generator<U> {
        Generator {
            cfg: self.cfg.clone(),
            weights: self.weights.cast(),
            enc: self.enc.clone(),
            fc: self.fc.clone(),
            heads: self.heads.clone(),
        }
    }

    /// Latent `clouds × latent_width` of a stacked `(clouds·n_in) × 3` input.
    pub fn encode(&self, tape: &mut Tape<T>, pass: &mut Pass<'_>, input: Var) -> Result<Var> {
        let n = self.cfg.n_in;
        let clouds = pass.clouds;
        check_points(tape, input, clouds * n, "encode")?;
        let pts = tensor_points(tape.value(input));
        let mut half = Vec::with_capacity(clouds * n / 2);
        let mut quarter = Vec::with_capacity(clouds * n / 4);
        for s in 0..clouds {
            let c = &pts[s * n..(s + 1) * n];
            let start = fps_seed_lowest(c).expect("cloud nonempty");
            let sel = fps_sample(c, n / 2, start)?;
            half.extend(sel.iter().map(|&i| i + s * n));
            quarter.extend(sel[..n / 4].iter().map(|&i| i + s * n));
        }
        let inputs = [input, tape.gather_rows(input, &half)?, tape.gather_rows(input, &quarter)?];
        let mut lat = Vec::with_capacity(3);
        for (r, &x) in inputs.iter().enumerate() {
            let layers: Vec<EdgeConvIdx> = self.enc[r].chunks(6).map(ec_from).collect();
            lat.push(dgcfe_stack(tape, &self.weights, pass, &layers, self.cfg.pooled_range(), x, self.cfg.k)?);
        }
        tape.concat(&lat, 1)
    }

    /// Coarse, middle and fine point sets from a `clouds × latent_width` latent.
    pub fn decode(&self, tape: &mut Tape<T>, pass: &Pass<'_>, v: Var) -> Result<Decoded> {
        let c = &self.cfg;
        let s = pass.clouds;
        if tape.shape(v) != [s, c.latent_width()] {
            return Err(Error::Shape {
                op: "decode",
                shapes: alloc::vec![tape.shape(v).to_vec(), alloc::vec![s, c.latent_width()]],
            });
        }
        let vars = pass.vars;
        let dense = |tape: &mut Tape<T>, x: Var, l: [usize; 2]| linear(tape, x, vars[l[0]], vars[l[1]]);
        let h1 = dense(tape, v, self.fc[0])?;
        let h1 = tape.relu(h1)?;
        let h2 = dense(tape, h1, self.fc[1])?;
        let h2 = tape.relu(h2)?;
        let h3 = dense(tape, h2, self.fc[2])?;
        let h3 = tape.relu(h3)?;

        let coarse = dense(tape, h3, self.heads[0])?;
        let coarse = tape.reshape(coarse, &[s * c.m1, 3])?;

        let off = dense(tape, h2, self.heads[1])?;
        let off = tape.reshape(off, &[s * c.m2, 3])?;
        let base = tape.gather_rows(coarse, &parent_rows(s, c.m1, c.m2))?;
        let middle = tape.add(base, off)?;

        let off = dense(tape, h1, self.heads[2])?;
        let off = tape.reshape(off, &[s * c.m_out, 3])?;
        let base = tape.gather_rows(middle, &parent_rows(s, c.m2, c.m_out))?;
        let fine = tape.add(base, off)?;
        Ok(Decoded { coarse, middle, fine })
    }

    pub fn forward(&self, tape: &mut Tape<T>, pass: &mut Pass<'_>, input: Var) -> Result<Decoded> {
        let v = self.encode(tape, pass, input)?;
        self.decode(tape, pass, v)
    }

    /// Evaluation-mode latent for unbatched clouds of exactly `n_in` points.
    pub fn latent(&self, clouds: &[&[Point3]], mode: Mode, eps: f64) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let vars = self.weights.bind(&mut tape, false)?;
        let x = tape.constant(points_tensor(clouds))?;
        let mut pass = Pass::new(&vars, clouds.len(), mode, eps);
        let v = self.encode(&mut tape, &mut pass, x)?;
        Ok(tape.value(v).clone())
    }

    /// Evaluation-mode fine predictions for clouds of exactly `n_in` points.
    pub fn predict(&self, clouds: &[&[Point3]], eps: f64) -> Result<Vec<Vec<Point3>>> {
        let mut tape = Tape::new();
        let vars = self.weights.bind(&mut tape, false)?;
        let x = tape.constant(points_tensor(clouds))?;
        let mut pass = Pass::new(&vars, clouds.len(), Mode::Eval, eps);
        let d = self.forward(&mut tape, &mut pass, x)?;
        let fine = tensor_points(tape.value(d.fine));
        Ok(fine.chunks(self.cfg.m_out).map(<[Point3]>::to_vec).collect())
    }
}

/// EdgeConv feature extractor followed by a sigmoid classifier.
#[derive(Clone, Debug)]
pub struct Discriminator<T> {
    cfg: DiscriminatorConfig,
    weights: Weights<T>,
    convs: Vec<usize>,
    fc: Vec<[usize; 2]>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(cfg: &DiscriminatorConfig, m_out: usize, seed: u64) -> Result<Self> {
        cfg.validate(m_out)?;
        let mut rng = rng_from_seed(seed);
        let mut w = Weights::default();
        let mut convs = Vec::new();
        let mut d_in = 3;
        for (l, &d) in cfg.layer_dims.iter().enumerate() {
            convs.extend(ec_flat(add_edge_conv(&mut w, &mut rng, &format!("disc.l{l}"), d_in, d)));
            d_in = d;
        }
        let mut fc = Vec::new();
        let mut d_in = cfg.latent_width();
        for (i, &d) in cfg.fc_dims.iter().chain(core::iter::once(&1)).enumerate() {
            fc.push(lin(add_linear(&mut w, &mut rng, &format!("disc.fc{i}"), d_in, d)));
            d_in = d;
        }
        Ok(Discriminator {
            cfg: cfg.clone(),
            weights: w,
            convs,
            fc,
        })
    }

    pub fn from_named(cfg: &DiscriminatorConfig, m_out: usize, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut d = Discriminator::new(cfg, m_out, 0)?;
        d.weights.load(named)?;
        Ok(d)
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &Weights<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Weights<T> {
        &mut self.weights
    }

    /// Pooled feature `clouds × latent_width`.
    pub fn features(&self, tape: &mut Tape<T>, pass: &mut Pass<'_>, x: Var) -> Result<Var> {
        let rows = tape.shape(x).first().copied().unwrap_or(0);
        if pass.clouds == 0 || rows % pass.clouds != 0 {
            return Err(Error::Shape {
                op: "discriminator",
                shapes: alloc::vec![tape.shape(x).to_vec()],
            });
        }
        check_points(tape, x, rows, "discriminator")?;
        let layers: Vec<EdgeConvIdx> = self.convs.chunks(6).map(ec_from).collect();
        dgcfe_stack(tape, &self.weights, pass, &layers, self.cfg.pooled_range(), x, self.cfg.k)
    }

    /// Probability `clouds × 1` that each stacked cloud is real.
    pub fn forward(&self, tape: &mut Tape<T>, pass: &mut Pass<'_>, x: Var) -> Result<Var> {
        let mut h = self.features(tape, pass, x)?;
        let last = self.fc.len() - 1;
        for (i, l) in self.fc.iter().enumerate() {
            h = linear(tape, h, pass.vars[l[0]], pass.vars[l[1]])?;
            if i < last {
                h = tape.relu(h)?;
            }
        }
        tape.sigmoid(h)
    }

    pub fn probability(&self, clouds: &[&[Point3]], mode: Mode, eps: f64) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let vars = self.weights.bind(&mut tape, false)?;
        let x = tape.constant(points_tensor(clouds))?;
        let mut pass = Pass::new(&vars, clouds.len(), mode, eps);
        let p = self.forward(&mut tape, &mut pass, x)?;
        Ok(tape.value(p).to_f64_vec())
    }
}

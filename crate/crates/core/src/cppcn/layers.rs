use alloc::vec::Vec;

use crate::autodiff::{BnStats, Scalar, Tape, Var};
use crate::geom::knn;
use crate::{Error, Result};

/// How batch norm gets its statistics.
#[derive(Clone, Copy, Debug)]
pub enum BnMode<'a> {
    /// Statistics of the current batch.
    Batch { eps: f64 },
    /// Fixed (running) statistics.
    Fixed { mean: &'a [f64], var: &'a [f64], eps: f64 },
}

/// Concatenated edge vectors `[x_i, x_j − x_i]` for every point `i` and each
/// of its neighbours `j`, row `i * k + slot`. `features` is `n × dim`.
pub fn edge_features(features: &[f64], dim: usize, neighbors: &[usize], k: usize) -> Result<Vec<f64>> {
    if dim == 0 || features.len() % dim != 0 {
        return Err(Error::Shape {
            op: "edge_features",
            shapes: alloc::vec![alloc::vec![features.len()], alloc::vec![dim]],
        });
    }
    let n = features.len() / dim;
    if neighbors.len() != n * k {
        return Err(Error::Shape {
            op: "edge_features",
            shapes: alloc::vec![alloc::vec![n, k], alloc::vec![neighbors.len()]],
        });
    }
    let mut out = Vec::with_capacity(n * k * 2 * dim);
    for i in 0..n {
        let xi = &features[i * dim..(i + 1) * dim];
        for &j in &neighbors[i * k..(i + 1) * k] {
            if j >= n {
                return Err(Error::IndexOutOfRange {
                    what: "neighbor",
                    index: j,
                    len: n,
                });
            }
            let xj = &features[j * dim..(j + 1) * dim];
            out.extend_from_slice(xi);
            out.extend(xj.iter().zip(xi).map(|(a, b)| a - b));
        }
    }
    Ok(out)
}

/// Neighbour indices of every row of a stacked batch, found per cloud in the
/// current feature space and offset to global rows.
pub fn batch_knn<T: Scalar>(values: &[T], dim: usize, clouds: usize, k: usize) -> Result<Vec<usize>> {
    let rows = values.len() / dim;
    if clouds == 0 || rows % clouds != 0 {
        return Err(Error::invalid("batch", "rows not divisible by cloud count"));
    }
    let n = rows / clouds;
    let mut out = Vec::with_capacity(rows * k);
    for s in 0..clouds {
        let nb = knn(&values[s * n * dim..(s + 1) * n * dim], dim, k)?;
        out.extend(nb.into_flat().into_iter().map(|j| j + s * n));
    }
    Ok(out)
}

/// Dense layer `x · w + b`.
pub fn linear<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add(y, b)
}

fn norm_relu<T: Scalar>(
    tape: &mut Tape<T>,
    h: Var,
    gamma: Var,
    beta: Var,
    bn: BnMode<'_>,
) -> Result<(Var, Option<BnStats>)> {
    let (y, stats) = match bn {
        BnMode::Batch { eps } => {
            let (y, s) = tape.batch_norm(h, gamma, beta, eps)?;
            (y, Some(s))
        }
        BnMode::Fixed { mean, var, eps } => (tape.batch_norm_inference(h, gamma, beta, mean, var, eps)?, None),
    };
    Ok((tape.relu(y)?, stats))
}

/// Dynamic-graph EdgeConv layer on a stacked batch of `clouds` equal-size
/// clouds: k-NN in the input feature space, edge MLP, max over neighbours,
/// then batch norm and ReLU.
///
/// The edge MLP `[x_i, x_j − x_i] · [w_center; w_edge]` is evaluated as
/// `x_i·(w_center − w_edge) + x_j·w_edge`, so the max only touches the
/// second term.
#[allow(clippy::too_many_arguments)]
pub fn dgcfe_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    clouds: usize,
    k: usize,
    w_center: Var,
    w_edge: Var,
    gamma: Var,
    beta: Var,
    bn: BnMode<'_>,
) -> Result<(Var, Option<BnStats>)> {
    let shape = tape.shape(x).to_vec();
    let [rows, dim] = shape[..] else {
        return Err(Error::Shape {
            op: "dgcfe_layer",
            shapes: alloc::vec![shape],
        });
    };
    let nbr = batch_knn(tape.value(x).data(), dim, clouds, k)?;
    let a = tape.matmul(x, w_center)?;
    let b = tape.matmul(x, w_edge)?;
    let out_dim = tape.shape(b)[1];
    let g = tape.gather_rows(b, &nbr)?;
    let g = tape.reshape(g, &[rows, k, out_dim])?;
    let m = tape.reduce_max(g, 1)?;
    let h = tape.sub(a, b)?;
    let h = tape.add(h, m)?;
    norm_relu(tape, h, gamma, beta, bn)
}

/// Max over the points of each cloud: `(clouds·n) × d → clouds × d`.
pub fn pool_clouds<T: Scalar>(tape: &mut Tape<T>, x: Var, clouds: usize) -> Result<Var> {
    let s = tape.shape(x).to_vec();
    let [rows, d] = s[..] else {
        return Err(Error::Shape {
            op: "pool",
            shapes: alloc::vec![s],
        });
    };
    if clouds == 0 || rows % clouds != 0 {
        return Err(Error::Shape {
            op: "pool",
            shapes: alloc::vec![s, alloc::vec![clouds]],
        });
    }
    let r = tape.reshape(x, &[clouds, rows / clouds, d])?;
    tape.reduce_max(r, 1)
}

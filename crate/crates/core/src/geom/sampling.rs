//! Farthest point sampling and exact k-nearest neighbours.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{KdTree, Point3};
use crate::{Error, Result};

/// Iterative farthest point sampling.
///
/// The first pick is `seed_index`; every later pick maximises the minimum
/// distance to the already chosen points, lowest index on ties. Because the
/// procedure is greedy, the first `m'` picks are the same for every `m >= m'`.
pub fn fps_sample(points: &[Point3], m: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Empty { what: "point set" });
    }
    if seed_index >= n {
        return Err(Error::IndexOutOfRange {
            what: "fps seed",
            index: seed_index,
            len: n,
        });
    }
    if m > n {
        return Err(Error::TooFew {
            what: "farthest point sampling",
            requested: m,
            available: n,
        });
    }
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return Ok(out);
    }
    let mut min_d = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut cur = seed_index;
    for _ in 0..m {
        out.push(cur);
        taken[cur] = true;
        let c = points[cur];
        let mut best = usize::MAX;
        let mut best_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = p.dist_sq(c);
            if d < min_d[i] {
                min_d[i] = d;
            }
            if min_d[i] > best_d {
                best_d = min_d[i];
                best = i;
            }
        }
        cur = best;
    }
    Ok(out)
}

/// Index of the lexicographically smallest point; a start for FPS that does
/// not depend on input order.
pub fn fps_seed_lowest(points: &[Point3]) -> Option<usize> {
    (0..points.len()).min_by(|&a, &b| points[a].lex_cmp(&points[b]).then(a.cmp(&b)))
}

/// Flat k-NN table: row `i` holds the neighbours of item `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbors {
    k: usize,
    indices: Vec<usize>,
}

impl Neighbors {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn as_flat(&self) -> &[usize] {
        &self.indices
    }

    pub fn into_flat(self) -> Vec<usize> {
        self.indices
    }

    /// Shift every index by `offset` (used when stacking clouds in a batch).
    pub fn offset(mut self, offset: usize) -> Self {
        for i in &mut self.indices {
            *i += offset;
        }
        self
    }
}

/// Exact k-NN over row-major feature vectors of width `dim`.
///
/// Self is excluded; neighbours are sorted by ascending distance, lowest
/// index first on ties.
pub fn knn<T: Float>(rows: &[T], dim: usize, k: usize) -> Result<Neighbors> {
    if dim == 0 || rows.len() % dim != 0 {
        return Err(Error::invalid("knn", "feature buffer not a multiple of dim"));
    }
    let n = rows.len() / dim;
    if k >= n {
        return Err(Error::TooFew {
            what: "knn neighbours",
            requested: k,
            available: n.saturating_sub(1),
        });
    }
    // Column-major copy so one row of distances is a run of contiguous
    // updates; per-pair summation order stays dimension-sequential.
    let mut cols = vec![T::zero(); n * dim];
    for (i, row) in rows.chunks_exact(dim).enumerate() {
        for (d, &v) in row.iter().enumerate() {
            cols[d * n + i] = v;
        }
    }
    let mut dist = vec![T::zero(); n];
    let mut indices = Vec::with_capacity(n * k);
    let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
    for i in 0..n {
        dist.fill(T::zero());
        for (d, col) in cols.chunks_exact(n).enumerate() {
            let a = rows[i * dim + d];
            for (acc, &b) in dist.iter_mut().zip(col) {
                let t = a - b;
                *acc = *acc + t * t;
            }
        }
        best.clear();
        // j is increasing, so an equal distance never displaces an entry.
        let mut worst = T::infinity();
        for (j, &d) in dist.iter().enumerate() {
            if !(d < worst) || j == i {
                continue;
            }
            if best.len() == k {
                best.pop();
            }
            let pos = best.partition_point(|e| !(d < e.0));
            best.insert(pos, (d, j));
            if best.len() == k {
                worst = best[k - 1].0;
            }
        }
        indices.extend(best.iter().map(|e| e.1));
    }
    Ok(Neighbors { k, indices })
}

/// Exact k-NN over 3-D points, same ordering contract as [`knn`].
pub fn knn_points(points: &[Point3], k: usize) -> Result<Neighbors> {
    let n = points.len();
    if k >= n {
        return Err(Error::TooFew {
            what: "knn neighbours",
            requested: k,
            available: n.saturating_sub(1),
        });
    }
    let tree = KdTree::new(points);
    let mut indices = Vec::with_capacity(n * k);
    for (i, p) in points.iter().enumerate() {
        indices.extend(tree.knn(*p, k, Some(i)).into_iter().map(|e| e.0));
    }
    Ok(Neighbors { k, indices })
}

use alloc::vec::Vec;

use super::blocks::{split_into_blocks, Normalization};
use super::network::Generator;
use super::BlockGrid;
use crate::autodiff::Scalar;
use crate::geom::{fps_seed_lowest, Point3, PointCloud};
use crate::popsim::fps_resample;
use crate::Result;

/// Prepared network input for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockInput {
    pub block: usize,
    pub norm: Normalization,
    pub points: Vec<Point3>,
}

/// Normalised, resampled inputs for every nonempty block of `surface`.
pub fn block_inputs(surface: &PointCloud, grid: &BlockGrid, n_in: usize) -> Result<Vec<BlockInput>> {
    let blocks = split_into_blocks(surface, grid)?;
    let mut out = Vec::new();
    for (b, members) in blocks.members.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let norm = Normalization::from_frame(&blocks.frames[b]);
        let pts: Vec<Point3> = members.iter().map(|&i| norm.apply(surface.points()[i])).collect();
        let start = fps_seed_lowest(&pts).expect("block nonempty");
        let idx = fps_resample(&pts, n_in, start)?;
        out.push(BlockInput {
            block: b,
            norm,
            points: idx.iter().map(|&i| pts[i]).collect(),
        });
    }
    Ok(out)
}

/// Predicted fine points, in world coordinates, for every nonempty block.
pub fn predict_blocks<T: Scalar>(gen: &Generator<T>, inputs: &[BlockInput], bn_eps: f64) -> Result<Vec<Vec<Point3>>> {
    let mut out = Vec::with_capacity(inputs.len());
    for b in inputs {
        let fine = gen.predict(&[&b.points], bn_eps)?;
        out.push(b.norm.invert_all(&fine[0]));
    }
    Ok(out)
}

/// The input cloud followed by the predicted points of every nonempty block.
/// Input points are kept verbatim with `synthetic = false`; predictions carry
/// `synthetic = true`. Other label channels are dropped.
pub fn complete_cloud<T: Scalar>(surface: &PointCloud, gen: &Generator<T>, grid: &BlockGrid, bn_eps: f64) -> Result<PointCloud> {
    let inputs = block_inputs(surface, grid, gen.config().n_in)?;
    let preds = predict_blocks(gen, &inputs, bn_eps)?;
    merge_prediction(surface, &preds)
}

pub fn merge_prediction(surface: &PointCloud, preds: &[Vec<Point3>]) -> Result<PointCloud> {
    let mut pts = surface.points().to_vec();
    let mut flags = alloc::vec![false; pts.len()];
    for p in preds {
        pts.extend_from_slice(p);
        flags.extend(core::iter::repeat_n(true, p.len()));
    }
    PointCloud::new(pts)?.with_synthetic(flags)
}

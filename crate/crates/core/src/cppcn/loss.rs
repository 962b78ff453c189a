use alloc::vec::Vec;

use super::network::{tensor_points, Decoded};
use crate::autodiff::{Scalar, Tape, Var};
use crate::geom::{KdTree, Point3};
use crate::metrics::{GeneratorAdversarial, PROB_CLAMP};
use crate::{Error, Result};

/// For each point of `a`, the index of its nearest point in `b`.
pub fn nearest_indices(a: &[Point3], b: &[Point3]) -> Vec<usize> {
    if b.len() <= 64 {
        return a
            .iter()
            .map(|p| {
                let mut best = (f64::INFINITY, 0);
                for (j, q) in b.iter().enumerate() {
                    let d = p.dist_sq(*q);
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                best.1
            })
            .collect();
    }
    let tree = KdTree::new(b);
    a.iter().map(|p| tree.nearest(*p).expect("b nonempty").0).collect()
}

/// Squared Chamfer distance between stacked batches, averaged over clouds.
/// Correspondences are fixed from the current values; gradients flow through
/// the coordinates.
pub fn chamfer_on_tape<T: Scalar>(tape: &mut Tape<T>, a: Var, b: Var, clouds: usize) -> Result<Var> {
    let pa = tensor_points(tape.value(a));
    let pb = tensor_points(tape.value(b));
    if clouds == 0 || pa.is_empty() || pb.is_empty() || pa.len() % clouds != 0 || pb.len() % clouds != 0 {
        return Err(Error::Shape {
            op: "chamfer",
            shapes: alloc::vec![tape.shape(a).to_vec(), tape.shape(b).to_vec()],
        });
    }
    let (na, nb) = (pa.len() / clouds, pb.len() / clouds);
    let mut ab = Vec::with_capacity(pa.len());
    let mut ba = Vec::with_capacity(pb.len());
    for s in 0..clouds {
        let ca = &pa[s * na..(s + 1) * na];
        let cb = &pb[s * nb..(s + 1) * nb];
        ab.extend(nearest_indices(ca, cb).into_iter().map(|j| j + s * nb));
        ba.extend(nearest_indices(cb, ca).into_iter().map(|j| j + s * na));
    }
    let half = |tape: &mut Tape<T>, x: Var, y: Var, idx: &[usize]| -> Result<Var> {
        let g = tape.gather_rows(y, idx)?;
        let d = tape.sub(x, g)?;
        let sq = tape.square(d)?;
        let m = tape.reduce_mean(sq)?;
        // Mean over coordinates times 3 is the mean squared distance.
        tape.scalar_mul(m, T::of_f64(3.0))
    };
    let l1 = half(tape, a, b, &ab)?;
    let l2 = half(tape, b, a, &ba)?;
    tape.add(l1, l2)
}

/// `CD(fine, gt) + α·CD(middle, gt_mid) + 2α·CD(coarse, gt_coarse)`.
pub fn completion_loss_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    pred: &Decoded,
    gt: [Var; 3],
    clouds: usize,
    alpha: f64,
) -> Result<Var> {
    let [gt_fine, gt_mid, gt_coarse] = gt;
    let f = chamfer_on_tape(tape, pred.fine, gt_fine, clouds)?;
    let m = chamfer_on_tape(tape, pred.middle, gt_mid, clouds)?;
    let c = chamfer_on_tape(tape, pred.coarse, gt_coarse, clouds)?;
    let m = tape.scalar_mul(m, T::of_f64(alpha))?;
    let c = tape.scalar_mul(c, T::of_f64(2.0 * alpha))?;
    let s = tape.add(f, m)?;
    tape.add(s, c)
}

/// Mean of `ln p` (or `ln(1 − p)` when `complement`) with `p` clamped away
/// from 0 and 1.
pub fn mean_log_prob<T: Scalar>(tape: &mut Tape<T>, p: Var, complement: bool) -> Result<Var> {
    let lo = T::of_f64(PROB_CLAMP);
    let hi = T::one() - lo;
    let mut q = tape.clamp(p, lo, hi)?;
    if complement {
        q = tape.scalar_mul(q, -T::one())?;
        q = tape.add_scalar(q, T::one())?;
    }
    let l = tape.log(q)?;
    tape.reduce_mean(l)
}

/// Negated batch-mean adversarial objective, minimised by the discriminator.
pub fn discriminator_loss_on_tape<T: Scalar>(tape: &mut Tape<T>, d_real: Var, d_fake: Var) -> Result<Var> {
    let r = mean_log_prob(tape, d_real, false)?;
    let f = mean_log_prob(tape, d_fake, true)?;
    let s = tape.add(r, f)?;
    tape.scalar_mul(s, -T::one())
}

/// Batch-mean generator adversarial term.
pub fn generator_adversarial_on_tape<T: Scalar>(tape: &mut Tape<T>, d_fake: Var, mode: GeneratorAdversarial) -> Result<Var> {
    match mode {
        GeneratorAdversarial::NonSaturating => {
            let l = mean_log_prob(tape, d_fake, false)?;
            tape.scalar_mul(l, -T::one())
        }
        GeneratorAdversarial::Minimax => mean_log_prob(tape, d_fake, true),
    }
}

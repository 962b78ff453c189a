use alloc::vec::Vec;

use rand::seq::index::sample;

use super::{Tape, Tensor, Var};
use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Check at most this many entries per input, chosen at random.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            h: 1e-4,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input, flat index) of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Compare analytic gradients of a scalar function against central differences.
///
/// `f` builds the function on a fresh tape from parameter handles for
/// `inputs`, in order.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    if !(opts.h > 0.0) {
        return Err(Error::invalid("grad_check", "h must be positive"));
    }
    let eval = |xs: &[Tensor<f64>]| -> Result<(Tape<f64>, Vec<Var>, Var)> {
        let mut tape = Tape::new();
        let vars = xs
            .iter()
            .map(|x| tape.param(x.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = f(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };
    let scalar = |xs: &[Tensor<f64>]| -> Result<f64> {
        let (tape, _, out) = eval(xs)?;
        tape.value(out)
            .item()
            .ok_or_else(|| Error::invalid("grad_check", "function output is not scalar"))
    };

    let (tape, vars, out) = eval(inputs)?;
    let mut grads = tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, x)| grads.take(v).unwrap_or_else(|| Tensor::zeros(x.shape())))
        .collect();

    let mut rng = rng_from_seed(opts.seed);
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (i, x) in inputs.iter().enumerate() {
        let entries: Vec<usize> = match opts.max_entries {
            Some(k) if k < x.len() => {
                let mut e = sample(&mut rng, x.len(), k).into_vec();
                e.sort_unstable();
                e
            }
            _ => (0..x.len()).collect(),
        };
        for j in entries {
            let orig = x.data()[j];
            work[i].data_mut()[j] = orig + opts.h;
            let fp = scalar(&work)?;
            work[i].data_mut()[j] = orig - opts.h;
            let fm = scalar(&work)?;
            work[i].data_mut()[j] = orig;
            let num = (fp - fm) / (2.0 * opts.h);
            let a = analytic[i].data()[j];
            let rel = (a - num).abs() / (a.abs() + num.abs() + 1e-12);
            report.checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((i, j));
            }
        }
    }
    Ok(report)
}

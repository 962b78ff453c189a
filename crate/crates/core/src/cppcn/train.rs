use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::blocks::Normalization;
use super::loss::{
    completion_loss_on_tape, discriminator_loss_on_tape, generator_adversarial_on_tape,
};
use super::network::{apply_bn_updates, points_tensor, BnUpdate, Discriminator, Generator, Mode, Pass};
use super::{DiscriminatorConfig, NetworkConfig, TrainConfig};
use crate::autodiff::{AdamConfig, Scalar, Tape, Tensor, Var};
use crate::geom::{fps_seed_lowest, Point3};
use crate::metrics::chamfer_sq_points;
use crate::popsim::{fps_resample, CompletionSample};
use crate::rng::{derive_seed, rng_from_seed};
use crate::{Error, Result};

/// A sample in network coordinates with its three target resolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub input: Vec<Point3>,
    pub gt: Vec<Point3>,
    pub gt_mid: Vec<Point3>,
    pub gt_coarse: Vec<Point3>,
}

fn resample_lowest(pts: &[Point3], n: usize) -> Result<Vec<Point3>> {
    let start = fps_seed_lowest(pts).ok_or(Error::Empty { what: "point set" })?;
    Ok(fps_resample(pts, n, start)?.into_iter().map(|i| pts[i]).collect())
}

/// Normalise a sample by its frame and build the FPS targets
/// (`gt_coarse` is a prefix of `gt_mid`'s sample order).
pub fn prepare_example(sample: &CompletionSample, cfg: &NetworkConfig) -> Result<TrainingExample> {
    let norm = Normalization::from_frame(&sample.frame);
    let mut input = norm.apply_all(sample.surface.points());
    if input.len() != cfg.n_in {
        input = resample_lowest(&input, cfg.n_in)?;
    }
    let mut gt = norm.apply_all(sample.occluded.points());
    if gt.len() != cfg.m_out {
        gt = resample_lowest(&gt, cfg.m_out)?;
    }
    let mid = resample_lowest(&gt, cfg.m2)?;
    Ok(TrainingExample {
        input,
        gt_coarse: mid[..cfg.m1].to_vec(),
        gt_mid: mid,
        gt,
    })
}

/// Stacked tensors for a batch of examples.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub clouds: usize,
    pub input: Tensor<T>,
    /// Fine, middle and coarse targets.
    pub gt: [Tensor<T>; 3],
}

pub fn make_batch<T: Scalar>(examples: &[&TrainingExample]) -> Batch<T> {
    let stack = |f: fn(&TrainingExample) -> &[Point3]| {
        let v: Vec<&[Point3]> = examples.iter().map(|e| f(e)).collect();
        points_tensor(&v)
    };
    Batch {
        clouds: examples.len(),
        input: stack(|e| &e.input),
        gt: [stack(|e| &e.gt), stack(|e| &e.gt_mid), stack(|e| &e.gt_coarse)],
    }
}

/// Handles of the generator objective on a tape.
pub struct GeneratorStep {
    pub loss: Var,
    pub l_com: Var,
    pub l_adv: Var,
    pub fine: Var,
    pub updates: Vec<BnUpdate>,
}

/// `λ_com·L_com + λ_adv·L_adv` with the discriminator held fixed.
pub fn generator_objective<T: Scalar>(
    tape: &mut Tape<T>,
    gen: &Generator<T>,
    gen_vars: &[Var],
    disc: &Discriminator<T>,
    batch: &Batch<T>,
    alpha: f64,
    tc: &TrainConfig,
) -> Result<GeneratorStep> {
    let input = tape.constant(batch.input.clone())?;
    let mut pass = Pass::new(gen_vars, batch.clouds, Mode::Train, tc.bn_eps);
    let dec = gen.forward(tape, &mut pass, input)?;
    let gt = [
        tape.constant(batch.gt[0].clone())?,
        tape.constant(batch.gt[1].clone())?,
        tape.constant(batch.gt[2].clone())?,
    ];
    let l_com = completion_loss_on_tape(tape, &dec, gt, batch.clouds, alpha)?;
    let d_vars = disc.weights().bind(tape, false)?;
    let mut d_pass = Pass::new(&d_vars, batch.clouds, Mode::Train, tc.bn_eps);
    let d_fake = disc.forward(tape, &mut d_pass, dec.fine)?;
    let l_adv = generator_adversarial_on_tape(tape, d_fake, tc.generator_adversarial)?;
    let a = tape.scalar_mul(l_com, T::of_f64(tc.lambda_com))?;
    let b = tape.scalar_mul(l_adv, T::of_f64(tc.lambda_adv))?;
    let loss = tape.add(a, b)?;
    Ok(GeneratorStep {
        loss,
        l_com,
        l_adv,
        fine: dec.fine,
        updates: pass.updates,
    })
}

/// Discriminator loss on real targets and detached predictions.
pub fn discriminator_objective<T: Scalar>(
    tape: &mut Tape<T>,
    disc: &Discriminator<T>,
    d_vars: &[Var],
    real: Tensor<T>,
    fake: Tensor<T>,
    clouds: usize,
    eps: f64,
) -> Result<(Var, Vec<BnUpdate>)> {
    let real = tape.constant(real)?;
    let fake = tape.constant(fake)?;
    let mut pass = Pass::new(d_vars, clouds, Mode::Train, eps);
    let d_real = disc.forward(tape, &mut pass, real)?;
    let d_fake = disc.forward(tape, &mut pass, fake)?;
    let loss = discriminator_loss_on_tape(tape, d_real, d_fake)?;
    Ok((loss, pass.updates))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// One-based.
    pub epoch: usize,
    pub l_com: f64,
    /// Generator adversarial term.
    pub l_adv: f64,
    pub d_loss: f64,
    pub loss: f64,
    pub val_cd: Option<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub generator: Generator<T>,
    pub discriminator: Discriminator<T>,
    pub log: Vec<EpochLog>,
    /// Epoch whose weights were kept; `None` when no validation ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

fn diverged(epoch: usize, batch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { what } => Error::Diverged {
            epoch,
            batch,
            detail: what,
        },
        other => other,
    }
}

fn scalar<T: Scalar>(tape: &Tape<T>, v: Var) -> f64 {
    tape.value(v).item().map_or(f64::NAN, Scalar::as_f64)
}

/// Mean Chamfer distance of evaluation-mode predictions.
pub fn validation_cd<T: Scalar>(gen: &Generator<T>, examples: &[TrainingExample], eps: f64) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty { what: "validation set" });
    }
    let mut sum = 0.0;
    for e in examples {
        let pred = gen.predict(&[&e.input], eps)?;
        sum += chamfer_sq_points(&pred[0], &e.gt)?;
    }
    Ok(sum / examples.len() as f64)
}

/// Alternating discriminator/generator Adam updates.
pub fn train<T: Scalar>(
    train_set: &[TrainingExample],
    val_set: &[TrainingExample],
    net: &NetworkConfig,
    disc_cfg: &DiscriminatorConfig,
    tc: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome<T>> {
    net.validate()?;
    tc.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty { what: "training set" });
    }
    let mut gen: Generator<T> = Generator::new(net, derive_seed(tc.seed, 1))?;
    let mut disc: Discriminator<T> = Discriminator::new(disc_cfg, net.m_out, derive_seed(tc.seed, 2))?;
    let adam = AdamConfig {
        lr: tc.lr,
        ..AdamConfig::default()
    };
    let mut g_opt = gen.weights().adam_state(adam);
    let mut d_opt = disc.weights().adam_state(adam);
    let shuffle_root = derive_seed(tc.seed, 3);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Generator<T>)> = None;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..tc.max_epochs {
        let alpha = tc.alpha_at(epoch);
        g_opt.config.lr = tc.lr_at(epoch);
        d_opt.config.lr = g_opt.config.lr;
        order.sort_unstable();
        order.shuffle(&mut rng_from_seed(derive_seed(shuffle_root, epoch as u64)));
        let (mut s_com, mut s_adv, mut s_d, mut s_loss, mut seen) = (0.0, 0.0, 0.0, 0.0, 0usize);

        for (bi, chunk) in order.chunks(tc.batch_size).enumerate() {
            let ex: Vec<&TrainingExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let batch: Batch<T> = make_batch(&ex);
            let fail = |e| diverged(epoch + 1, bi, e);

            // Generator forward, kept for its own update below.
            let mut g_tape = Tape::new();
            let g_vars = gen.weights().bind(&mut g_tape, true).map_err(fail)?;
            let input = g_tape.constant(batch.input.clone()).map_err(fail)?;
            let mut g_pass = Pass::new(&g_vars, batch.clouds, Mode::Train, tc.bn_eps);
            let dec = gen.forward(&mut g_tape, &mut g_pass, input).map_err(fail)?;
            let g_updates = core::mem::take(&mut g_pass.updates);
            let fake = g_tape.value(dec.fine).clone();

            // Discriminator step.
            let mut d_tape = Tape::new();
            let d_vars = disc.weights().bind(&mut d_tape, true).map_err(fail)?;
            let (d_loss, d_updates) = discriminator_objective(
                &mut d_tape,
                &disc,
                &d_vars,
                batch.gt[0].clone(),
                fake,
                batch.clouds,
                tc.bn_eps,
            )
            .map_err(fail)?;
            let d_val = scalar(&d_tape, d_loss);
            let d_grads = d_tape.backward(d_loss).map_err(fail)?;
            disc.weights_mut().adam_update(&d_grads, &d_vars, &mut d_opt).map_err(fail)?;
            apply_bn_updates(disc.weights_mut(), &d_updates, tc.bn_momentum);

            // Generator step against the updated discriminator.
            let gt = [
                g_tape.constant(batch.gt[0].clone()).map_err(fail)?,
                g_tape.constant(batch.gt[1].clone()).map_err(fail)?,
                g_tape.constant(batch.gt[2].clone()).map_err(fail)?,
            ];
            let l_com = completion_loss_on_tape(&mut g_tape, &dec, gt, batch.clouds, alpha).map_err(fail)?;
            let dv = disc.weights().bind(&mut g_tape, false).map_err(fail)?;
            let mut d_pass = Pass::new(&dv, batch.clouds, Mode::Train, tc.bn_eps);
            let d_fake = disc.forward(&mut g_tape, &mut d_pass, dec.fine).map_err(fail)?;
            let l_adv = generator_adversarial_on_tape(&mut g_tape, d_fake, tc.generator_adversarial).map_err(fail)?;
            let a = g_tape.scalar_mul(l_com, T::of_f64(tc.lambda_com)).map_err(fail)?;
            let b = g_tape.scalar_mul(l_adv, T::of_f64(tc.lambda_adv)).map_err(fail)?;
            let loss = g_tape.add(a, b).map_err(fail)?;
            let (c_val, a_val, l_val) = (scalar(&g_tape, l_com), scalar(&g_tape, l_adv), scalar(&g_tape, loss));
            let g_grads = g_tape.backward(loss).map_err(fail)?;
            gen.weights_mut().adam_update(&g_grads, &g_vars, &mut g_opt).map_err(fail)?;
            apply_bn_updates(gen.weights_mut(), &g_updates, tc.bn_momentum);

            let w = batch.clouds as f64;
            s_com += c_val * w;
            s_adv += a_val * w;
            s_d += d_val * w;
            s_loss += l_val * w;
            seen += batch.clouds;
        }

        let n = seen as f64;
        let last = epoch + 1 == tc.max_epochs;
        let val_cd = if !val_set.is_empty() && ((epoch + 1) % tc.validate_every == 0 || last) {
            Some(validation_cd(&gen, val_set, tc.bn_eps)?)
        } else {
            None
        };
        let entry = EpochLog {
            epoch: epoch + 1,
            l_com: s_com / n,
            l_adv: s_adv / n,
            d_loss: s_d / n,
            loss: s_loss / n,
            val_cd,
            alpha,
        };
        if let Some(cd) = val_cd {
            if best.as_ref().is_none_or(|b| cd < b.0) {
                best = Some((cd, epoch + 1, gen.clone()));
            }
        }
        on_epoch(&entry);
        let stop = tc.stop_loss.is_some_and(|s| entry.loss < s);
        log.push(entry);
        if stop {
            stopped_early = true;
            if !val_set.is_empty() {
                let cd = validation_cd(&gen, val_set, tc.bn_eps)?;
                if best.as_ref().is_none_or(|b| cd < b.0) {
                    best = Some((cd, epoch + 1, gen.clone()));
                }
            }
            break;
        }
    }

    let (generator, best_epoch) = match best {
        Some((_, e, g)) => (g, Some(e)),
        None => (gen, None),
    };
    Ok(TrainOutcome {
        generator,
        discriminator: disc,
        log,
        best_epoch,
        stopped_early,
    })
}

/// CSV header of the per-epoch log.
pub const LOG_HEADER: &str = "epoch,l_com,l_adv,val_cd,alpha";

pub fn log_row(e: &EpochLog) -> alloc::string::String {
    let val = e.val_cd.map(|v| format!("{v}")).unwrap_or_default();
    format!("{},{},{},{},{}", e.epoch, e.l_com, e.l_adv, val, e.alpha)
}

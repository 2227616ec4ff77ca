//! Patch dataset construction, residual loss, optimizers and the epoch loop.
//!
//! Randomness in a run is derived from `TrainConfig::seed` on separate
//! ChaCha8 streams: one speckle stream per training pair (so batch order
//! never perturbs the noise), one per validation image, one for the
//! validation split and one for per-epoch shuffling.

mod config;
mod loss;
mod optim;
mod patches;

pub use config::{AdamConfig, TrainConfig};
pub use loss::mse_residual_loss;
pub use optim::{adam_step, lr_at_epoch, sgd_step, AdamState};
pub use patches::{extract_patches, patches_along};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::metrics::{psnr, ssim};
use crate::network::{build_sardrn, Network, NetworkGrads, NetworkSpec};
use crate::speckle::{apply_speckle_stream, SpeckleConfig};
use crate::tensor::{Shape4, Tensor4};

/// Speckle stream of training pair `k` (noise drawn once).
pub const PAIR_STREAM_BASE: u64 = 1;
/// Speckle stream of validation image `j` is `VALIDATION_STREAM_BASE + j`.
pub const VALIDATION_STREAM_BASE: u64 = 1 << 60;
const SPLIT_STREAM: u64 = (1 << 61) + 1;
const SHUFFLE_STREAM: u64 = (1 << 61) + 2;

/// A speckled patch, its residual target `speckled - clean`, and the clean patch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub speckled: ImageF,
    pub residual_target: ImageF,
    pub clean: ImageF,
}

/// Speckles `clean` with the given stream of `cfg` and forms the residual target.
pub fn make_training_pair(clean: &ImageF, cfg: &SpeckleConfig, stream: u64) -> Result<TrainingPair> {
    let speckled = apply_speckle_stream(clean, cfg, stream)?;
    let residual: Vec<f64> = speckled.pixels().iter().zip(clean.pixels()).map(|(s, c)| s - c).collect();
    Ok(TrainingPair {
        residual_target: ImageF::new(clean.height(), clean.width(), residual)?,
        speckled,
        clean: clean.clone(),
    })
}

/// Stream for pair `k` in `epoch` when noise is redrawn every epoch.
fn redraw_stream(epoch: usize, k: usize) -> u64 {
    ((epoch as u64 + 1) << 32) | k as u64
}

/// Stacks speckled inputs and residual targets of the selected pairs.
pub fn assemble_batch(pairs: &[TrainingPair], indices: &[usize]) -> Result<(Tensor4, Tensor4)> {
    let first = pairs
        .get(*indices.first().ok_or_else(|| Error::Argument("empty batch".into()))?)
        .ok_or_else(|| Error::Argument("batch index out of range".into()))?;
    let (h, w) = (first.speckled.height(), first.speckled.width());
    let mut input = Vec::with_capacity(indices.len() * h * w);
    let mut target = Vec::with_capacity(indices.len() * h * w);
    for &i in indices {
        let p = pairs.get(i).ok_or_else(|| Error::Argument("batch index out of range".into()))?;
        p.speckled.same_dims(&first.speckled, "assemble_batch")?;
        input.extend_from_slice(p.speckled.pixels());
        target.extend_from_slice(p.residual_target.pixels());
    }
    let shape = Shape4::new(indices.len(), 1, h, w);
    Ok((Tensor4::from_vec(shape, input)?, Tensor4::from_vec(shape, target)?))
}

/// Loss and parameter gradients of `net` on one batch.
pub fn batch_gradients(net: &Network, input: &Tensor4, target: &Tensor4) -> Result<(f64, NetworkGrads)> {
    let trace = net.forward_trace(input)?;
    let (loss, grad_pred) = mse_residual_loss(trace.prediction(), target)?;
    let grads = net.backward(&trace, &grad_pred)?;
    Ok((loss, grads))
}

/// Adam update of every network parameter.
pub fn adam_step_network(
    net: &mut Network,
    grads: &NetworkGrads,
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let g = grads.groups();
    let mut p = net.param_groups_mut();
    adam_step(&mut p, &g, state, lr, cfg).map_err(name_group)
}

/// Gradient-descent update of every network parameter.
pub fn sgd_step_network(net: &mut Network, grads: &NetworkGrads, lr: f64) -> Result<()> {
    let g = grads.groups();
    let mut p = net.param_groups_mut();
    sgd_step(&mut p, &g, lr).map_err(name_group)
}

fn name_group(e: Error) -> Error {
    match e {
        Error::NonFinite(msg) => {
            let named = msg
                .strip_prefix("gradient of parameter group ")
                .and_then(|rest| rest.split_once(' '))
                .and_then(|(g, idx)| g.parse::<usize>().ok().map(|g| format!("gradient of {} {idx}", Network::group_name(g))));
            Error::NonFinite(named.unwrap_or(msg))
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationRecord {
    pub epoch: usize,
    /// Mean PSNR of despeckled held-out images.
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: Network,
    pub losses: Vec<IterationRecord>,
    pub validation: Vec<ValidationRecord>,
    /// Dataset indices that were held out for validation.
    pub held_out: Vec<usize>,
}

/// Builds a fresh network for `spec` (seeded from `cfg.seed`) and trains it.
pub fn train(dataset: &[ImageF], cfg: &TrainConfig, spec: NetworkSpec) -> Result<TrainReport> {
    let net = build_sardrn(spec, cfg.seed)?;
    train_from(net, dataset, cfg, |_| {})
}

/// Seeded choice of held-out image indices, sorted ascending.
pub fn validation_split(count: usize, cfg: &TrainConfig) -> Vec<usize> {
    let held = ((count as f64 * cfg.validation_fraction).round() as usize).min(count.saturating_sub(1));
    let mut idx: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SPLIT_STREAM);
    idx.shuffle(&mut rng);
    let mut out = idx[..held].to_vec();
    out.sort_unstable();
    out
}

/// Trains `net` in place on patches of `dataset`, calling `observer` after
/// every optimizer step.
pub fn train_from(
    mut net: Network,
    dataset: &[ImageF],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let speckle = cfg.speckle();
    let held_out = validation_split(dataset.len(), cfg);

    let mut clean_patches = Vec::new();
    for (i, img) in dataset.iter().enumerate() {
        if held_out.binary_search(&i).is_err() {
            clean_patches.extend(extract_patches(img, cfg.patch_size, cfg.stride)?);
        }
    }
    let mut pairs = clean_patches
        .iter()
        .enumerate()
        .map(|(k, c)| make_training_pair(c, &speckle, PAIR_STREAM_BASE + k as u64))
        .collect::<Result<Vec<_>>>()?;
    if pairs.len() < cfg.batch_size {
        return Err(Error::Config(format!(
            "{} training patches cannot fill one batch of {}",
            pairs.len(),
            cfg.batch_size
        )));
    }

    let validation = held_out
        .iter()
        .enumerate()
        .map(|(j, &i)| {
            let clean = &dataset[i];
            apply_speckle_stream(clean, &speckle, VALIDATION_STREAM_BASE + j as u64).map(|y| (clean, y))
        })
        .collect::<Result<Vec<_>>>()?;

    let adam = cfg.adam();
    let mut state = AdamState::new(net.param_groups_mut().iter().map(|g| g.len()));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let batches_per_epoch = pairs.len() / cfg.batch_size;
    let budget = cfg.max_iterations.unwrap_or(usize::MAX);

    let mut losses = Vec::new();
    let mut history = Vec::new();
    let mut iteration = 0;
    'epochs: for epoch in 0..cfg.epochs {
        if iteration >= budget {
            break;
        }
        if cfg.redraw_noise && epoch > 0 {
            for (k, (pair, clean)) in pairs.iter_mut().zip(&clean_patches).enumerate() {
                *pair = make_training_pair(clean, &speckle, redraw_stream(epoch, k))?;
            }
        }
        let lr = lr_at_epoch(epoch, cfg);
        order.shuffle(&mut shuffle_rng);
        for b in 0..batches_per_epoch {
            if iteration >= budget {
                break 'epochs;
            }
            let (input, target) = assemble_batch(&pairs, &order[b * cfg.batch_size..(b + 1) * cfg.batch_size])?;
            let diverged = |source| Error::Diverged {
                iteration,
                source: Box::new(source),
            };
            let (loss, grads) = batch_gradients(&net, &input, &target).map_err(diverged)?;
            if !loss.is_finite() {
                return Err(diverged(Error::NonFinite(format!("loss ({loss})"))));
            }
            adam_step_network(&mut net, &grads, &mut state, lr, &adam).map_err(diverged)?;
            let record = IterationRecord {
                iteration,
                epoch,
                lr,
                loss,
            };
            observer(&record);
            losses.push(record);
            iteration += 1;
        }
        if !validation.is_empty() {
            let mut psnr_sum = 0.0;
            let mut ssim_sum = 0.0;
            for (clean, speckled) in &validation {
                let estimate = net.despeckle(speckled)?;
                psnr_sum += psnr(&estimate, clean, 1.0)?;
                ssim_sum += ssim(&estimate, clean)?;
            }
            let k = validation.len() as f64;
            history.push(ValidationRecord {
                epoch,
                psnr_db: psnr_sum / k,
                ssim: ssim_sum / k,
            });
        }
    }

    Ok(TrainReport {
        network: net,
        losses,
        validation: history,
        held_out,
    })
}

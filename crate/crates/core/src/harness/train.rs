//! Joint training of the ensemble members.

use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::{ModelBundle, Normalizer};
use super::config::RunConfig;
use super::variant::Variant;
use crate::data::{seeded_rng, EpochSet};
use crate::diffusion::process::forward_marginal_batch;
use crate::error::{Error, Result};
use crate::nn::loss::{l1_loss, mse_loss};
use crate::nn::{CyclicLr, Module, RmsProp};
use crate::refine::{one_hot, total_loss};
use crate::tensor::Tensor;

pub(crate) const INIT_STREAM: u64 = 100;
const SHUFFLE_STREAM: u64 = 200;
const NOISE_STREAM: u64 = 300;

/// Mean per-batch losses over one epoch, one entry per ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub epoch: usize,
    pub ddpm: Vec<f64>,
    pub cae: Vec<f64>,
    pub clf: Vec<f64>,
    /// The combined objective summed over members.
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub bundles: Vec<ModelBundle>,
    pub curves: Vec<EpochLosses>,
}

struct Member {
    bundle: ModelBundle,
    opt_den: RmsProp<f32>,
    opt_ref: RmsProp<f32>,
}

struct StepLosses {
    ddpm: f64,
    cae: f64,
    clf: f64,
}

struct Batch<'a> {
    x0: &'a Tensor<f32>,
    x_t: Option<&'a Tensor<f32>>,
    ts: &'a [usize],
    target: &'a Tensor<f32>,
    zeros: &'a Tensor<f32>,
}

impl Member {
    fn step(&mut self, b: &Batch<'_>, alpha: f64, lr: f64) -> Result<StepLosses> {
        let variant = self.bundle.variant;
        let den = &mut self.bundle.denoiser;
        let mut ddpm = 0.0;
        let x0_hat = match b.x_t {
            Some(x_t) if variant.uses_denoiser() => {
                den.zero_grad();
                let x0_hat = den.forward(x_t, b.ts)?;
                let (l, g) = l1_loss(&x0_hat, b.x0)?;
                ddpm = l as f64;
                den.backward(&g)?;
                self.opt_den.step(den, lr)?;
                Some(x0_hat)
            }
            _ => None,
        };

        let refine = &mut self.bundle.refine;
        refine.zero_grad();
        let (input, cond) = match variant {
            Variant::Full => (b.x_t.unwrap_or(b.x0), x0_hat.as_ref()),
            Variant::NoDdpm => (b.x0, Some(b.zeros)),
            Variant::NoDdpmNoDecoder => (b.x0, None),
        };
        let out = refine.forward(input, cond)?;
        let (clf, mut g_scores) = mse_loss(&out.scores, b.target)?;
        let cae = match &out.reconstruction {
            Some(recon) => {
                let (l, g_recon) = l1_loss(recon, b.x0)?;
                g_scores.scale(alpha as f32);
                refine.backward(Some(&g_recon), &g_scores)?;
                l as f64
            }
            None => {
                refine.backward(None, &g_scores)?;
                0.0
            }
        };
        self.opt_ref.step(refine, lr)?;
        Ok(StepLosses {
            ddpm,
            cae,
            clf: clf as f64,
        })
    }
}

fn divergence(epoch: usize, step: usize, reason: String, last_good: &Option<PathBuf>) -> Error {
    Error::Divergence {
        epoch,
        step,
        reason,
        last_good_checkpoint: last_good.clone(),
    }
}

pub fn bundle_file_name(kernel_size: usize) -> String {
    format!("bundle_k{kernel_size}.ndc1")
}

/// Trains one member per configured kernel size. Every batch draws a
/// timestep per example and one shared noisy batch; each member then takes a
/// denoiser step followed by an autoencoder-and-classifier step.
pub fn train(cfg: &RunConfig, train_set: &EpochSet, variant: Variant, checkpoint_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    train_set.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let schedule = cfg.noise_schedule()?;
    let normalizer = Normalizer::fit(&train_set.epochs);
    let x_all = normalizer.apply(&train_set.epochs)?;
    let (channels, k_classes) = (train_set.channels(), train_set.num_classes());

    let mut members = cfg
        .kernel_sizes
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut rng = seeded_rng(cfg.seed, INIT_STREAM + i as u64);
            Ok(Member {
                bundle: ModelBundle::new(
                    cfg.denoiser_config(channels, k),
                    cfg.cae_config(channels, k),
                    k_classes,
                    variant,
                    normalizer.clone(),
                    &mut rng,
                )?,
                opt_den: RmsProp::new(),
                opt_ref: RmsProp::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = train_set.len();
    let bs = cfg.train.batch_size;
    let batches_per_epoch = n.div_ceil(bs);
    let sched = CyclicLr::new(cfg.train.lr_min, cfg.train.lr_max, cfg.train.half_cycle_epochs * batches_per_epoch);
    let mut shuffle_rng = seeded_rng(cfg.seed, SHUFFLE_STREAM);
    let mut noise_rng = seeded_rng(cfg.seed, NOISE_STREAM);
    let alpha = cfg.train.alpha;
    let m = members.len();
    let mut curves = Vec::with_capacity(cfg.train.epochs);
    let mut last_good: Option<PathBuf> = None;
    let mut step = 0;

    for epoch in 0..cfg.train.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let mut sums = vec![[0.0f64; 3]; m];
        for idx in order.chunks(bs) {
            let x0 = x_all.gather(idx);
            let labels: Vec<usize> = idx.iter().map(|&i| train_set.labels[i]).collect();
            let target = one_hot::<f32>(&labels, k_classes)?;
            let ts: Vec<usize> = idx.iter().map(|_| noise_rng.gen_range(1..=schedule.steps())).collect();
            let x_t = if variant.uses_denoiser() {
                Some(forward_marginal_batch(&schedule, &x0, &ts, &mut noise_rng)?)
            } else {
                None
            };
            let zeros = Tensor::zeros(x0.shape());
            let batch = Batch {
                x0: &x0,
                x_t: x_t.as_ref(),
                ts: &ts,
                target: &target,
                zeros: &zeros,
            };
            let lr = sched.lr(step);
            let results: Vec<Result<StepLosses>> = members.par_iter_mut().map(|mb| mb.step(&batch, alpha, lr)).collect();
            for (k, r) in results.into_iter().enumerate() {
                let l = r.map_err(|e| match e {
                    Error::NonFinite { location } => divergence(epoch, step, location, &last_good),
                    other => other,
                })?;
                for (what, v) in [("ddpm", l.ddpm), ("cae", l.cae), ("classification", l.clf)] {
                    if !v.is_finite() {
                        return Err(divergence(
                            epoch,
                            step,
                            format!("{what} loss of member k={} is {v}", cfg.kernel_sizes[k]),
                            &last_good,
                        ));
                    }
                }
                sums[k][0] += l.ddpm;
                sums[k][1] += l.cae;
                sums[k][2] += l.clf;
            }
            step += 1;
        }
        let per = |j: usize| -> Vec<f64> { sums.iter().map(|s| s[j] / batches_per_epoch as f64).collect() };
        let (ddpm, cae, clf) = (per(0), per(1), per(2));
        let total = total_loss(&cae, &clf, cfg.loss_weights())?;
        info!("epoch {}/{}: ddpm {ddpm:.4?} cae {cae:.4?} clf {clf:.4?} total {total:.4}", epoch + 1, cfg.train.epochs);
        curves.push(EpochLosses {
            epoch: epoch + 1,
            ddpm,
            cae,
            clf,
            total,
        });

        let every = cfg.train.checkpoint_every;
        if let Some(dir) = checkpoint_dir {
            if every > 0 && (epoch + 1) % every == 0 {
                let sub = dir.join(format!("checkpoint_epoch{:04}", epoch + 1));
                std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
                for mb in &members {
                    mb.bundle.save(sub.join(bundle_file_name(mb.bundle.kernel_size)))?;
                }
                last_good = Some(sub);
            }
        }
    }
    Ok(TrainOutcome {
        bundles: members.into_iter().map(|m| m.bundle).collect(),
        curves,
    })
}

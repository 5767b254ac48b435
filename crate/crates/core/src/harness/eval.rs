//! Ensemble evaluation on a held-out set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use super::config::RunConfig;
use super::metrics::{accuracy, compute_auc, per_class_scores, ClassScores};
use super::train::EpochLosses;
use super::variant::Variant;
use crate::data::{seeded_rng, EpochSet};
use crate::diffusion::process::{forward_marginal_with_noise, standard_normal};
use crate::error::{Error, Result};
use crate::nn::loss::l1_loss;
use crate::refine::{argmax, ensemble_average, predict_classes};
use crate::tensor::Tensor;

const EVAL_STREAM: u64 = 400;

/// Everything reported for one trained ensemble on one test set. Contains no
/// wall-clock data, so equal inputs give equal bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: Variant,
    pub seed: u64,
    pub config_hash: String,
    pub split_hash: String,
    pub kernel_sizes: Vec<usize>,
    pub t_eval: usize,
    pub num_test: usize,
    /// Percent.
    pub accuracy: f64,
    /// Macro one-vs-rest, percent.
    pub auc: f64,
    /// One-vs-rest per class, percent; `None` where a class could not be scored.
    pub per_class_auc: Vec<Option<f64>>,
    pub per_class: Vec<ClassScores>,
    pub member_accuracy: Vec<f64>,
    /// Denoiser L1 at `t_eval` per member; empty without denoisers.
    pub denoise_l1: Vec<f64>,
    pub loss_curves: Vec<EpochLosses>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub member_scores: Vec<Tensor<f32>>,
    pub ensemble_scores: Tensor<f32>,
    pub predictions: Vec<usize>,
    pub accuracy: f64,
    pub auc: f64,
    pub per_class_auc: Vec<Option<f64>>,
    pub per_class: Vec<ClassScores>,
    pub member_accuracy: Vec<f64>,
    pub denoise_l1: Vec<f64>,
}

fn member_scores(b: &ModelBundle, test: &EpochSet, eps: Option<&Tensor<f32>>, cfg: &RunConfig) -> Result<(Tensor<f32>, Option<f64>)> {
    let x0 = b.normalizer.apply(&test.epochs)?;
    let n = test.len();
    let bs = cfg.train.batch_size;
    let mut scores = Vec::with_capacity(n * b.num_classes);
    let mut l1_sum = 0.0;
    let schedule = cfg.noise_schedule()?;
    for start in (0..n).step_by(bs) {
        let idx: Vec<usize> = (start..(start + bs).min(n)).collect();
        let xb = x0.gather(&idx);
        let input = match eps {
            Some(eps) if b.variant.uses_denoiser() => {
                let noisy = forward_marginal_with_noise(&schedule, &xb, cfg.eval.t_eval, eps.gather(&idx))?.x_t;
                let x0_hat = b.denoiser.predict(&noisy, &vec![cfg.eval.t_eval; idx.len()])?;
                l1_sum += l1_loss(&x0_hat, &xb)?.0 as f64 * idx.len() as f64;
                noisy
            }
            _ => xb,
        };
        scores.extend_from_slice(b.refine.scores(&input)?.data());
    }
    let l1 = b.variant.uses_denoiser().then(|| l1_sum / n as f64);
    Ok((Tensor::from_vec(&[n, b.num_classes], scores)?, l1))
}

/// Noises every test epoch to `t_eval` with seeded noise shared by all
/// members, denoises, encodes, pools and classifies per member, then averages
/// the members' scores and takes the argmax.
pub fn evaluate(bundles: &[ModelBundle], test: &EpochSet, cfg: &RunConfig) -> Result<Evaluation> {
    if bundles.is_empty() {
        return Err(Error::Usage("no model bundles to evaluate".into()));
    }
    test.validate()?;
    if test.len() < 2 {
        return Err(Error::Data(format!("test set has {} epochs; need at least 2", test.len())));
    }
    let k = test.num_classes();
    for b in bundles {
        if b.num_classes != k {
            return Err(Error::dim("evaluate", "classes", k, b.num_classes));
        }
    }
    let eps = bundles[0].variant.uses_denoiser().then(|| {
        let mut rng = seeded_rng(cfg.seed, EVAL_STREAM);
        standard_normal::<f32, _>(test.epochs.shape(), &mut rng)
    });
    let outs: Vec<(Tensor<f32>, Option<f64>)> = bundles
        .par_iter()
        .map(|b| member_scores(b, test, eps.as_ref(), cfg))
        .collect::<Result<_>>()?;
    let (member_scores, l1s): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
    let ensemble = ensemble_average(&member_scores)?;
    let predictions = predict_classes(&ensemble);

    // Each prediction must come from the averaged member scores of its row.
    for (i, &p) in predictions.iter().enumerate() {
        let rows: Vec<Tensor<f32>> = member_scores
            .iter()
            .map(|s| Tensor::from_vec(&[k], s.item(i).to_vec()))
            .collect::<Result<_>>()?;
        if argmax(ensemble_average(&rows)?.data()) != p {
            return Err(Error::Internal(format!("ensemble prediction mismatch at test epoch {i}")));
        }
    }

    let scores64: Vec<f64> = ensemble.data().iter().map(|&v| v as f64).collect();
    let auc = compute_auc(&scores64, k, &test.labels)?;
    Ok(Evaluation {
        accuracy: accuracy(&predictions, &test.labels),
        auc: 100.0 * auc.macro_auc,
        per_class_auc: auc.per_class.iter().map(|a| a.map(|v| 100.0 * v)).collect(),
        per_class: per_class_scores(&predictions, &test.labels, &test.class_names),
        member_accuracy: member_scores
            .iter()
            .map(|s| accuracy(&predict_classes(s), &test.labels))
            .collect(),
        denoise_l1: l1s.into_iter().flatten().collect(),
        member_scores,
        ensemble_scores: ensemble,
        predictions,
    })
}

impl Evaluation {
    pub fn into_report(
        self,
        cfg: &RunConfig,
        variant: Variant,
        split_hash: &str,
        curves: Vec<EpochLosses>,
    ) -> MetricsReport {
        MetricsReport {
            variant,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            split_hash: split_hash.to_string(),
            kernel_sizes: cfg.kernel_sizes.clone(),
            t_eval: cfg.eval.t_eval,
            num_test: self.predictions.len(),
            accuracy: self.accuracy,
            auc: self.auc,
            per_class_auc: self.per_class_auc,
            per_class: self.per_class,
            member_accuracy: self.member_accuracy,
            denoise_l1: self.denoise_l1,
            loss_curves: curves,
        }
    }
}

use log::info;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{evaluate, MetricsReport};
use super::train::train;
use super::variant::Variant;
use crate::data::split::{split, Split, SplitSpec};
use crate::data::{generate_synthetic, EpochSet};
use crate::error::{Error, Result};

pub fn split_for(cfg: &RunConfig, set: &EpochSet) -> Result<Split> {
    split(
        set,
        &SplitSpec {
            test_fraction: cfg.eval.test_fraction,
            seed: cfg.seed,
            stratified: true,
        },
    )
}

/// Split, train and evaluate one variant.
pub fn run_variant(cfg: &RunConfig, set: &EpochSet, variant: Variant) -> Result<MetricsReport> {
    let sp = split_for(cfg, set)?;
    run_on_split(cfg, &sp, variant)
}

pub fn run_on_split(cfg: &RunConfig, sp: &Split, variant: Variant) -> Result<MetricsReport> {
    let out = train(cfg, &sp.train, variant, None)?;
    let ev = evaluate(&out.bundles, &sp.test, cfg)?;
    info!(
        "{variant} seed {}: accuracy {:.2}% auc {:.2}%",
        cfg.seed, ev.accuracy, ev.auc
    );
    Ok(ev.into_report(cfg, variant, &sp.hash, out.curves))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub seed: u64,
    pub split_hash: String,
    /// One report per variant, in [`Variant::ALL`] order.
    pub reports: Vec<MetricsReport>,
}

/// All three variants on one dataset, sharing one split.
pub fn ablate(cfg: &RunConfig, set: &EpochSet) -> Result<AblationRun> {
    let sp = split_for(cfg, set)?;
    let reports = Variant::ALL
        .iter()
        .map(|&v| run_on_split(cfg, &sp, v))
        .collect::<Result<Vec<_>>>()?;
    if reports.iter().any(|r| r.split_hash != sp.hash) {
        return Err(Error::Internal("ablation variants saw different splits".into()));
    }
    Ok(AblationRun {
        seed: cfg.seed,
        split_hash: sp.hash,
        reports,
    })
}

/// Ablation over several seeds; each seed regenerates the synthetic dataset
/// from the config unless `dataset` is given.
pub fn ablate_seeds(cfg: &RunConfig, seeds: &[u64], dataset: Option<&EpochSet>) -> Result<Vec<AblationRun>> {
    seeds
        .iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            let generated;
            let set = match dataset {
                Some(s) => s,
                None => {
                    generated = generate_synthetic(&c.data, seed)?;
                    &generated
                }
            };
            ablate(&c, set)
        })
        .collect()
}

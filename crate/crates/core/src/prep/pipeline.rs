//! The preprocessing chain from continuous recordings to baseline-corrected
//! epochs.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{butter_bandpass, notch_filter, Sos};
use super::recording::Recording;
use crate::data::{content_hash, EpochSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BUTTERWORTH_ORDER: usize = 4;
pub const NOTCH_Q: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepConfig {
    /// Broadband edges in Hz; the upper edge is clipped to `0.45·fs`.
    pub band: [f64; 2],
    pub notches: Vec<f64>,
    pub notch_q: f64,
    pub hgamma: [f64; 2],
    pub epoch_sec: f64,
    pub baseline_ms: f64,
    pub order: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            band: [0.5, 125.0],
            notches: vec![60.0, 120.0],
            notch_q: NOTCH_Q,
            hgamma: [70.0, 115.0],
            epoch_sec: 2.0,
            baseline_ms: 500.0,
            order: BUTTERWORTH_ORDER,
        }
    }
}

impl PrepConfig {
    pub fn hash(&self) -> String {
        content_hash(self)
    }
}

/// Optional artifact-removal stage. The default does nothing.
pub trait ArtifactStage: Sync {
    fn name(&self) -> &str;
    fn apply(&self, rec: Recording) -> Result<Recording>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PassThrough;

impl ArtifactStage for PassThrough {
    fn name(&self) -> &str {
        "identity"
    }

    fn apply(&self, rec: Recording) -> Result<Recording> {
        Ok(rec)
    }
}

fn apply_sos(rec: &Recording, sos: &Sos) -> Result<Recording> {
    if rec.samples() == 0 {
        return Err(Error::Data("cannot filter a zero-length recording".into()));
    }
    let padlen = sos.default_padlen(rec.fs);
    let rows: Vec<Vec<f64>> = (0..rec.channels())
        .into_par_iter()
        .map(|c| {
            let x: Vec<f64> = rec.channel(c).iter().map(|&v| v as f64).collect();
            sos.filtfilt(&x, padlen)
        })
        .collect::<Result<_>>()?;
    let data = rows.into_iter().flatten().map(|v| v as f32).collect();
    Ok(rec.with_data(Tensor::from_vec(rec.data.shape(), data)?))
}

/// Zero-phase Butterworth bandpass.
pub fn bandpass(rec: &Recording, low: f64, high: f64) -> Result<Recording> {
    bandpass_order(rec, low, high, BUTTERWORTH_ORDER)
}

pub fn bandpass_order(rec: &Recording, low: f64, high: f64, order: usize) -> Result<Recording> {
    apply_sos(rec, &butter_bandpass(order, low, high, rec.fs)?)
}

/// Zero-phase notch at `f0`.
pub fn notch(rec: &Recording, f0: f64, q: f64) -> Result<Recording> {
    apply_sos(rec, &notch_filter(f0, q, rec.fs)?)
}

/// Subtracts the cross-channel mean at every sample.
pub fn common_average_reference(rec: &Recording) -> Result<Recording> {
    let (c, n) = (rec.channels(), rec.samples());
    if c < 2 {
        return Err(Error::Usage(format!("common average reference needs at least 2 channels, got {c}")));
    }
    let x = rec.data.data();
    let mut out = rec.data.clone();
    for j in 0..n {
        let mean = (0..c).map(|ch| x[ch * n + j] as f64).sum::<f64>() / c as f64;
        for ch in 0..c {
            out.data_mut()[ch * n + j] = (x[ch * n + j] as f64 - mean) as f32;
        }
    }
    Ok(rec.with_data(out))
}

/// Restricts the recording to the high-gamma band.
pub fn highgamma_select(rec: &Recording, band: [f64; 2]) -> Result<Recording> {
    bandpass(rec, band[0], band[1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Epoch {
    pub data: Tensor<f32>,
    pub label: usize,
    pub subject: String,
    pub onset: usize,
    /// Per-channel pre-onset mean that was subtracted.
    pub baseline: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmented {
    pub epochs: Vec<Epoch>,
    pub dropped: usize,
}

/// Cuts one `duration`-second epoch per event and subtracts, per channel, the
/// mean of the `baseline_ms` window before onset. Events without enough
/// history or future are dropped and counted.
pub fn epoch_segment(rec: &Recording, duration: f64, baseline_ms: f64) -> Result<Segmented> {
    let len = (duration * rec.fs).round() as usize;
    let base = (baseline_ms * rec.fs / 1000.0).round() as usize;
    if len == 0 || base == 0 {
        return Err(Error::Config(format!(
            "epoch of {duration} s with {baseline_ms} ms baseline is empty at fs = {} Hz",
            rec.fs
        )));
    }
    let (c, n) = (rec.channels(), rec.samples());
    let mut epochs = Vec::new();
    let mut dropped = 0;
    for e in &rec.events {
        if e.sample < base || e.sample + len > n {
            dropped += 1;
            continue;
        }
        let mut baseline = Vec::with_capacity(c);
        let mut data = Vec::with_capacity(c * len);
        for ch in 0..c {
            let x = rec.channel(ch);
            let mean = x[e.sample - base..e.sample].iter().map(|&v| v as f64).sum::<f64>() / base as f64;
            baseline.push(mean as f32);
            data.extend(x[e.sample..e.sample + len].iter().map(|&v| (v as f64 - mean) as f32));
        }
        epochs.push(Epoch {
            data: Tensor::from_vec(&[c, len], data)?,
            label: e.label,
            subject: rec.subject.clone(),
            onset: e.sample,
            baseline,
        });
    }
    if dropped > 0 {
        warn!("dropped {dropped} of {} events lacking epoch margins", rec.events.len());
    }
    Ok(Segmented { epochs, dropped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepReport {
    pub stages: Vec<String>,
    pub band: [f64; 2],
    pub hgamma: [f64; 2],
    pub skipped_notches: Vec<f64>,
    pub kept_epochs: usize,
    pub dropped_epochs: usize,
    pub config_hash: String,
}

/// Runs bandpass, notches, artifact stage, CAR, high-gamma selection and
/// epoching in that fixed order.
pub fn run_pipeline(rec: &Recording, cfg: &PrepConfig, artifacts: &dyn ArtifactStage) -> Result<(EpochSet, PrepReport)> {
    rec.validate()?;
    let fs = rec.fs;
    let high = cfg.band[1].min(0.45 * fs);
    if high < cfg.band[1] {
        info!("bandpass upper edge clipped from {} to {high} Hz at fs = {fs} Hz", cfg.band[1]);
    }
    let mut stages = Vec::new();
    let mut skipped = Vec::new();

    let mut r = bandpass_order(rec, cfg.band[0], high, cfg.order)?;
    stages.push(format!("bandpass({}-{high} Hz, order {})", cfg.band[0], cfg.order));
    for &f0 in &cfg.notches {
        if f0 >= fs / 2.0 || f0 >= high {
            warn!("skipping {f0} Hz notch: outside the retained band at fs = {fs} Hz");
            skipped.push(f0);
            continue;
        }
        r = notch(&r, f0, cfg.notch_q)?;
        stages.push(format!("notch({f0} Hz, Q {})", cfg.notch_q));
    }
    r = artifacts.apply(r)?;
    stages.push(format!("artifact({})", artifacts.name()));
    r = common_average_reference(&r)?;
    stages.push("car".into());
    r = highgamma_select(&r, cfg.hgamma)?;
    stages.push(format!("highgamma({}-{} Hz)", cfg.hgamma[0], cfg.hgamma[1]));
    let seg = epoch_segment(&r, cfg.epoch_sec, cfg.baseline_ms)?;
    stages.push(format!("epoch({} s, baseline {} ms)", cfg.epoch_sec, cfg.baseline_ms));

    if seg.epochs.is_empty() {
        return Err(Error::Data("no epochs survived segmentation".into()));
    }
    let labels = seg.epochs.iter().map(|e| e.label).collect();
    let items: Vec<_> = seg.epochs.into_iter().map(|e| e.data).collect();
    let hash = cfg.hash();
    let mut set = EpochSet::new(Tensor::stack(&items)?, labels, rec.class_names.clone(), &rec.subject, fs)?;
    set.meta.insert("prep_config_hash".into(), hash.clone());
    set.meta.insert("prep_stages".into(), stages.join(" -> "));
    let report = PrepReport {
        stages,
        band: [cfg.band[0], high],
        hgamma: cfg.hgamma,
        skipped_notches: skipped,
        kept_epochs: set.len(),
        dropped_epochs: seg.dropped,
        config_hash: hash,
    };
    Ok((set, report))
}

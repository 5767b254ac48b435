//! Synthetic EEG-like epochs: class-specific high-gamma bursts on a
//! class-specific channel subset, buried in pink plus white noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use super::{seeded_rng, EpochSet};
use crate::error::{Error, Result};
use crate::prep::{Event, Recording};
use crate::tensor::Tensor;

const EPOCH_STREAM: u64 = 1 << 32;
const RECORDING_STREAM: u64 = 2 << 32;

/// Mean of the squared Hann window over its support.
const HANN_POWER: f64 = 0.375;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub channels: usize,
    pub fs: f64,
    pub epoch_sec: f64,
    /// Signal power on active channels relative to the unit-variance noise.
    pub snr_db: f64,
    pub carriers_per_class: usize,
    pub active_channels: usize,
    pub band: [f64; 2],
    pub burst_sec: f64,
    /// Share of the noise variance that is white; the rest is pink.
    pub white_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            samples_per_class: 100,
            channels: 16,
            fs: 256.0,
            epoch_sec: 2.0,
            snr_db: 10.0,
            carriers_per_class: 2,
            active_channels: 4,
            band: [70.0, 115.0],
            burst_sec: 0.5,
            white_fraction: 0.5,
        }
    }
}

impl SyntheticSpec {
    /// The 13-class, 64-channel layout of the recorded task.
    pub fn paper() -> Self {
        Self {
            num_classes: 13,
            channels: 64,
            active_channels: 8,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(format!("synthetic spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn epoch_len(&self) -> usize {
        (self.epoch_sec * self.fs).round() as usize
    }

    fn burst_len(&self) -> usize {
        ((self.burst_sec * self.fs).round() as usize).min(self.epoch_len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.num_classes < 2 {
            return bad(format!("num_classes = {} (need at least 2)", self.num_classes));
        }
        if self.samples_per_class == 0 || self.channels == 0 || self.carriers_per_class == 0 {
            return bad("samples_per_class, channels and carriers_per_class must be positive".into());
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return bad(format!("fs = {}", self.fs));
        }
        if self.active_channels == 0 || self.active_channels > self.channels {
            return bad(format!("active_channels = {} with {} channels", self.active_channels, self.channels));
        }
        let [lo, hi] = self.band;
        if !(lo > 0.0 && lo < hi && hi < self.fs / 2.0) {
            return bad(format!("carrier band {lo}-{hi} Hz must lie inside (0, {}) Hz", self.fs / 2.0));
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.white_fraction) {
            return bad(format!("white_fraction = {}", self.white_fraction));
        }
        if self.epoch_len() < 8 || self.burst_len() < 4 {
            return bad("epoch and burst must span at least a few samples".into());
        }
        match self.num_classes.checked_mul(self.carriers_per_class) {
            Some(total) if total <= self.epoch_len() / 2 => {}
            _ => return bad("more carriers than resolvable frequency bins".into()),
        }
        Ok(())
    }

    /// Carrier frequencies of class `c`, interleaved with the other classes'
    /// across the band.
    pub fn carriers(&self, c: usize) -> Vec<f64> {
        let total = self.num_classes as f64 * self.carriers_per_class as f64;
        let step = (self.band[1] - self.band[0]) / total;
        (0..self.carriers_per_class)
            .map(|i| self.band[0] + (c as f64 + i as f64 * self.num_classes as f64) * step + step / 2.0)
            .collect()
    }

    pub fn active_set(&self, c: usize) -> Vec<usize> {
        let stride = (self.channels / self.num_classes).max(1);
        let mut set: Vec<usize> = (0..self.active_channels)
            .map(|j| ((c as u128 * stride as u128 + j as u128) % self.channels as u128) as usize)
            .collect();
        set.sort_unstable();
        set.dedup();
        set
    }

    /// Burst amplitude giving active-channel signal power `10^(snr/10)`.
    fn amplitude(&self) -> f64 {
        let power = 10f64.powf(self.snr_db / 10.0);
        let duty = self.burst_len() as f64 / self.epoch_len() as f64;
        (power / (self.carriers_per_class as f64 * 0.5 * HANN_POWER * duty)).sqrt()
    }

    pub fn class_names(&self) -> Vec<String> {
        (0..self.num_classes).map(|c| format!("class_{c:02}")).collect()
    }
}

/// Unit-variance 1/f noise by spectral shaping: magnitude `1/√f`, uniform
/// random phase, inverse real FFT.
pub fn pink_noise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut planner = RealFftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(n);
    let mut spec = inv.make_input_vec();
    let bins = spec.len();
    for (f, s) in spec.iter_mut().enumerate().skip(1) {
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        *s = num_complex::Complex64::from_polar(1.0 / (f as f64).sqrt(), phase);
    }
    if n.is_multiple_of(2) {
        spec[bins - 1].im = 0.0;
    }
    let mut out = inv.make_output_vec();
    inv.process(&mut spec, &mut out).expect("matching fft buffers");
    let mean = out.iter().sum::<f64>() / n as f64;
    let sd = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    out.iter().map(|v| (v - mean) / sd.max(f64::MIN_POSITIVE)).collect()
}

fn noise<R: Rng + ?Sized>(n: usize, white: f64, rng: &mut R) -> Vec<f64> {
    let pink = pink_noise(n, rng);
    let (wp, ww) = ((1.0 - white).sqrt(), white.sqrt());
    pink.into_iter().map(|p| wp * p + ww * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Adds class `c`'s bursts to `[C, L]` data in place.
fn add_bursts<R: Rng + ?Sized>(spec: &SyntheticSpec, c: usize, data: &mut [f64], len: usize, rng: &mut R) {
    let amp = spec.amplitude();
    let blen = spec.burst_len();
    let carriers = spec.carriers(c);
    for ch in spec.active_set(c) {
        let row = &mut data[ch * len..(ch + 1) * len];
        for &f in &carriers {
            let start = rng.gen_range(0..=len - blen);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let w = std::f64::consts::TAU * f / spec.fs;
            for i in 0..blen {
                let hann = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / blen as f64).cos();
                row[start + i] += amp * hann * (w * i as f64 + phase).sin();
            }
        }
    }
}

fn synth_epoch(spec: &SyntheticSpec, label: usize, seed: u64, index: usize) -> Vec<f32> {
    let mut rng = seeded_rng(seed, EPOCH_STREAM + index as u64);
    let len = spec.epoch_len();
    let mut data = Vec::with_capacity(spec.channels * len);
    for _ in 0..spec.channels {
        data.extend(noise(len, spec.white_fraction, &mut rng));
    }
    add_bursts(spec, label, &mut data, len, &mut rng);
    data.into_iter().map(|v| v as f32).collect()
}

/// Labelled epochs `[N, C, L]`, classes interleaved. A pure function of
/// `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<EpochSet> {
    spec.validate()?;
    let n = spec.num_classes * spec.samples_per_class;
    let labels: Vec<usize> = (0..n).map(|i| i % spec.num_classes).collect();
    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| synth_epoch(spec, labels[i], seed, i))
        .collect();
    let epochs = Tensor::from_vec(&[n, spec.channels, spec.epoch_len()], rows.concat())?;
    let mut set = EpochSet::new(epochs, labels, spec.class_names(), "synthetic", spec.fs)?;
    set.meta.insert("generator_seed".into(), seed.to_string());
    set.meta.insert("synthetic_spec_hash".into(), super::content_hash(spec));
    Ok(set)
}

/// A continuous recording with one event per trial, line noise at 60 Hz and
/// per-channel DC offsets, for exercising the preprocessing chain.
pub fn generate_recording(spec: &SyntheticSpec, seed: u64) -> Result<Recording> {
    spec.validate()?;
    let mut rng = seeded_rng(seed, RECORDING_STREAM);
    let len = spec.epoch_len();
    let lead = (spec.fs).round() as usize;
    let gap = len / 2;
    let mut order: Vec<usize> = (0..spec.num_classes)
        .flat_map(|c| std::iter::repeat_n(c, spec.samples_per_class))
        .collect();
    order.shuffle(&mut rng);
    let total = lead + order.len() * (len + gap) + lead;
    let c = spec.channels;

    let mut data = Vec::with_capacity(c * total);
    for _ in 0..c {
        data.extend(noise(total, spec.white_fraction, &mut rng));
    }
    let mut events = Vec::with_capacity(order.len());
    let mut scratch = vec![0.0; c * len];
    for (i, &label) in order.iter().enumerate() {
        let onset = lead + i * (len + gap);
        scratch.iter_mut().for_each(|v| *v = 0.0);
        add_bursts(spec, label, &mut scratch, len, &mut rng);
        for ch in 0..c {
            for j in 0..len {
                data[ch * total + onset + j] += scratch[ch * len + j];
            }
        }
        events.push(Event { sample: onset, label });
    }
    let nyquist = spec.fs / 2.0;
    for ch in 0..c {
        let offset = rng.gen_range(-50.0..50.0);
        let line_amp = rng.gen_range(1.0..3.0);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        for j in 0..total {
            let t = j as f64 / spec.fs;
            let mut v = offset;
            if 60.0 < nyquist {
                v += line_amp * (std::f64::consts::TAU * 60.0 * t + phase).sin();
            }
            data[ch * total + j] += v;
        }
    }
    let rec = Recording {
        data: Tensor::from_vec(&[c, total], data.into_iter().map(|v| v as f32).collect())?,
        fs: spec.fs,
        channel_names: (0..c).map(|i| format!("E{:02}", i + 1)).collect(),
        events,
        class_names: spec.class_names(),
        subject: format!("synthetic-{seed}"),
    };
    rec.validate()?;
    Ok(rec)
}

//! Run configuration: a built-in profile overlaid with an optional TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{content_hash, SyntheticSpec};
use crate::diffusion::{DenoiserConfig, NoiseSchedule};
use crate::error::{Error, Result};
use crate::nn::schedule::{LR_MAX, LR_MIN};
use crate::refine::{CaeConfig, LossWeights};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_min: f64,
    pub lr_max: f64,
    /// Half period of the learning-rate triangle, in epochs.
    pub half_cycle_epochs: usize,
    pub alpha: f64,
    /// Write checkpoints every this many epochs; 0 writes only the final one.
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub denoiser_widths: [usize; 3],
    pub cae_widths: [usize; 2],
    pub cond_channels: usize,
    pub groups: usize,
    pub time_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub t_eval: usize,
    pub test_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub kernel_sizes: Vec<usize>,
    pub schedule: ScheduleConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    pub data: SyntheticSpec,
}

impl RunConfig {
    pub fn desk() -> Self {
        Self {
            seed: 0,
            kernel_sizes: vec![51, 101, 201],
            schedule: ScheduleConfig {
                steps: 200,
                beta_start: 1e-4,
                beta_end: 0.02,
            },
            train: TrainConfig {
                epochs: 30,
                batch_size: 32,
                lr_min: LR_MIN,
                lr_max: LR_MAX,
                half_cycle_epochs: 25,
                alpha: LossWeights::default().alpha,
                checkpoint_every: 0,
            },
            model: ModelConfig {
                denoiser_widths: [16, 32, 64],
                cae_widths: [16, 32],
                cond_channels: 8,
                groups: 8,
                time_dim: 64,
            },
            eval: EvalConfig {
                t_eval: 20,
                test_fraction: 0.2,
            },
            data: SyntheticSpec::default(),
        }
    }

    pub fn paper() -> Self {
        let mut cfg = Self::desk();
        cfg.schedule.steps = 1000;
        cfg.train.epochs = 500;
        cfg.model.denoiser_widths = [64, 128, 256];
        cfg.model.cae_widths = [64, 128];
        cfg.model.cond_channels = 16;
        cfg.eval.t_eval = 100;
        cfg.data = SyntheticSpec::paper();
        cfg
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    /// Overlays the keys present in `text` onto the profile defaults.
    pub fn from_toml(profile: Profile, text: &str) -> Result<Self> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
        let base = toml::Table::try_from(Self::profile(profile)).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Value::Table(base);
        merge(&mut merged, toml::Value::Table(overlay));
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(profile: Profile, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(profile, &text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        content_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.kernel_sizes.is_empty() {
            return bad("kernel_sizes must name at least one ensemble member".into());
        }
        if let Some(k) = self.kernel_sizes.iter().find(|&&k| k % 2 == 0 || k == 0) {
            return bad(format!("kernel size {k} must be odd"));
        }
        self.noise_schedule()?;
        let t = &self.train;
        if t.epochs == 0 || t.batch_size == 0 || t.half_cycle_epochs == 0 {
            return bad("epochs, batch_size and half_cycle_epochs must be positive".into());
        }
        if !(t.lr_min > 0.0 && t.lr_min <= t.lr_max) {
            return bad(format!("learning rates need 0 < lr_min <= lr_max, got {} and {}", t.lr_min, t.lr_max));
        }
        if !(t.alpha >= 0.0 && t.alpha.is_finite()) {
            return bad(format!("alpha = {} must be >= 0", t.alpha));
        }
        if self.eval.t_eval == 0 || self.eval.t_eval > self.schedule.steps {
            return bad(format!("t_eval = {} outside 1..={}", self.eval.t_eval, self.schedule.steps));
        }
        if !(self.eval.test_fraction > 0.0 && self.eval.test_fraction < 1.0) {
            return bad(format!("test_fraction = {} must be in (0, 1)", self.eval.test_fraction));
        }
        if !self.model.time_dim.is_multiple_of(2) || self.model.time_dim < 4 {
            return bad(format!("time_dim = {} must be even and >= 4", self.model.time_dim));
        }
        for k in &self.kernel_sizes {
            self.denoiser_config(self.data.channels, *k).validate()?;
            self.cae_config(self.data.channels, *k).validate()?;
        }
        self.data.validate()
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.schedule.steps, self.schedule.beta_start, self.schedule.beta_end)
    }

    pub fn denoiser_config(&self, channels: usize, kernel_size: usize) -> DenoiserConfig {
        DenoiserConfig {
            channels,
            kernel_size,
            widths: self.model.denoiser_widths,
            groups: self.model.groups,
            time_dim: self.model.time_dim,
        }
    }

    pub fn cae_config(&self, channels: usize, kernel_size: usize) -> CaeConfig {
        CaeConfig {
            channels,
            kernel_size,
            widths: self.model.cae_widths,
            cond_channels: self.model.cond_channels,
            groups: self.model.groups,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { alpha: self.train.alpha }
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        RunConfig::desk().validate().unwrap();
        RunConfig::paper().validate().unwrap();
        assert_eq!(RunConfig::desk().kernel_sizes, vec![51, 101, 201]);
        assert_eq!(RunConfig::desk().train.alpha, 0.1);
        assert_eq!(RunConfig::paper().train.epochs, 500);
    }

    #[test]
    fn overlay_keeps_unmentioned_defaults() {
        let cfg = RunConfig::from_toml(Profile::Desk, "seed = 9\n[train]\nepochs = 3\n[data]\nsnr_db = 0.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.data.snr_db, 0.0);
        assert_eq!(cfg.data.channels, 16);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(RunConfig::from_toml(Profile::Desk, "sede = 1"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_toml(Profile::Desk, "kernel_sizes = [50]"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_toml(Profile::Desk, "[eval]\nt_eval = 500"),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::from_toml(Profile::Desk, "[[["), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let cfg = RunConfig::desk();
        let back = RunConfig::from_toml(Profile::Paper, &cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(RunConfig::paper().hash(), cfg.hash());
    }
}

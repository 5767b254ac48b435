use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear variance schedule `β_1..β_T` with derived `α_t = 1 − β_t` and
/// `ᾱ_t = ∏_{s≤t} α_s`. Timesteps are 1-based throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Config(format!(
                "schedule bounds must satisfy 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
            )));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, &a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::Usage(format!("timestep {t} outside 1..={}", self.steps())));
        }
        Ok(t - 1)
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        Ok(self.betas[self.index(t)?])
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        Ok(self.alphas[self.index(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        Ok(self.alpha_bars[self.index(t)?])
    }

    /// `ᾱ_t / (1 − ᾱ_t)`
    pub fn snr(&self, t: usize) -> Result<f64> {
        let ab = self.alpha_bar(t)?;
        Ok(ab / (1.0 - ab))
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("valid defaults")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_element_identities() {
        let s = NoiseSchedule::default();
        assert_eq!(s.beta(1).unwrap(), 1e-4);
        assert!((s.alpha_bar(1).unwrap() - 0.9999).abs() < 1e-15);
        assert_eq!(s.alpha_bar(1).unwrap(), s.alpha(1).unwrap());
    }

    #[test]
    fn linear_interpolation_midpoint() {
        let s = NoiseSchedule::default();
        let want = 1e-4 + (499.0 / 999.0) * (0.02 - 1e-4);
        assert!((s.beta(500).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn alpha_bar_and_snr_strictly_decrease() {
        for (steps, a, b) in [(1000, 1e-4, 0.02), (200, 1e-4, 0.02), (10, 0.3, 0.3)] {
            let s = NoiseSchedule::linear(steps, a, b).unwrap();
            for t in 2..=steps {
                assert!(s.alpha_bar(t).unwrap() < s.alpha_bar(t - 1).unwrap());
                assert!(s.snr(t).unwrap() < s.snr(t - 1).unwrap());
            }
        }
        let s = NoiseSchedule::default();
        assert!(s.alpha_bar(1000).unwrap() < s.alpha_bar(1).unwrap());
    }

    #[test]
    fn bounds_are_validated() {
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 0.03, 0.02).is_err());
        assert!(NoiseSchedule::linear(10, 1e-4, 1.0).is_err());
        assert!(NoiseSchedule::default().beta(0).is_err());
        assert!(NoiseSchedule::default().beta(1001).is_err());
    }
}

//! Ancestral sampling with an x₀-predicting denoiser. Only used as a
//! diagnostic; classification evaluates a single denoising step.

use rand::Rng;

use super::process::standard_normal;
use super::{Denoiser, NoiseSchedule};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// Mean and variance of `q(x_{t−1} | x_t, x_0)` with `x_0` replaced by a prediction.
pub fn posterior<T: Scalar>(
    schedule: &NoiseSchedule,
    x0_hat: &Tensor<T>,
    x_t: &Tensor<T>,
    t: usize,
) -> Result<(Tensor<T>, f64)> {
    x0_hat.expect_shape("posterior", x_t.shape())?;
    let beta = schedule.beta(t)?;
    let ab = schedule.alpha_bar(t)?;
    let ab_prev = if t == 1 { 1.0 } else { schedule.alpha_bar(t - 1)? };
    let c0 = T::of(ab_prev.sqrt() * beta / (1.0 - ab));
    let ct = T::of(schedule.alpha(t)?.sqrt() * (1.0 - ab_prev) / (1.0 - ab));
    let data = x0_hat
        .data()
        .iter()
        .zip(x_t.data())
        .map(|(&a, &b)| c0 * a + ct * b)
        .collect();
    Ok((Tensor::from_vec(x_t.shape(), data)?, beta * (1.0 - ab_prev) / (1.0 - ab)))
}

/// Runs the reverse chain from `x_t` at step `t` down to step 0 for a batch `[B, C, L]`.
pub fn reverse_chain<T: Scalar, R: Rng + ?Sized>(
    model: &Denoiser<T>,
    schedule: &NoiseSchedule,
    x_t: &Tensor<T>,
    t: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    schedule.beta(t)?;
    let batch = x_t.dim(0);
    let mut x = x_t.clone();
    for s in (1..=t).rev() {
        let x0_hat = model.predict(&x, &vec![s; batch])?;
        let (mean, var) = posterior(schedule, &x0_hat, &x, s)?;
        if s == 1 {
            x = mean;
        } else {
            let z = standard_normal::<T, _>(mean.shape(), rng);
            let sd = T::of(var.sqrt());
            let data = mean.data().iter().zip(z.data()).map(|(&m, &e)| m + sd * e).collect();
            x = Tensor::from_vec(mean.shape(), data)?;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posterior_at_first_step_returns_the_prediction() {
        let s = NoiseSchedule::linear(50, 1e-4, 0.02).unwrap();
        let x0 = Tensor::<f64>::from_fn(&[6], |i| i as f64 - 2.0);
        let xt = Tensor::<f64>::from_fn(&[6], |i| (i as f64).sin());
        let (mean, var) = posterior(&s, &x0, &xt, 1).unwrap();
        assert_eq!(var, 0.0);
        for (a, b) in mean.data().iter().zip(x0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_pair_lands_on_the_mean_path() {
        // x_t = √ᾱ_t·x0 exactly, so the posterior mean is √ᾱ_{t−1}·x0.
        let s = NoiseSchedule::default();
        let t = 400;
        let x0 = Tensor::<f64>::from_fn(&[5], |i| 0.3 * i as f64 + 0.1);
        let xt = x0.map(|v| v * s.alpha_bar(t).unwrap().sqrt());
        let (mean, var) = posterior(&s, &x0, &xt, t).unwrap();
        let k = s.alpha_bar(t - 1).unwrap().sqrt();
        for (m, x) in mean.data().iter().zip(x0.data()) {
            assert!((m - k * x).abs() < 1e-12);
        }
        assert!(var > 0.0 && var < s.beta(t).unwrap());
    }
}

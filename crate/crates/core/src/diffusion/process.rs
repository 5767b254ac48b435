//! The forward (noising) process: single Markov steps and the closed-form
//! marginal `q(x_t | x_0)`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::NoiseSchedule;
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

/// A noised sample together with the Gaussian draw that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyObservation<T = f32> {
    pub x_t: Tensor<T>,
    pub t: usize,
    pub eps: Tensor<T>,
}

pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::of(rng.sample::<f64, _>(StandardNormal)))
}

/// One step of the chain: `√(1−β_t)·x_{t−1} + √β_t·ε`.
pub fn forward_step<T: Scalar, R: Rng + ?Sized>(
    schedule: &NoiseSchedule,
    x_prev: &Tensor<T>,
    t: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    let beta = schedule.beta(t)?;
    let (keep, noise) = (T::of((1.0 - beta).sqrt()), T::of(beta.sqrt()));
    let mut out = x_prev.clone();
    for v in out.data_mut() {
        let e = T::of(rng.sample::<f64, _>(StandardNormal));
        *v = keep * *v + noise * e;
    }
    Ok(out)
}

/// Jumps straight to step `t`: `√ᾱ_t·x_0 + √(1−ᾱ_t)·ε`.
pub fn forward_marginal<T: Scalar, R: Rng + ?Sized>(
    schedule: &NoiseSchedule,
    x0: &Tensor<T>,
    t: usize,
    rng: &mut R,
) -> Result<NoisyObservation<T>> {
    schedule.alpha_bar(t)?;
    let eps = standard_normal(x0.shape(), rng);
    forward_marginal_with_noise(schedule, x0, t, eps)
}

/// As [`forward_marginal`] with the Gaussian draw supplied by the caller.
pub fn forward_marginal_with_noise<T: Scalar>(
    schedule: &NoiseSchedule,
    x0: &Tensor<T>,
    t: usize,
    eps: Tensor<T>,
) -> Result<NoisyObservation<T>> {
    let ab = schedule.alpha_bar(t)?;
    eps.expect_shape("forward marginal noise", x0.shape())?;
    let (keep, noise) = (T::of(ab.sqrt()), T::of((1.0 - ab).sqrt()));
    let data = x0
        .data()
        .iter()
        .zip(eps.data())
        .map(|(&x, &e)| keep * x + noise * e)
        .collect();
    Ok(NoisyObservation {
        x_t: Tensor::from_vec(x0.shape(), data)?,
        t,
        eps,
    })
}

/// Noises a batch `[B, C, L]` where example `i` goes to step `ts[i]`.
pub fn forward_marginal_batch<T: Scalar, R: Rng + ?Sized>(
    schedule: &NoiseSchedule,
    x0: &Tensor<T>,
    ts: &[usize],
    rng: &mut R,
) -> Result<Tensor<T>> {
    let mut out = Tensor::zeros(x0.shape());
    for (i, &t) in ts.iter().enumerate() {
        let ab = schedule.alpha_bar(t)?;
        let (keep, noise) = (T::of(ab.sqrt()), T::of((1.0 - ab).sqrt()));
        let src = x0.item(i);
        for (dst, &x) in out.item_mut(i).iter_mut().zip(src) {
            let e = T::of(rng.sample::<f64, _>(StandardNormal));
            *dst = keep * x + noise * e;
        }
    }
    Ok(out)
}

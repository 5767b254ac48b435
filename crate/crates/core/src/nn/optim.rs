//! RMSProp with the squared-gradient average kept per parameter element.

use super::{Module, Param};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub const RMSPROP_DECAY: f64 = 0.99;
pub const RMSPROP_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RmsProp<T = f32> {
    decay: f64,
    eps: f64,
    accumulators: Vec<Tensor<T>>,
    steps: u64,
}

impl<T: Scalar> Default for RmsProp<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// One in-place RMSProp update of a flat parameter block.
///
/// `acc ← ρ·acc + (1−ρ)·g²`, then `p ← p − lr·g/√(acc + ε)`.
pub fn rmsprop_update<T: Scalar>(params: &mut [T], grads: &[T], acc: &mut [T], lr: f64, decay: f64, eps: f64) {
    let (rho, one_minus, lr, eps) = (T::of(decay), T::of(1.0 - decay), T::of(lr), T::of(eps));
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        *a = rho * *a + one_minus * g * g;
        *p -= lr * g / (*a + eps).sqrt();
    }
}

impl<T: Scalar> RmsProp<T> {
    pub fn new() -> Self {
        Self {
            decay: RMSPROP_DECAY,
            eps: RMSPROP_EPS,
            accumulators: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accumulators(&self) -> &[Tensor<T>] {
        &self.accumulators
    }

    /// Applies one update to every parameter of `model` using its accumulated
    /// gradients. Nothing is modified if any gradient is non-finite.
    pub fn step<M: Module<T> + ?Sized>(&mut self, model: &mut M, lr: f64) -> Result<()> {
        let mut bad = None;
        let mut shapes = Vec::new();
        model.visit("", &mut |name, p: &Param<T>| {
            if bad.is_none() && !p.grad.all_finite() {
                bad = Some(name.to_string());
            }
            shapes.push(p.value.shape().to_vec());
        });
        if let Some(location) = bad {
            return Err(Error::NonFinite {
                location: format!("gradient of {location}"),
            });
        }
        if self.accumulators.is_empty() {
            self.accumulators = shapes.iter().map(|s| Tensor::zeros(s)).collect();
        }
        if self.accumulators.len() != shapes.len()
            || self.accumulators.iter().zip(&shapes).any(|(a, s)| a.shape() != s.as_slice())
        {
            return Err(Error::Usage("optimizer state does not match the model's parameters".into()));
        }
        let (decay, eps) = (self.decay, self.eps);
        let mut idx = 0;
        let accs = &mut self.accumulators;
        model.visit_mut("", &mut |_, p| {
            let Param { value, grad } = p;
            rmsprop_update(value.data_mut(), grad.data(), accs[idx].data_mut(), lr, decay, eps);
            idx += 1;
        });
        self.steps += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_decays_state() {
        let mut p = [1.0f64, -2.0];
        let mut acc = [0.5f64, 0.25];
        rmsprop_update(&mut p, &[0.0, 0.0], &mut acc, 0.1, RMSPROP_DECAY, RMSPROP_EPS);
        assert_eq!(p, [1.0, -2.0]);
        assert_eq!(acc, [0.5 * 0.99, 0.25 * 0.99]);
    }

    #[test]
    fn first_step_by_hand() {
        let mut p = [0.0f64];
        let mut acc = [0.0f64];
        rmsprop_update(&mut p, &[1.0], &mut acc, 0.1, RMSPROP_DECAY, RMSPROP_EPS);
        assert!((acc[0] - 0.01).abs() < 1e-15);
        let want = -0.1 / (0.01f64 + 1e-8).sqrt();
        assert!((p[0] - want).abs() < 1e-15);
        assert!((p[0] + 0.9999995).abs() < 1e-7);
    }

    #[test]
    fn repeated_gradient_shrinks_the_step() {
        let mut p = [0.0f64];
        let mut acc = [0.0f64];
        rmsprop_update(&mut p, &[1.0], &mut acc, 0.1, RMSPROP_DECAY, RMSPROP_EPS);
        let first = -p[0];
        let before = p[0];
        rmsprop_update(&mut p, &[1.0], &mut acc, 0.1, RMSPROP_DECAY, RMSPROP_EPS);
        let second = before - p[0];
        assert!(second < first);
        assert!(acc[0] > 0.01);
    }
}

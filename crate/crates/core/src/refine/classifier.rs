use rand::Rng;

use super::cae::LATENT_CHANNELS;
use crate::error::{Error, Result};
use crate::nn::{join, AdaptiveAvgPool, Linear, Module, Param};
use crate::tensor::{Scalar, Tensor};

/// Mean-pools a `[B, 256, L']` feature map to a latent vector and maps it to
/// raw class scores.
#[derive(Clone, Debug)]
pub struct LinearClassifier<T = f32> {
    pool: AdaptiveAvgPool,
    pub linear: Linear<T>,
}

impl<T: Scalar> LinearClassifier<T> {
    pub fn new<R: Rng + ?Sized>(num_classes: usize, rng: &mut R) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        Ok(Self {
            pool: AdaptiveAvgPool::new(1)?,
            linear: Linear::new(LATENT_CHANNELS, num_classes, rng),
        })
    }

    pub fn from_linear(linear: Linear<T>) -> Result<Self> {
        if linear.inputs() != LATENT_CHANNELS {
            return Err(Error::dim("classifier", "latent width", LATENT_CHANNELS, linear.inputs()));
        }
        Ok(Self {
            pool: AdaptiveAvgPool::new(1)?,
            linear,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.linear.outputs()
    }

    fn check(&self, features: &Tensor<T>) -> Result<()> {
        if features.rank() != 3 {
            return Err(Error::dim("classifier", "feature rank", 3, features.rank()));
        }
        if features.dim(1) != LATENT_CHANNELS {
            return Err(Error::dim("classifier", "feature channels", LATENT_CHANNELS, features.dim(1)));
        }
        Ok(())
    }

    /// `[B, 256]` latent vectors.
    pub fn latent(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(features)?;
        let n = features.dim(0);
        self.pool.infer(features)?.reshape(&[n, LATENT_CHANNELS])
    }

    pub fn forward(&mut self, features: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(features)?;
        let n = features.dim(0);
        let z = self.pool.forward(features)?.reshape(&[n, LATENT_CHANNELS])?;
        let y = self.linear.forward(&z)?;
        finite_scores(&y)?;
        Ok(y)
    }

    pub fn infer(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.linear.infer(&self.latent(features)?)?;
        finite_scores(&y)?;
        Ok(y)
    }

    /// Returns the gradient with respect to the feature map.
    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let gz = self.linear.backward(gy)?;
        let n = gz.dim(0);
        self.pool.backward(&gz.reshape(&[n, LATENT_CHANNELS, 1])?)
    }
}

fn finite_scores<T: Scalar>(y: &Tensor<T>) -> Result<()> {
    if let Some(i) = y.data().iter().position(|v| !v.is_finite()) {
        let k = y.dim(1);
        return Err(Error::NonFinite {
            location: format!("classifier score (example {}, class {})", i / k, i % k),
        });
    }
    Ok(())
}

impl<T: Scalar> Module<T> for LinearClassifier<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.linear.visit(&join(prefix, "linear"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.linear.visit_mut(&join(prefix, "linear"), f);
    }
}

/// Single-example scores from a `[256, L']` feature map.
pub fn pool_and_classify<T: Scalar>(clf: &LinearClassifier<T>, features: &Tensor<T>) -> Result<Tensor<T>> {
    clf.infer(&features.clone().unsqueeze0())?.squeeze0()
}

//! Differentiable building blocks: the layers the denoiser, autoencoder and
//! classifier are assembled from, plus the optimizer and learning-rate schedule.
//!
//! Layers are stateful in the classic sense: `forward` caches what `backward`
//! needs, and `backward` accumulates parameter gradients into the layer's own
//! [`Param`] slots. All batched tensors are laid out `[batch, channels, length]`.

pub mod activation;
pub mod block;
pub mod check;
pub mod conv;
pub mod embed;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod optim;
pub mod pool;
pub mod schedule;
pub mod upsample;

use rand::Rng;

use crate::tensor::{Scalar, Tensor};

pub use activation::Silu;
pub use block::ConvBlock;
pub use conv::{Conv1d, ConvAlgo};
pub use embed::time_embedding;
pub use linear::Linear;
pub use norm::GroupNorm;
pub use optim::RmsProp;
pub use pool::AdaptiveAvgPool;
pub use schedule::CyclicLr;
pub use upsample::Upsample;

/// A trainable tensor and its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Param<T = f32> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }
}

/// Anything that owns parameters. Visiting order is fixed and defines the
/// optimizer state layout and checkpoint naming.
pub trait Module<T: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>));

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>));

    fn zero_grad(&mut self) {
        self.visit_mut("", &mut |_, p| p.grad.fill(T::zero()));
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, p| n += p.value.len());
        n
    }

    /// Names of every parameter block, in visiting order.
    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit("", &mut |name, _| names.push(name.to_string()));
        names
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Uniform in `±1/√fan_in`.
pub(crate) fn fan_in_uniform<T: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Tensor<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::of(rng.gen_range(-bound..bound)))
}

use rand::Rng;

use super::{join, Conv1d, GroupNorm, Module, Param, Silu};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `conv → group norm → SiLU`, the unit every convolutional stack is built from.
#[derive(Clone, Debug)]
pub struct ConvBlock<T = f32> {
    pub conv: Conv1d<T>,
    pub norm: GroupNorm<T>,
    act: Silu<T>,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            conv: Conv1d::new(c_in, c_out, kernel, stride, rng)?,
            norm: GroupNorm::new(c_out, groups)?,
            act: Silu::new(),
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.conv.forward(x)?;
        let h = self.norm.forward(&h)?;
        Ok(self.act.forward(&h))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.conv.infer(x)?;
        let h = self.norm.infer(&h)?;
        Ok(super::activation::silu(&h))
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.act.backward(gy)?;
        let g = self.norm.backward(&g)?;
        self.conv.backward(&g)
    }
}

impl<T: Scalar> Module<T> for ConvBlock<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv.visit(&join(prefix, "conv"), f);
        self.norm.visit(&join(prefix, "norm"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv.visit_mut(&join(prefix, "conv"), f);
        self.norm.visit_mut(&join(prefix, "norm"), f);
    }
}

/// Adds a per-example, per-channel offset `[B, C]` to every position of `[B, C, L]`.
pub fn add_channel_offset<T: Scalar>(h: &mut Tensor<T>, offset: &Tensor<T>) -> Result<()> {
    let (n, c, l) = (h.dim(0), h.dim(1), h.dim(2));
    offset.expect_shape("channel offset", &[n, c])?;
    for s in 0..n {
        for ch in 0..c {
            let v = offset.data()[s * c + ch];
            for x in &mut h.data_mut()[(s * c + ch) * l..(s * c + ch + 1) * l] {
                *x += v;
            }
        }
    }
    Ok(())
}

/// Gradient of [`add_channel_offset`] with respect to the offset.
pub fn sum_over_length<T: Scalar>(g: &Tensor<T>) -> Tensor<T> {
    let (n, c, l) = (g.dim(0), g.dim(1), g.dim(2));
    Tensor::from_fn(&[n, c], |i| g.data()[i * l..(i + 1) * l].iter().copied().sum())
}

/// Rounds `k / div` to an odd kernel of at least 3 taps.
pub fn scaled_kernel(k: usize, div: usize) -> usize {
    ((k / div) | 1).max(3)
}

pub(crate) fn check_finite<T: Scalar>(t: &Tensor<T>, model: &str, layer: usize, name: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            location: format!("{model} layer {layer} ({name})"),
        })
    }
}

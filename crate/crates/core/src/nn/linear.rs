use rand::Rng;

use super::{fan_in_uniform, join, Module, Param};
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Affine map `[B, in] → [B, out]`.
#[derive(Clone, Debug)]
pub struct Linear<T = f32> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let weight = fan_in_uniform(&[outputs, inputs], inputs, rng);
        Self::from_parts(weight, Tensor::zeros(&[outputs])).expect("consistent shapes")
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.rank() != 2 {
            return Err(Error::dim("linear", "weight rank", 2, weight.rank()));
        }
        bias.expect_shape("linear bias", &[weight.dim(0)])?;
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 2 {
            return Err(Error::dim("linear", "input rank", 2, x.rank()));
        }
        if x.dim(1) != self.inputs() {
            return Err(Error::dim("linear", "features", self.inputs(), x.dim(1)));
        }
        let (n, fi, fo) = (x.dim(0), self.inputs(), self.outputs());
        let mut y = Tensor::zeros(&[n, fo]);
        for s in 0..n {
            y.item_mut(s).copy_from_slice(self.bias.value.data());
        }
        T::matmul(n, fi, fo, x.data(), false, self.weight.value.data(), true, y.data_mut(), true);
        Ok(y)
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .input
            .take()
            .ok_or_else(|| Error::Usage("linear backward without forward".into()))?;
        let (n, fi, fo) = (x.dim(0), self.inputs(), self.outputs());
        gy.expect_shape("linear backward", &[n, fo])?;
        T::matmul(fo, n, fi, gy.data(), true, x.data(), false, self.weight.grad.data_mut(), true);
        for s in 0..n {
            for (b, &g) in self.bias.grad.data_mut().iter_mut().zip(gy.item(s)) {
                *b += g;
            }
        }
        let mut gx = Tensor::zeros(&[n, fi]);
        T::matmul(n, fo, fi, gy.data(), false, self.weight.value.data(), false, gx.data_mut(), false);
        Ok(gx)
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}

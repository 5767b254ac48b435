use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `x · sigmoid(x)`
#[derive(Clone, Debug, Default)]
pub struct Silu<T = f32> {
    /// Input and its sigmoid from the last forward pass.
    cache: Option<(Tensor<T>, Vec<T>)>,
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

pub fn silu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v * sigmoid(v))
}

impl<T: Scalar> Silu<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        let sig: Vec<T> = x.data().iter().map(|&v| sigmoid(v)).collect();
        let y = x.data().iter().zip(&sig).map(|(&v, &s)| v * s).collect();
        self.cache = Some((x.clone(), sig));
        Tensor::from_vec(x.shape(), y).expect("same shape as input")
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (x, sig) = self
            .cache
            .take()
            .ok_or_else(|| Error::Usage("silu backward without forward".into()))?;
        gy.expect_shape("silu backward", x.shape())?;
        let mut gx = gy.clone();
        for ((g, &v), &s) in gx.data_mut().iter_mut().zip(x.data()).zip(&sig) {
            *g *= s * (T::one() + v * (T::one() - s));
        }
        Ok(gx)
    }
}

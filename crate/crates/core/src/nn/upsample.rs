use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Nearest-neighbour resampling of the length axis to a fixed target.
#[derive(Clone, Debug)]
pub struct Upsample {
    target: usize,
    input_len: Option<(usize, usize, usize)>,
}

impl Upsample {
    pub fn new(target: usize) -> Self {
        Self {
            target,
            input_len: None,
        }
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input_len = Some((x.dim(0), x.dim(1), x.dim(2)));
        Ok(y)
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 3 {
            return Err(Error::dim("upsample", "input rank", 3, x.rank()));
        }
        let (n, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        let t = self.target;
        let mut y = Tensor::zeros(&[n, c, t]);
        for row in 0..n * c {
            for j in 0..t {
                y.data_mut()[row * t + j] = x.data()[row * l + j * l / t];
            }
        }
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, l) = self
            .input_len
            .take()
            .ok_or_else(|| Error::Usage("upsample backward without forward".into()))?;
        let t = self.target;
        gy.expect_shape("upsample backward", &[n, c, t])?;
        let mut gx = Tensor::zeros(&[n, c, l]);
        for row in 0..n * c {
            for j in 0..t {
                gx.data_mut()[row * l + j * l / t] += gy.data()[row * t + j];
            }
        }
        Ok(gx)
    }
}

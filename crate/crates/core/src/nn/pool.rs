use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean over contiguous bins: bin `i` spans `[⌊iL/n⌋, ⌈(i+1)L/n⌉)`.
#[derive(Clone, Debug)]
pub struct AdaptiveAvgPool {
    target: usize,
    input_len: Option<(usize, usize, usize)>,
}

fn bin(i: usize, len: usize, target: usize) -> (usize, usize) {
    (i * len / target, ((i + 1) * len).div_ceil(target))
}

impl AdaptiveAvgPool {
    pub fn new(target: usize) -> Result<Self> {
        if target == 0 {
            return Err(Error::Config("adaptive pool target must be at least 1".into()));
        }
        Ok(Self {
            target,
            input_len: None,
        })
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input_len = Some((x.dim(0), x.dim(1), x.dim(2)));
        Ok(y)
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.rank() != 3 {
            return Err(Error::dim("adaptive pool", "input rank", 3, x.rank()));
        }
        let (n, c, l) = (x.dim(0), x.dim(1), x.dim(2));
        if self.target > l {
            return Err(Error::Config(format!(
                "adaptive pool target {} exceeds input length {l}",
                self.target
            )));
        }
        let mut y = Tensor::zeros(&[n, c, self.target]);
        for row in 0..n * c {
            let src = &x.data()[row * l..(row + 1) * l];
            for i in 0..self.target {
                let (a, b) = bin(i, l, self.target);
                y.data_mut()[row * self.target + i] = src[a..b].iter().copied().sum::<T>() / T::of((b - a) as f64);
            }
        }
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, l) = self
            .input_len
            .take()
            .ok_or_else(|| Error::Usage("adaptive pool backward without forward".into()))?;
        gy.expect_shape("adaptive pool backward", &[n, c, self.target])?;
        let mut gx = Tensor::zeros(&[n, c, l]);
        for row in 0..n * c {
            for i in 0..self.target {
                let (a, b) = bin(i, l, self.target);
                let g = gy.data()[row * self.target + i] / T::of((b - a) as f64);
                for v in &mut gx.data_mut()[row * l + a..row * l + b] {
                    *v += g;
                }
            }
        }
        Ok(gx)
    }
}

/// Single-example form over `[C, L]`.
pub fn adaptive_avg_pool<T: Scalar>(input: &Tensor<T>, target: usize) -> Result<Tensor<T>> {
    if input.rank() != 2 {
        return Err(Error::dim("adaptive pool", "input rank", 2, input.rank()));
    }
    AdaptiveAvgPool::new(target)?
        .infer(&input.clone().unsqueeze0())?
        .squeeze0()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_stays_constant() {
        let x = Tensor::<f64>::full(&[3, 10], 1.75);
        for target in [1, 3, 7, 10] {
            let y = adaptive_avg_pool(&x, target).unwrap();
            assert!(y.data().iter().all(|&v| (v - 1.75).abs() < 1e-12));
        }
    }

    #[test]
    fn bins_average_by_hand() {
        let x = Tensor::<f64>::from_vec(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = adaptive_avg_pool(&x, 2).unwrap();
        assert_eq!(y.data(), &[1.5, 3.5]);
    }

    #[test]
    fn target_one_gives_channel_means() {
        let x = Tensor::<f64>::from_fn(&[256, 8], |i| i as f64);
        let y = adaptive_avg_pool(&x, 1).unwrap();
        assert_eq!(y.shape(), &[256, 1]);
        for c in 0..256 {
            let want = (0..8).map(|j| (c * 8 + j) as f64).sum::<f64>() / 8.0;
            assert_eq!(y.data()[c], want);
        }
    }

    #[test]
    fn oversized_target_is_rejected() {
        let x = Tensor::<f32>::zeros(&[2, 3]);
        assert!(matches!(adaptive_avg_pool(&x, 4), Err(Error::Config(_))));
    }
}

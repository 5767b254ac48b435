use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Sinusoidal timestep embedding: `dim/2` sines then `dim/2` cosines of
/// `t·ω_j`, with `ω_j` geometric from 1 down to 1/10000.
pub fn time_embedding<T: Scalar>(t: usize, dim: usize) -> Result<Tensor<T>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Config(format!("time embedding dimension must be even and positive, got {dim}")));
    }
    let half = dim / 2;
    let mut out = vec![T::zero(); dim];
    for j in 0..half {
        let freq = if half == 1 {
            1.0
        } else {
            10000f64.powf(-(j as f64) / (half - 1) as f64)
        };
        let arg = t as f64 * freq;
        out[j] = T::of(arg.sin());
        out[half + j] = T::of(arg.cos());
    }
    Tensor::from_vec(&[dim], out)
}

/// Row-stacked embeddings for a batch of timesteps, `[B, dim]`.
pub fn time_embedding_batch<T: Scalar>(ts: &[usize], dim: usize) -> Result<Tensor<T>> {
    let rows = ts
        .iter()
        .map(|&t| time_embedding(t, dim))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack(&rows)
}

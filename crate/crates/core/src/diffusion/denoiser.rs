//! Time-conditioned 1-D U-Net predicting `x̂₀` from `(x_t, t)`.
//!
//! Full resolution uses the model's kernel size `k`; the half- and
//! quarter-resolution levels use `k/2` and `k/4` (rounded to odd) so each
//! level spans roughly the same stretch of signal time.
//!
//! ```text
//! x_t ─ in0(k) ─+temb─ mid0(k) ───────────────────────────── skip0 ─┐
//!                       └ down1(3,s2) ─+temb─ mid1(k/2) ─ skip1 ─┐   │
//!                                  └ down2(3,s2) ─+temb─ bottleneck(k/4)
//!                                   up ─ cat(skip1) ─ dec1(k/2) ─┘   │
//!                                             up ─ cat(skip0) ─ dec0(k) ─ out(1) ─ x̂₀
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::block::{add_channel_offset, check_finite, scaled_kernel, sum_over_length};
use crate::nn::embed::time_embedding_batch;
use crate::nn::loss::l1_loss;
use crate::nn::{join, Conv1d, ConvBlock, Linear, Module, Param, Upsample};
use crate::tensor::{concat_channels, split_channels, Scalar, Tensor};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub channels: usize,
    pub kernel_size: usize,
    pub widths: [usize; 3],
    pub groups: usize,
    pub time_dim: usize,
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel size {} must be odd", self.kernel_size)));
        }
        if self.channels == 0 {
            return Err(Error::Config("denoiser needs at least one channel".into()));
        }
        for w in self.widths {
            if w == 0 || w % self.groups != 0 {
                return Err(Error::Config(format!(
                    "denoiser width {w} not divisible by {} groups",
                    self.groups
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Denoiser<T = f32> {
    cfg: DenoiserConfig,
    in0: ConvBlock<T>,
    temb0: Linear<T>,
    mid0: ConvBlock<T>,
    down1: ConvBlock<T>,
    temb1: Linear<T>,
    mid1: ConvBlock<T>,
    down2: ConvBlock<T>,
    temb2: Linear<T>,
    bottleneck: ConvBlock<T>,
    up1: Upsample,
    dec1: ConvBlock<T>,
    up0: Upsample,
    dec0: ConvBlock<T>,
    out: Conv1d<T>,
}

const MODEL: &str = "denoiser";

impl<T: Scalar> Denoiser<T> {
    pub fn new<R: Rng + ?Sized>(cfg: DenoiserConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let [w0, w1, w2] = cfg.widths;
        let (c, k, g, td) = (cfg.channels, cfg.kernel_size, cfg.groups, cfg.time_dim);
        let (k1, k2) = (scaled_kernel(k, 2), scaled_kernel(k, 4));
        Ok(Self {
            in0: ConvBlock::new(c, w0, k, 1, g, rng)?,
            temb0: Linear::new(td, w0, rng),
            mid0: ConvBlock::new(w0, w0, k, 1, g, rng)?,
            down1: ConvBlock::new(w0, w1, 3, 2, g, rng)?,
            temb1: Linear::new(td, w1, rng),
            mid1: ConvBlock::new(w1, w1, k1, 1, g, rng)?,
            down2: ConvBlock::new(w1, w2, 3, 2, g, rng)?,
            temb2: Linear::new(td, w2, rng),
            bottleneck: ConvBlock::new(w2, w2, k2, 1, g, rng)?,
            up1: Upsample::new(1),
            dec1: ConvBlock::new(w2 + w1, w1, k1, 1, g, rng)?,
            up0: Upsample::new(1),
            dec0: ConvBlock::new(w1 + w0, w0, k, 1, g, rng)?,
            out: Conv1d::new(w0, c, 1, 1, rng)?,
            cfg,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.cfg
    }

    pub fn kernel_size(&self) -> usize {
        self.cfg.kernel_size
    }

    fn check_input(&self, x: &Tensor<T>, ts: &[usize]) -> Result<()> {
        if x.rank() != 3 {
            return Err(Error::dim(MODEL, "input rank", 3, x.rank()));
        }
        if x.dim(1) != self.cfg.channels {
            return Err(Error::dim(MODEL, "channels", self.cfg.channels, x.dim(1)));
        }
        if ts.len() != x.dim(0) {
            return Err(Error::dim(MODEL, "timesteps per batch", x.dim(0), ts.len()));
        }
        Ok(())
    }

    /// Training forward pass over `[B, C, L]` with per-example timesteps.
    pub fn forward(&mut self, x: &Tensor<T>, ts: &[usize]) -> Result<Tensor<T>> {
        self.check_input(x, ts)?;
        let e = time_embedding_batch::<T>(ts, self.cfg.time_dim)?;
        let mut h = self.in0.forward(x)?;
        add_channel_offset(&mut h, &self.temb0.forward(&e)?)?;
        check_finite(&h, MODEL, 0, "in0")?;
        let s0 = self.mid0.forward(&h)?;
        check_finite(&s0, MODEL, 1, "mid0")?;
        let mut h = self.down1.forward(&s0)?;
        add_channel_offset(&mut h, &self.temb1.forward(&e)?)?;
        check_finite(&h, MODEL, 2, "down1")?;
        let s1 = self.mid1.forward(&h)?;
        check_finite(&s1, MODEL, 3, "mid1")?;
        let mut h = self.down2.forward(&s1)?;
        add_channel_offset(&mut h, &self.temb2.forward(&e)?)?;
        check_finite(&h, MODEL, 4, "down2")?;
        let m = self.bottleneck.forward(&h)?;
        check_finite(&m, MODEL, 5, "bottleneck")?;
        self.up1 = Upsample::new(s1.dim(2));
        let u = self.up1.forward(&m)?;
        let d1 = self.dec1.forward(&concat_channels(&u, &s1)?)?;
        check_finite(&d1, MODEL, 6, "dec1")?;
        self.up0 = Upsample::new(s0.dim(2));
        let u = self.up0.forward(&d1)?;
        let d0 = self.dec0.forward(&concat_channels(&u, &s0)?)?;
        check_finite(&d0, MODEL, 7, "dec0")?;
        let y = self.out.forward(&d0)?;
        check_finite(&y, MODEL, 8, "out")?;
        Ok(y)
    }

    /// Inference pass; leaves no caches behind and takes `&self`.
    pub fn predict(&self, x: &Tensor<T>, ts: &[usize]) -> Result<Tensor<T>> {
        self.check_input(x, ts)?;
        let e = time_embedding_batch::<T>(ts, self.cfg.time_dim)?;
        let mut h = self.in0.infer(x)?;
        add_channel_offset(&mut h, &self.temb0.infer(&e)?)?;
        check_finite(&h, MODEL, 0, "in0")?;
        let s0 = self.mid0.infer(&h)?;
        check_finite(&s0, MODEL, 1, "mid0")?;
        let mut h = self.down1.infer(&s0)?;
        add_channel_offset(&mut h, &self.temb1.infer(&e)?)?;
        check_finite(&h, MODEL, 2, "down1")?;
        let s1 = self.mid1.infer(&h)?;
        check_finite(&s1, MODEL, 3, "mid1")?;
        let mut h = self.down2.infer(&s1)?;
        add_channel_offset(&mut h, &self.temb2.infer(&e)?)?;
        check_finite(&h, MODEL, 4, "down2")?;
        let m = self.bottleneck.infer(&h)?;
        check_finite(&m, MODEL, 5, "bottleneck")?;
        let u = Upsample::new(s1.dim(2)).infer(&m)?;
        let d1 = self.dec1.infer(&concat_channels(&u, &s1)?)?;
        check_finite(&d1, MODEL, 6, "dec1")?;
        let u = Upsample::new(s0.dim(2)).infer(&d1)?;
        let d0 = self.dec0.infer(&concat_channels(&u, &s0)?)?;
        check_finite(&d0, MODEL, 7, "dec0")?;
        let y = self.out.infer(&d0)?;
        check_finite(&y, MODEL, 8, "out")?;
        Ok(y)
    }

    /// Backpropagates `∂L/∂x̂₀`, accumulating parameter gradients. Returns
    /// the gradient with respect to the noisy input.
    pub fn backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let [w0, w1, _] = self.cfg.widths;
        let g = self.out.backward(gy)?;
        let g = self.dec0.backward(&g)?;
        let (gu, mut g_s0) = split_channels(&g, g.dim(1) - w0);
        let g = self.up0.backward(&gu)?;
        let g = self.dec1.backward(&g)?;
        let (gu, mut g_s1) = split_channels(&g, g.dim(1) - w1);
        let g = self.up1.backward(&gu)?;
        let g = self.bottleneck.backward(&g)?;
        self.temb2.backward(&sum_over_length(&g))?;
        g_s1.add_assign(&self.down2.backward(&g)?)?;
        let g = self.mid1.backward(&g_s1)?;
        self.temb1.backward(&sum_over_length(&g))?;
        g_s0.add_assign(&self.down1.backward(&g)?)?;
        let g = self.mid0.backward(&g_s0)?;
        self.temb0.backward(&sum_over_length(&g))?;
        self.in0.backward(&g)
    }
}

impl<T: Scalar> Module<T> for Denoiser<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.in0.visit(&join(prefix, "in0"), f);
        self.temb0.visit(&join(prefix, "temb0"), f);
        self.mid0.visit(&join(prefix, "mid0"), f);
        self.down1.visit(&join(prefix, "down1"), f);
        self.temb1.visit(&join(prefix, "temb1"), f);
        self.mid1.visit(&join(prefix, "mid1"), f);
        self.down2.visit(&join(prefix, "down2"), f);
        self.temb2.visit(&join(prefix, "temb2"), f);
        self.bottleneck.visit(&join(prefix, "bottleneck"), f);
        self.dec1.visit(&join(prefix, "dec1"), f);
        self.dec0.visit(&join(prefix, "dec0"), f);
        self.out.visit(&join(prefix, "out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.in0.visit_mut(&join(prefix, "in0"), f);
        self.temb0.visit_mut(&join(prefix, "temb0"), f);
        self.mid0.visit_mut(&join(prefix, "mid0"), f);
        self.down1.visit_mut(&join(prefix, "down1"), f);
        self.temb1.visit_mut(&join(prefix, "temb1"), f);
        self.mid1.visit_mut(&join(prefix, "mid1"), f);
        self.down2.visit_mut(&join(prefix, "down2"), f);
        self.temb2.visit_mut(&join(prefix, "temb2"), f);
        self.bottleneck.visit_mut(&join(prefix, "bottleneck"), f);
        self.dec1.visit_mut(&join(prefix, "dec1"), f);
        self.dec0.visit_mut(&join(prefix, "dec0"), f);
        self.out.visit_mut(&join(prefix, "out"), f);
    }
}

/// Single-example prediction over `[C, L]`.
pub fn denoise_predict<T: Scalar>(model: &Denoiser<T>, x_t: &Tensor<T>, t: usize) -> Result<Tensor<T>> {
    model.predict(&x_t.clone().unsqueeze0(), &[t])?.squeeze0()
}

/// Mean absolute error between the predicted and the clean signal.
pub fn ddpm_loss<T: Scalar>(x0_hat: &Tensor<T>, x0: &Tensor<T>) -> Result<T> {
    Ok(l1_loss(x0_hat, x0)?.0)
}

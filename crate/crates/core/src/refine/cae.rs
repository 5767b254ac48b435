//! Conditional autoencoder. The encoder sees the noisy epoch; the decoder
//! reconstructs the clean epoch from the encoder features plus a condition
//! stem that ingests the denoiser's estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::silu;
use crate::nn::block::check_finite;
use crate::nn::{join, Conv1d, ConvBlock, Module, Param, Silu, Upsample};
use crate::tensor::{concat_channels, split_channels, Scalar, Tensor};

/// Channel count of the encoder's final feature map.
pub const LATENT_CHANNELS: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaeConfig {
    pub channels: usize,
    pub kernel_size: usize,
    pub widths: [usize; 2],
    pub cond_channels: usize,
    pub groups: usize,
}

impl CaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!("kernel size {} must be odd", self.kernel_size)));
        }
        if self.channels == 0 || self.cond_channels == 0 {
            return Err(Error::Config("autoencoder channel counts must be positive".into()));
        }
        for w in [self.widths[0], self.widths[1], LATENT_CHANNELS] {
            if w == 0 || w % self.groups != 0 {
                return Err(Error::Config(format!(
                    "autoencoder width {w} not divisible by {} groups",
                    self.groups
                )));
            }
        }
        Ok(())
    }
}

/// Two `conv3 → SiLU` layers without normalization, so zeroed weights give a
/// constant (zero) output.
#[derive(Clone, Debug)]
pub struct ConditionStem<T = f32> {
    conv0: Conv1d<T>,
    act0: Silu<T>,
    conv1: Conv1d<T>,
    act1: Silu<T>,
}

impl<T: Scalar> ConditionStem<T> {
    fn new<R: Rng + ?Sized>(c: usize, cc: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            conv0: Conv1d::new(c, cc, 3, 1, rng)?,
            act0: Silu::new(),
            conv1: Conv1d::new(cc, cc, 3, 1, rng)?,
            act1: Silu::new(),
        })
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.conv0.forward(x)?;
        let h = self.act0.forward(&h);
        let h = self.conv1.forward(&h)?;
        Ok(self.act1.forward(&h))
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = silu(&self.conv0.infer(x)?);
        Ok(silu(&self.conv1.infer(&h)?))
    }

    fn backward(&mut self, gy: &Tensor<T>) -> Result<()> {
        let g = self.act1.backward(gy)?;
        let g = self.conv1.backward(&g)?;
        let g = self.act0.backward(&g)?;
        self.conv0.backward(&g)?;
        Ok(())
    }
}

impl<T: Scalar> Module<T> for ConditionStem<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.conv0.visit(&join(prefix, "conv0"), f);
        self.conv1.visit(&join(prefix, "conv1"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.conv0.visit_mut(&join(prefix, "conv0"), f);
        self.conv1.visit_mut(&join(prefix, "conv1"), f);
    }
}

#[derive(Clone, Debug)]
pub struct ConditionalAutoencoder<T = f32> {
    cfg: CaeConfig,
    enc0: ConvBlock<T>,
    enc1: ConvBlock<T>,
    enc2: ConvBlock<T>,
    dec0: ConvBlock<T>,
    up1: Upsample,
    dec1: ConvBlock<T>,
    up0: Upsample,
    dec2: ConvBlock<T>,
    stem: ConditionStem<T>,
    fuse: ConvBlock<T>,
    out: Conv1d<T>,
    lens: Option<(usize, usize)>,
}

const ENCODER: &str = "cae encoder";
const DECODER: &str = "cae decoder";

impl<T: Scalar> ConditionalAutoencoder<T> {
    pub fn new<R: Rng + ?Sized>(cfg: CaeConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let [w0, w1] = cfg.widths;
        let (c, k, g, cc) = (cfg.channels, cfg.kernel_size, cfg.groups, cfg.cond_channels);
        Ok(Self {
            enc0: ConvBlock::new(c, w0, k, 1, g, rng)?,
            enc1: ConvBlock::new(w0, w1, 3, 2, g, rng)?,
            enc2: ConvBlock::new(w1, LATENT_CHANNELS, 3, 2, g, rng)?,
            dec0: ConvBlock::new(LATENT_CHANNELS, w1, 1, 1, g, rng)?,
            up1: Upsample::new(1),
            dec1: ConvBlock::new(w1, w1, 3, 1, g, rng)?,
            up0: Upsample::new(1),
            dec2: ConvBlock::new(w1, w0, 3, 1, g, rng)?,
            stem: ConditionStem::new(c, cc, rng)?,
            fuse: ConvBlock::new(w0 + cc, w0, 3, 1, g, rng)?,
            out: Conv1d::new(w0, c, 1, 1, rng)?,
            lens: None,
            cfg,
        })
    }

    pub fn config(&self) -> &CaeConfig {
        &self.cfg
    }

    fn check_input(&self, x: &Tensor<T>, what: &'static str) -> Result<()> {
        if x.rank() != 3 {
            return Err(Error::dim(what, "input rank", 3, x.rank()));
        }
        if x.dim(1) != self.cfg.channels {
            return Err(Error::dim(what, "channels", self.cfg.channels, x.dim(1)));
        }
        Ok(())
    }

    /// `[B, C, L] → [B, 256, L']` with `L'` from two stride-2 stages.
    pub fn encode(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, ENCODER)?;
        let h0 = self.enc0.forward(x)?;
        check_finite(&h0, ENCODER, 0, "enc0")?;
        let h1 = self.enc1.forward(&h0)?;
        check_finite(&h1, ENCODER, 1, "enc1")?;
        let z = self.enc2.forward(&h1)?;
        check_finite(&z, ENCODER, 2, "enc2")?;
        self.lens = Some((x.dim(2), h1.dim(2)));
        Ok(z)
    }

    pub fn encode_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, ENCODER)?;
        let h = self.enc0.infer(x)?;
        check_finite(&h, ENCODER, 0, "enc0")?;
        let h = self.enc1.infer(&h)?;
        check_finite(&h, ENCODER, 1, "enc1")?;
        let z = self.enc2.infer(&h)?;
        check_finite(&z, ENCODER, 2, "enc2")?;
        Ok(z)
    }

    /// Reconstructs `[B, C, L]` from encoder features and the condition `x̂₀`.
    pub fn decode(&mut self, features: &Tensor<T>, x0_hat: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x0_hat, DECODER)?;
        let (l, l_half) = self.decode_lens(features, x0_hat)?;
        let h = self.dec0.forward(features)?;
        check_finite(&h, DECODER, 0, "dec0")?;
        self.up1 = Upsample::new(l_half);
        let h = self.dec1.forward(&self.up1.forward(&h)?)?;
        check_finite(&h, DECODER, 1, "dec1")?;
        self.up0 = Upsample::new(l);
        let h = self.dec2.forward(&self.up0.forward(&h)?)?;
        check_finite(&h, DECODER, 2, "dec2")?;
        let s = self.stem.forward(x0_hat)?;
        check_finite(&s, DECODER, 3, "stem")?;
        let h = self.fuse.forward(&concat_channels(&h, &s)?)?;
        check_finite(&h, DECODER, 4, "fuse")?;
        let y = self.out.forward(&h)?;
        check_finite(&y, DECODER, 5, "out")?;
        Ok(y)
    }

    pub fn decode_infer(&self, features: &Tensor<T>, x0_hat: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x0_hat, DECODER)?;
        let (l, l_half) = self.decode_lens(features, x0_hat)?;
        let h = self.dec0.infer(features)?;
        let h = self.dec1.infer(&Upsample::new(l_half).infer(&h)?)?;
        let h = self.dec2.infer(&Upsample::new(l).infer(&h)?)?;
        let s = self.stem.infer(x0_hat)?;
        let h = self.fuse.infer(&concat_channels(&h, &s)?)?;
        let y = self.out.infer(&h)?;
        check_finite(&y, DECODER, 5, "out")?;
        Ok(y)
    }

    fn decode_lens(&self, features: &Tensor<T>, x0_hat: &Tensor<T>) -> Result<(usize, usize)> {
        if features.rank() != 3 {
            return Err(Error::dim(DECODER, "feature rank", 3, features.rank()));
        }
        if features.dim(1) != LATENT_CHANNELS {
            return Err(Error::dim(DECODER, "feature channels", LATENT_CHANNELS, features.dim(1)));
        }
        if features.dim(0) != x0_hat.dim(0) {
            return Err(Error::dim(DECODER, "batch", features.dim(0), x0_hat.dim(0)));
        }
        let l = x0_hat.dim(2);
        let half = (l - 1) / 2 + 1;
        let quarter = (half - 1) / 2 + 1;
        if features.dim(2) != quarter {
            return Err(Error::dim(DECODER, "feature length", quarter, features.dim(2)));
        }
        Ok((l, half))
    }

    /// Backward through the decoder. Returns the gradient with respect to the
    /// encoder features; the condition input is treated as a constant.
    pub fn decode_backward(&mut self, gy: &Tensor<T>) -> Result<Tensor<T>> {
        let w0 = self.cfg.widths[0];
        let g = self.out.backward(gy)?;
        let g = self.fuse.backward(&g)?;
        let (gh, gs) = split_channels(&g, w0);
        self.stem.backward(&gs)?;
        let g = self.dec2.backward(&gh)?;
        let g = self.up0.backward(&g)?;
        let g = self.dec1.backward(&g)?;
        let g = self.up1.backward(&g)?;
        self.dec0.backward(&g)
    }

    /// Backward through the encoder, returning the input gradient.
    pub fn encode_backward(&mut self, gz: &Tensor<T>) -> Result<Tensor<T>> {
        if self.lens.take().is_none() {
            return Err(Error::Usage("encoder backward without forward".into()));
        }
        let g = self.enc2.backward(gz)?;
        let g = self.enc1.backward(&g)?;
        self.enc0.backward(&g)
    }

    /// Zeroes the condition stem's weights and biases, making the decoder
    /// output independent of `x̂₀`.
    pub fn zero_condition_stem(&mut self) {
        self.stem.visit_mut("", &mut |_, p| p.value.fill(T::zero()));
    }

    pub fn condition_stem(&self) -> &ConditionStem<T> {
        &self.stem
    }
}

impl<T: Scalar> Module<T> for ConditionalAutoencoder<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.enc0.visit(&join(prefix, "enc0"), f);
        self.enc1.visit(&join(prefix, "enc1"), f);
        self.enc2.visit(&join(prefix, "enc2"), f);
        self.dec0.visit(&join(prefix, "dec0"), f);
        self.dec1.visit(&join(prefix, "dec1"), f);
        self.dec2.visit(&join(prefix, "dec2"), f);
        self.stem.visit(&join(prefix, "stem"), f);
        self.fuse.visit(&join(prefix, "fuse"), f);
        self.out.visit(&join(prefix, "out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.enc0.visit_mut(&join(prefix, "enc0"), f);
        self.enc1.visit_mut(&join(prefix, "enc1"), f);
        self.enc2.visit_mut(&join(prefix, "enc2"), f);
        self.dec0.visit_mut(&join(prefix, "dec0"), f);
        self.dec1.visit_mut(&join(prefix, "dec1"), f);
        self.dec2.visit_mut(&join(prefix, "dec2"), f);
        self.stem.visit_mut(&join(prefix, "stem"), f);
        self.fuse.visit_mut(&join(prefix, "fuse"), f);
        self.out.visit_mut(&join(prefix, "out"), f);
    }
}

/// Single-example encode over `[C, L]`.
pub fn cae_encode<T: Scalar>(cae: &ConditionalAutoencoder<T>, x_t: &Tensor<T>) -> Result<Tensor<T>> {
    cae.encode_infer(&x_t.clone().unsqueeze0())?.squeeze0()
}

/// Single-example decode: features `[256, L']`, condition `[C, L]`.
pub fn cae_decode<T: Scalar>(
    cae: &ConditionalAutoencoder<T>,
    features: &Tensor<T>,
    x0_hat: &Tensor<T>,
) -> Result<Tensor<T>> {
    cae.decode_infer(&features.clone().unsqueeze0(), &x0_hat.clone().unsqueeze0())?
        .squeeze0()
}

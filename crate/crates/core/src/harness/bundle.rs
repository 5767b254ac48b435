//! One ensemble member's parameters and the input standardization it was
//! trained with, stored as an NDC1 container.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::variant::Variant;
use crate::data::ndc1::Container;
use crate::diffusion::{Denoiser, DenoiserConfig};
use crate::error::{Error, Result};
use crate::nn::Module;
use crate::refine::{CaeConfig, RefineModel};
use crate::tensor::Tensor;

/// Per-channel standardization estimated on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Normalizer {
    pub fn fit(epochs: &Tensor<f32>) -> Self {
        let (n, c, l) = (epochs.dim(0), epochs.dim(1), epochs.dim(2));
        let mut mean = vec![0.0; c];
        let mut std = vec![0.0; c];
        for ch in 0..c {
            let (mut s, mut s2) = (0.0f64, 0.0f64);
            for i in 0..n {
                for &v in &epochs.item(i)[ch * l..(ch + 1) * l] {
                    s += v as f64;
                    s2 += (v as f64) * (v as f64);
                }
            }
            let m = s / (n * l) as f64;
            let var = (s2 / (n * l) as f64 - m * m).max(0.0);
            mean[ch] = m as f32;
            std[ch] = var.sqrt().max(1e-6) as f32;
        }
        Self { mean, std }
    }

    pub fn apply(&self, epochs: &Tensor<f32>) -> Result<Tensor<f32>> {
        let c = epochs.dim(1);
        if c != self.mean.len() {
            return Err(Error::dim("normalizer", "channels", self.mean.len(), c));
        }
        let l = epochs.dim(2);
        let mut out = epochs.clone();
        for (j, v) in out.data_mut().iter_mut().enumerate() {
            let ch = (j / l) % c;
            *v = (*v - self.mean[ch]) / self.std[ch];
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub kernel_size: usize,
    pub variant: Variant,
    pub num_classes: usize,
    pub denoiser: Denoiser<f32>,
    pub refine: RefineModel<f32>,
    pub normalizer: Normalizer,
}

impl ModelBundle {
    pub fn new(
        den_cfg: DenoiserConfig,
        cae_cfg: CaeConfig,
        num_classes: usize,
        variant: Variant,
        normalizer: Normalizer,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let kernel_size = den_cfg.kernel_size;
        let denoiser = Denoiser::new(den_cfg, rng)?;
        let mut refine = RefineModel::new(cae_cfg, num_classes, rng)?;
        if variant != Variant::Full {
            refine.cae.zero_condition_stem();
        }
        Ok(Self {
            kernel_size,
            variant,
            num_classes,
            denoiser,
            refine,
            normalizer,
        })
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.set_meta("kind", "bundle");
        c.set_meta("kernel_size", self.kernel_size);
        c.set_meta("variant", self.variant);
        c.set_meta("num_classes", self.num_classes);
        c.set_meta("denoiser", serde_json::to_string(self.denoiser.config()).expect("serializable"));
        c.set_meta("cae", serde_json::to_string(self.refine.cae.config()).expect("serializable"));
        let n = self.normalizer.mean.len();
        c.put_f32("norm.mean", &Tensor::from_vec(&[n], self.normalizer.mean.clone()).expect("shape"));
        c.put_f32("norm.std", &Tensor::from_vec(&[n], self.normalizer.std.clone()).expect("shape"));
        self.denoiser.visit("denoiser", &mut |name, p| c.put_f32(name, &p.value));
        self.refine.visit("refine", &mut |name, p| c.put_f32(name, &p.value));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let kind = c.meta("kind")?;
        if kind != "bundle" {
            return Err(Error::Data(format!("container holds {kind:?}, expected a model bundle")));
        }
        let json = |key: &str| -> Result<serde_json::Value> {
            serde_json::from_str(c.meta(key)?).map_err(|e| Error::Data(format!("bad {key} metadata: {e}")))
        };
        let den_cfg: DenoiserConfig =
            serde_json::from_value(json("denoiser")?).map_err(|e| Error::Data(format!("denoiser config: {e}")))?;
        let cae_cfg: CaeConfig =
            serde_json::from_value(json("cae")?).map_err(|e| Error::Data(format!("cae config: {e}")))?;
        let variant: Variant = c.meta_parse("variant")?;
        let num_classes: usize = c.meta_parse("num_classes")?;
        let normalizer = Normalizer {
            mean: c.get_f32("norm.mean")?.into_data(),
            std: c.get_f32("norm.std")?.into_data(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = Self::new(den_cfg, cae_cfg, num_classes, variant, normalizer, &mut rng)
            .map_err(|e| Error::Data(format!("bundle describes an invalid model: {e}")))?;
        let mut err = None;
        let mut fill = |name: &str, p: &mut crate::nn::Param<f32>| {
            if err.is_some() {
                return;
            }
            match c.get_f32(name) {
                Ok(t) if t.shape() == p.value.shape() => p.value = t,
                Ok(t) => {
                    err = Some(Error::Data(format!(
                        "parameter {name} has shape {:?}, model expects {:?}",
                        t.shape(),
                        p.value.shape()
                    )))
                }
                Err(e) => err = Some(e),
            }
        };
        b.denoiser.visit_mut("denoiser", &mut fill);
        b.refine.visit_mut("refine", &mut fill);
        if let Some(e) = err {
            return Err(e);
        }
        if b.kernel_size != c.meta_parse::<usize>("kernel_size")? {
            return Err(Error::Data("kernel_size metadata disagrees with the denoiser".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

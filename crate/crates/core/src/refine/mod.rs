//! Refinement and classification: the conditional autoencoder, per-member
//! linear classifiers, ensemble averaging and the combined objective.

pub mod cae;
pub mod classifier;
pub mod ensemble;
pub mod loss;

pub use cae::{cae_decode, cae_encode, CaeConfig, ConditionalAutoencoder, LATENT_CHANNELS};
pub use classifier::{pool_and_classify, LinearClassifier};
pub use ensemble::{argmax, ensemble_average, predict_classes};
pub use loss::{cae_loss, classification_loss, one_hot, total_loss, LossWeights};

use rand::Rng;

use crate::error::Result;
use crate::nn::{join, Module, Param};
use crate::tensor::{Scalar, Tensor};

/// Autoencoder and classifier of one ensemble member, optimized together.
#[derive(Clone, Debug)]
pub struct RefineModel<T = f32> {
    pub cae: ConditionalAutoencoder<T>,
    pub classifier: LinearClassifier<T>,
}

/// Outputs of one joint forward pass.
pub struct RefineOutput<T> {
    pub reconstruction: Option<Tensor<T>>,
    pub scores: Tensor<T>,
}

impl<T: Scalar> RefineModel<T> {
    pub fn new<R: Rng + ?Sized>(cfg: CaeConfig, num_classes: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            cae: ConditionalAutoencoder::new(cfg, rng)?,
            classifier: LinearClassifier::new(num_classes, rng)?,
        })
    }

    /// Encodes `input`, classifies the pooled features and, when a condition
    /// is supplied, decodes a reconstruction.
    pub fn forward(&mut self, input: &Tensor<T>, condition: Option<&Tensor<T>>) -> Result<RefineOutput<T>> {
        let z = self.cae.encode(input)?;
        let scores = self.classifier.forward(&z)?;
        let reconstruction = match condition {
            Some(c) => Some(self.cae.decode(&z, c)?),
            None => None,
        };
        Ok(RefineOutput { reconstruction, scores })
    }

    pub fn backward(&mut self, g_recon: Option<&Tensor<T>>, g_scores: &Tensor<T>) -> Result<Tensor<T>> {
        let mut gz = self.classifier.backward(g_scores)?;
        if let Some(g) = g_recon {
            gz.add_assign(&self.cae.decode_backward(g)?)?;
        }
        self.cae.encode_backward(&gz)
    }

    pub fn scores(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.classifier.infer(&self.cae.encode_infer(input)?)
    }
}

impl<T: Scalar> Module<T> for RefineModel<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.cae.visit(&join(prefix, "cae"), f);
        self.classifier.visit(&join(prefix, "classifier"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.cae.visit_mut(&join(prefix, "cae"), f);
        self.classifier.visit_mut(&join(prefix, "classifier"), f);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{l1_loss, mse_loss};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.1 }
    }
}

/// Mean absolute reconstruction error.
pub fn cae_loss<T: Scalar>(x0: &Tensor<T>, reconstruction: &Tensor<T>) -> Result<T> {
    Ok(l1_loss(reconstruction, x0)?.0)
}

/// Checks every row of a `[K]` or `[B, K]` target is a one-hot vector.
pub fn validate_one_hot<T: Scalar>(y: &Tensor<T>) -> Result<()> {
    let k = *y.shape().last().unwrap_or(&0);
    if k == 0 {
        return Err(Error::Usage("empty one-hot target".into()));
    }
    for (row, chunk) in y.data().chunks(k).enumerate() {
        let ones = chunk.iter().filter(|&&v| v == T::one()).count();
        let zeros = chunk.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != k {
            return Err(Error::Usage(format!("target row {row} is not one-hot")));
        }
    }
    Ok(())
}

/// `[B, K]` one-hot targets.
pub fn one_hot<T: Scalar>(labels: &[usize], num_classes: usize) -> Result<Tensor<T>> {
    let mut y = Tensor::zeros(&[labels.len(), num_classes]);
    for (i, &c) in labels.iter().enumerate() {
        if c >= num_classes {
            return Err(Error::Data(format!("label {c} outside 0..{num_classes}")));
        }
        y.data_mut()[i * num_classes + c] = T::one();
    }
    Ok(y)
}

/// Mean squared error between raw scores and the one-hot target.
pub fn classification_loss<T: Scalar>(y_hat: &Tensor<T>, y_onehot: &Tensor<T>) -> Result<T> {
    Ok(classification_loss_grad(y_hat, y_onehot)?.0)
}

pub fn classification_loss_grad<T: Scalar>(y_hat: &Tensor<T>, y_onehot: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    validate_one_hot(y_onehot)?;
    mse_loss(y_hat, y_onehot)
}

/// `Σ_k (L_CAE^(k) + α·L_clf^(k))`.
pub fn total_loss(cae_losses: &[f64], clf_losses: &[f64], weights: LossWeights) -> Result<f64> {
    if cae_losses.len() != clf_losses.len() {
        return Err(Error::dim("total loss", "ensemble members", cae_losses.len(), clf_losses.len()));
    }
    if weights.alpha < 0.0 || !weights.alpha.is_finite() {
        return Err(Error::Config(format!("loss weight alpha {} must be >= 0", weights.alpha)));
    }
    let mut total = 0.0;
    for (k, (&r, &c)) in cae_losses.iter().zip(clf_losses).enumerate() {
        if r < 0.0 || c < 0.0 || !r.is_finite() || !c.is_finite() {
            return Err(Error::Internal(format!(
                "member {k} reported invalid component losses (cae {r}, clf {c})"
            )));
        }
        total += r + weights.alpha * c;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_closed_form() {
        let k = 13;
        let y_hat = Tensor::full(&[k], 1.0 / k as f64);
        let y = one_hot::<f64>(&[4], k).unwrap().reshape(&[k]).unwrap();
        let kf = k as f64;
        let expect = ((1.0 - 1.0 / kf).powi(2) + 12.0 * (1.0 / kf).powi(2)) / kf;
        assert!((classification_loss(&y_hat, &y).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn doubling_error_quadruples_loss() {
        let y = one_hot::<f64>(&[1], 3).unwrap();
        let e = [0.3, -0.2, 0.5];
        let a = Tensor::from_fn(&[1, 3], |i| y.data()[i] + e[i]);
        let b = Tensor::from_fn(&[1, 3], |i| y.data()[i] + 2.0 * e[i]);
        let (la, lb) = (classification_loss(&a, &y).unwrap(), classification_loss(&b, &y).unwrap());
        assert!((lb - 4.0 * la).abs() < 1e-14);
    }

    #[test]
    fn malformed_one_hot_is_rejected() {
        let bad = Tensor::from_vec(&[3], vec![1.0, 1.0, 0.0]).unwrap();
        let y_hat = Tensor::zeros(&[3]);
        assert!(matches!(classification_loss::<f64>(&y_hat, &bad), Err(Error::Usage(_))));
        let bad = Tensor::from_vec(&[2], vec![0.5, 0.5]).unwrap();
        assert!(matches!(classification_loss::<f64>(&Tensor::zeros(&[2]), &bad), Err(Error::Usage(_))));
    }

    #[test]
    fn total_loss_cases() {
        let w = LossWeights::default();
        assert_eq!(w.alpha, 0.1);
        assert_eq!(total_loss(&[0.0; 3], &[0.0; 3], w).unwrap(), 0.0);
        assert!((total_loss(&[1.0; 3], &[2.0; 3], w).unwrap() - 3.6).abs() < 1e-12);
        assert_eq!(total_loss(&[1.0, 2.0, 3.0], &[5.0; 3], LossWeights { alpha: 0.0 }).unwrap(), 6.0);
        assert!(matches!(total_loss(&[1.0, -1.0, 0.0], &[0.0; 3], w), Err(Error::Internal(_))));
    }

    #[test]
    fn cae_loss_offsets() {
        let x = Tensor::from_fn(&[2, 5], |i| i as f64);
        assert_eq!(cae_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(cae_loss(&x, &x.map(|v| v + 1.0)).unwrap(), 1.0);
    }
}

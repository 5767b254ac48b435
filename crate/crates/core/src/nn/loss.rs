use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn check(op: &'static str, pred: &Tensor<impl Scalar>, target: &Tensor<impl Scalar>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(op, "shape (element count)", target.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::dim(op, "element count", 1, 0));
    }
    Ok(())
}

/// Mean absolute error and its gradient with respect to `pred`.
/// At exact ties the subgradient 0 is used.
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    check("l1 loss", pred, target)?;
    let n = T::of(pred.len() as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &y) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - y;
        loss += d.abs();
        *g = if d > T::zero() {
            T::one() / n
        } else if d < T::zero() {
            -T::one() / n
        } else {
            T::zero()
        };
    }
    Ok((loss / n, grad))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    check("mse loss", pred, target)?;
    let n = T::of(pred.len() as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &y) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - y;
        loss += d * d;
        *g = T::of(2.0) * d / n;
    }
    Ok((loss / n, grad))
}

use crate::error::{NnError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check(pred: &Tensor<impl Scalar>, target: &Tensor<impl Scalar>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(NnError::dim(
            "mse",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    if pred.is_empty() {
        return Err(NnError::Config("mse of empty tensors".into()));
    }
    Ok(())
}

/// Mean over all elements of the squared difference.
pub fn mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    check(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p.as_f64() - t.as_f64()).powi(2))
        .sum();
    Ok(T::of(sum / pred.len() as f64))
}

/// Gradient of [`mse`] with respect to `pred`.
pub fn mse_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    check(pred, target)?;
    let scale = T::of(2.0 / pred.len() as f64);
    let g = pred.data().iter().zip(target.data()).map(|(&p, &t)| scale * (p - t)).collect();
    Tensor::from_vec(pred.shape(), g)
}

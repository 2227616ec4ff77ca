use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Residual MSE over a batch of `N` samples:
/// `loss = 1/(2N) * sum_i ||pred_i - target_i||^2`, `grad = (pred - target) / N`.
pub fn mse_residual_loss(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    pred.shape().expect_eq(&target.shape(), "mse_residual_loss")?;
    let n = pred.shape().n;
    if n == 0 {
        return Err(Error::Argument("loss needs at least one sample".into()));
    }
    let diff = pred.sub(target)?;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / (2.0 * n as f64);
    Ok((loss, diff.scale(1.0 / n as f64)))
}

//! Central finite differences, used as an independent oracle for the
//! analytic backward passes.

use crate::error::{Error, Result};

/// Magnitude below which [`relative_error`] switches to absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Gradient of `f` at `theta` by central differences with step `h`.
pub fn finite_difference_gradient<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("objective at coordinate {i}")));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// `|a - b| / max(|a|, |b|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(RELATIVE_ERROR_FLOOR);
    (a - b).abs() / scale
}

/// Largest relative error over paired slices, with its index.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(a, n);
        if e > worst.0 || e.is_nan() {
            worst = (e, i);
        }
    }
    worst
}

use crate::error::Result;
use crate::tensor::Tensor4;

/// Elementwise `max(0, x)`.
pub fn relu_forward(x: &Tensor4) -> Tensor4 {
    x.map(|v| v.max(0.0))
}

/// Masks `grad_out` by `x > 0`. The subgradient at exactly zero is zero.
pub fn relu_backward(grad_out: &Tensor4, x: &Tensor4) -> Result<Tensor4> {
    x.shape().expect_eq(&grad_out.shape(), "relu_backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor4::from_vec(x.shape(), data)
}

/// Elementwise sum. The backward pass routes the upstream gradient
/// unchanged to both addends.
pub fn add_elementwise(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    let mut out = a.clone();
    out.add_assign(b)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    fn row(v: &[f64]) -> Tensor4 {
        Tensor4::from_vec(Shape4::new(1, 1, 1, v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu_forward(&row(&[-1.0, 0.0, 2.5])).data(), &[0.0, 0.0, 2.5]);
        assert!(relu_forward(&row(&[-3.0, -0.1])).data().iter().all(|&v| v == 0.0));
        let pos = row(&[0.0, 1.0, 7.0]);
        assert_eq!(relu_forward(&pos), pos);
    }

    #[test]
    fn relu_backward_masks() {
        let g = row(&[5.0, 5.0, 5.0]);
        assert_eq!(relu_backward(&g, &row(&[-1.0, 0.0, 3.0])).unwrap().data(), &[0.0, 0.0, 5.0]);
        assert_eq!(relu_backward(&g, &row(&[1.0, 2.0, 3.0])).unwrap(), g);
        assert_eq!(relu_backward(&g, &row(&[-1.0, -2.0, -3.0])).unwrap().sum(), 0.0);
        assert!(relu_backward(&g, &row(&[1.0])).is_err());
    }

    #[test]
    fn add_examples() {
        let a = row(&[1.0, 2.0]);
        assert_eq!(add_elementwise(&a, &row(&[3.0, 4.0])).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(add_elementwise(&a, &row(&[0.0, 0.0])).unwrap(), a);
        assert_eq!(add_elementwise(&a, &a.scale(-1.0)).unwrap().sum(), 0.0);
        assert!(add_elementwise(&a, &row(&[1.0])).is_err());
    }
}

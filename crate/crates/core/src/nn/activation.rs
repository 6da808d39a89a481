use crate::error::Result;
use crate::tensor::Tensor;

/// Largest `f64` strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // keep the open interval even where exp() saturates
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}

/// Backward through a sigmoid, expressed in terms of its forward output.
pub fn sigmoid_backward(output: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    output.ensure_same_shape(upstream, "sigmoid backward")?;
    let data = output
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&y, &g)| g * y * (1.0 - y))
        .collect();
    Ok(Tensor::from_parts(output.shape().to_vec(), data))
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Subgradient at zero is zero. Works from either the pre-activation or the
/// activation itself since both share the sign pattern.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    input.ensure_same_shape(upstream, "relu backward")?;
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor::from_parts(input.shape().to_vec(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert!(sigmoid_scalar(-50.0) < 1e-6);
        assert!(sigmoid_scalar(-1e6) > 0.0);
        assert!(sigmoid_scalar(1e6) < 1.0);
        assert!((sigmoid_scalar(1.0) - 0.7310586).abs() < 1e-7);
    }

    #[test]
    fn relu_values() {
        let x = Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::full(&[4], -3.0);
        assert_eq!(relu(&neg), Tensor::zeros(&[4]));
        let g = relu_backward(&x, &Tensor::full(&[3], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }
}

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A fixed, ordered collection of learnable tensors. Gradients are carried
/// in a value of the same type so shapes always line up.
pub trait ParamSet {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;
}

impl ParamSet for Vec<Tensor> {
    fn tensors(&self) -> Vec<&Tensor> {
        self.iter().collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.iter_mut().collect()
    }
}

/// `p <- p - lr * g` for every parameter, returning the updated set.
pub fn sgd_step<P: ParamSet + Clone>(params: &P, grads: &P, learning_rate: f64) -> Result<P> {
    let mut next = params.clone();
    sgd_update(&mut next, grads, learning_rate)?;
    Ok(next)
}

/// In-place form of [`sgd_step`]. Leaves `params` untouched on error.
pub fn sgd_update<P: ParamSet>(params: &mut P, grads: &P, learning_rate: f64) -> Result<()> {
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::Param(format!(
            "learning rate must be finite and non-negative, got {learning_rate}"
        )));
    }
    let gs = grads.tensors();
    let ps = params.tensors();
    if gs.len() != ps.len() {
        return Err(Error::Shape(format!(
            "{} gradient tensors for {} parameters",
            gs.len(),
            ps.len()
        )));
    }
    for (i, (p, g)) in ps.iter().zip(&gs).enumerate() {
        p.ensure_same_shape(g, &format!("gradient {i}"))?;
        if !g.is_finite() {
            return Err(Error::Training(format!("non-finite gradient in tensor {i}")));
        }
    }
    for (p, g) in params.tensors_mut().into_iter().zip(gs) {
        for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= learning_rate * gv;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grads_and_zero_rate_are_identity() {
        let p = vec![Tensor::from_fn(&[3], |i| i as f64)];
        let z = vec![Tensor::zeros(&[3])];
        assert_eq!(sgd_step(&p, &z, 0.5).unwrap(), p);
        let g = vec![Tensor::full(&[3], 4.0)];
        assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);
    }

    #[test]
    fn unit_step() {
        let p = vec![Tensor::full(&[1], 1.0)];
        let g = vec![Tensor::full(&[1], 0.25)];
        assert_eq!(sgd_step(&p, &g, 1.0).unwrap()[0].data(), &[0.75]);
    }

    #[test]
    fn non_finite_gradient_is_a_training_error() {
        let p = vec![Tensor::full(&[2], 1.0)];
        let mut g = vec![Tensor::zeros(&[2])];
        g[0].data_mut()[1] = f64::INFINITY;
        assert!(matches!(sgd_step(&p, &g, 0.1), Err(Error::Training(_))));
    }
}

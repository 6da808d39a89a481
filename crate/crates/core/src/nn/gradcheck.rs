//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    avg_pool, avg_pool_backward, bilinear_resize, bilinear_resize_backward, conv2d_backward, conv2d_forward,
    mse_loss, relu, relu_backward, sigmoid, sigmoid_backward,
};
use crate::error::{Error, Result};
use crate::tensor::{concat_channels, split_channels, Tensor};

/// Below this magnitude gradients are compared in absolute terms.
pub const MAGNITUDE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Compares `analytic[i]` (gradient of `loss` w.r.t. `inputs[i]`) against
/// central differences of `loss` at every coordinate.
pub fn grad_check<F>(
    loss: F,
    inputs: &[Tensor],
    analytic: &[Tensor],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor]) -> f64,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Param(format!("epsilon must lie in (0, 1e-2], got {epsilon}")));
    }
    if inputs.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} analytic gradients",
            inputs.len(),
            analytic.len()
        )));
    }
    for (i, (x, g)) in inputs.iter().zip(analytic).enumerate() {
        x.ensure_same_shape(g, &format!("analytic gradient {i}"))?;
    }

    let mut report = GradCheckReport::default();
    let mut probe = inputs.to_vec();
    for (which, grad) in analytic.iter().enumerate() {
        for index in 0..grad.len() {
            let orig = probe[which].data()[index];
            probe[which].data_mut()[index] = orig + epsilon;
            let up = loss(&probe);
            probe[which].data_mut()[index] = orig - epsilon;
            let down = loss(&probe);
            probe[which].data_mut()[index] = orig;

            let numeric = (up - down) / (2.0 * epsilon);
            let a = grad.data()[index];
            let rel = relative_error(a, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel >= tolerance || !rel.is_finite() {
                report.failures.push(GradMismatch {
                    input: which,
                    index,
                    analytic: a,
                    numeric,
                    rel_error: rel,
                });
            }
        }
    }
    Ok(report)
}

/// Scalarises a tensor-valued function by a fixed projection so its
/// gradient can be checked: `L(x) = sum(u * f(x))`.
pub fn project(output: &Tensor, weights: &Tensor) -> f64 {
    output
        .data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| a * b)
        .sum()
}

/// Result of checking one layer over several random cases.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: &'static str,
    pub cases: usize,
    pub checked: usize,
    pub max_rel_error: f64,
    pub failures: usize,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Uniform on [-1, -0.05] ∪ [0.05, 1]: keeps ReLU inputs away from the kink.
fn off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(0.05..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Runs `cases` random gradient checks for each layer kernel:
/// conv2d (input, kernels, bias), relu, sigmoid, avg_pool, bilinear resize,
/// channel concat and the MSE loss. Inputs have magnitude ≤ 1.
pub fn layer_suite(cases: usize, seed: u64, epsilon: f64, tolerance: f64) -> Result<Vec<LayerCheck>> {
    type Case = fn(&mut ChaCha8Rng, f64, f64) -> Result<GradCheckReport>;
    let layers: [(&'static str, Case); 7] = [
        ("conv2d", conv_case),
        ("relu", relu_case),
        ("sigmoid", sigmoid_case),
        ("avg_pool", pool_case),
        ("bilinear_resize", resize_case),
        ("concat_channels", concat_case),
        ("mse_loss", mse_case),
    ];
    let mut out = Vec::new();
    for (k, (name, case)) in layers.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64 * 0x9E37_79B9));
        let mut check = LayerCheck {
            layer: name,
            cases,
            checked: 0,
            max_rel_error: 0.0,
            failures: 0,
        };
        for _ in 0..cases {
            let r = case(&mut rng, epsilon, tolerance)?;
            check.checked += r.checked;
            check.max_rel_error = check.max_rel_error.max(r.max_rel_error);
            check.failures += r.failures.len();
        }
        out.push(check);
    }
    Ok(out)
}

fn conv_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let c = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    let h = rng.gen_range(4..=7);
    let w = rng.gen_range(4..=7);
    let stride = rng.gen_range(1..=2);
    let padding = rng.gen_range(0..=1);
    let x = uniform(rng, &[c, h, w]);
    let kern = uniform(rng, &[k, c, 3, 3]);
    let bias = uniform(rng, &[k]);
    let out = conv2d_forward(&x, &kern, &bias, stride, padding)?;
    let u = uniform(rng, out.shape());
    let g = conv2d_backward(&x, &kern, &u, stride, padding)?;
    grad_check(
        |v| project(&conv2d_forward(&v[0], &v[1], &v[2], stride, padding).expect("shapes fixed"), &u),
        &[x, kern, bias],
        &[g.input, g.kernels, g.bias],
        eps,
        tol,
    )
}

fn relu_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let x = off_kink(rng, &[2, 5, 5]);
    let u = uniform(rng, x.shape());
    let g = relu_backward(&x, &u)?;
    grad_check(|v| project(&relu(&v[0]), &u), &[x], &[g], eps, tol)
}

fn sigmoid_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let x = uniform(rng, &[2, 5, 5]);
    let u = uniform(rng, x.shape());
    let g = sigmoid_backward(&sigmoid(&x), &u)?;
    grad_check(|v| project(&sigmoid(&v[0]), &u), &[x], &[g], eps, tol)
}

fn pool_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let kernel = rng.gen_range(1..=4);
    let stride = rng.gen_range(1..=kernel);
    let n = rng.gen_range(kernel..=kernel + 5);
    let x = uniform(rng, &[n, n]);
    let out = avg_pool(&x, kernel, stride)?;
    let u = uniform(rng, out.shape());
    let g = avg_pool_backward(x.shape(), &u, kernel, stride)?;
    grad_check(|v| project(&avg_pool(&v[0], kernel, stride).expect("shapes fixed"), &u), &[x], &[g], eps, tol)
}

fn resize_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let (h, w) = (rng.gen_range(2..=7), rng.gen_range(2..=7));
    let x = uniform(rng, &[2, h, w]);
    let (oh, ow) = (rng.gen_range(2..=10), rng.gen_range(2..=10));
    let u = uniform(rng, &[2, oh, ow]);
    let g = bilinear_resize_backward(x.shape(), &u)?;
    grad_check(|v| project(&bilinear_resize(&v[0], oh, ow).expect("shapes fixed"), &u), &[x], &[g], eps, tol)
}

fn concat_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let (ca, cb) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
    let a = uniform(rng, &[ca, 4, 3]);
    let b = uniform(rng, &[cb, 4, 3]);
    let u = uniform(rng, &[ca + cb, 4, 3]);
    let g = split_channels(&u, &[ca, cb])?;
    grad_check(
        |v| project(&concat_channels(&[&v[0], &v[1]]).expect("shapes fixed"), &u),
        &[a, b],
        &g,
        eps,
        tol,
    )
}

fn mse_case(rng: &mut ChaCha8Rng, eps: f64, tol: f64) -> Result<GradCheckReport> {
    let shape = [rng.gen_range(1..=6), rng.gen_range(1..=6)];
    let p = uniform(rng, &shape);
    let t = uniform(rng, &shape);
    let (_, g) = mse_loss(&p, &t)?;
    grad_check(|v| mse_loss(&v[0], &t).expect("shapes fixed").0, &[p], &[g], eps, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let w = Tensor::from_fn(&[6], |i| i as f64 - 2.5);
        let x = Tensor::from_fn(&[6], |i| 0.1 * i as f64);
        let report = grad_check(|xs| project(&xs[0], &w), &[x], &[w.clone()], 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_rel_error < 1e-6);
        assert_eq!(report.checked, 6);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let x = Tensor::from_fn(&[3], |i| i as f64);
        let wrong = Tensor::full(&[3], 5.0);
        let report = grad_check(|xs| xs[0].sum(), &[x], &[wrong], 1e-5, 1e-4).unwrap();
        assert_eq!(report.failures.len(), 3);
    }

    #[test]
    fn epsilon_out_of_range() {
        let x = Tensor::zeros(&[1]);
        assert!(grad_check(|_| 0.0, &[x.clone()], &[x.clone()], 0.0, 1e-4).is_err());
        assert!(grad_check(|_| 0.0, &[x.clone()], &[x], 0.1, 1e-4).is_err());
    }

    #[test]
    fn suite_covers_every_layer() {
        let checks = layer_suite(2, 5, 1e-5, 1e-4).unwrap();
        assert_eq!(checks.len(), 7);
        for c in &checks {
            assert!(c.passed() && c.checked > 0, "{c:?}");
        }
    }
}

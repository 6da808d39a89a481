//! 2-D convolution (cross-correlation) lowered onto a dense GEMM through an
//! im2col buffer.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients of [`conv2d_forward`] with respect to all three operands.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn new(input: &Tensor, kernels: &Tensor, stride: usize, pad: usize) -> Result<Self> {
        let (c, h, w) = input.dims3()?;
        let (k, kc, kh, kw) = match kernels.shape()[..] {
            [k, kc, kh, kw] => (k, kc, kh, kw),
            _ => {
                return Err(Error::Shape(format!(
                    "kernels must be rank 4, got {:?}",
                    kernels.shape()
                )))
            }
        };
        if kc != c {
            return Err(Error::Shape(format!(
                "input has {c} channels but kernels expect {kc}"
            )));
        }
        if stride == 0 {
            return Err(Error::Param("stride must be >= 1".into()));
        }
        if kh > h + 2 * pad || kw > w + 2 * pad {
            return Err(Error::Shape(format!(
                "kernel {kh}x{kw} larger than padded input {}x{}",
                h + 2 * pad,
                w + 2 * pad
            )));
        }
        Ok(Self {
            c,
            h,
            w,
            k,
            kh,
            kw,
            oh: (h + 2 * pad - kh) / stride + 1,
            ow: (w + 2 * pad - kw) / stride + 1,
            stride,
            pad,
        })
    }

    fn patch_len(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Row-major `[C*kh*kw, OH*OW]` patch matrix; padding reads as zero.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let p = self.positions();
        let mut col = vec![0.0; self.patch_len() * p];
        for c in 0..self.c {
            for dy in 0..self.kh {
                for dx in 0..self.kw {
                    let row = (c * self.kh + dy) * self.kw + dx;
                    let dst = &mut col[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + dy) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let src = &x[(c * self.h + iy as usize) * self.w..][..self.w];
                        for ox in 0..self.ow {
                            let ix = (ox * self.stride + dx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[oy * self.ow + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f64]) -> Vec<f64> {
        let p = self.positions();
        let mut x = vec![0.0; self.c * self.h * self.w];
        for c in 0..self.c {
            for dy in 0..self.kh {
                for dx in 0..self.kw {
                    let row = (c * self.kh + dy) * self.kw + dx;
                    let src = &col[row * p..(row + 1) * p];
                    for oy in 0..self.oh {
                        let iy = (oy * self.stride + dy) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut x[(c * self.h + iy as usize) * self.w..][..self.w];
                        for ox in 0..self.ow {
                            let ix = (ox * self.stride + dx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.w as isize {
                                dst[ix as usize] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
        x
    }
}

/// `C = alpha * op(A) * op(B) + beta * C` over row-major buffers, with the
/// transposes expressed through strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices are sized m*k, k*n and m*n, and the strides
    // address exactly those elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Cross-correlates `input [C,H,W]` with `kernels [K,C,kh,kw]` and adds a
/// per-output-channel bias.
pub fn conv2d_forward(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let g = Geometry::new(input, kernels, stride, padding)?;
    if bias.shape() != [g.k] {
        return Err(Error::Shape(format!(
            "bias must be [{}], got {:?}",
            g.k,
            bias.shape()
        )));
    }
    let p = g.positions();
    let mut out = vec![0.0; g.k * p];
    for (row, &b) in out.chunks_exact_mut(p).zip(bias.data()) {
        row.fill(b);
    }
    let col = g.im2col(input.data());
    gemm(g.k, g.patch_len(), p, kernels.data(), false, &col, false, 1.0, &mut out);
    Ok(Tensor::from_parts(vec![g.k, g.oh, g.ow], out))
}

/// Exact gradients of [`conv2d_forward`] given the upstream gradient of its
/// output.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    upstream: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<ConvGrads> {
    let (dx, dk, db) = backward_impl(input, kernels, upstream, stride, padding, true)?;
    Ok(ConvGrads {
        input: dx.expect("input gradient requested"),
        kernels: dk,
        bias: db,
    })
}

/// Kernel and bias gradients only, for layers fed directly by data.
pub(crate) fn conv2d_backward_params(
    input: &Tensor,
    kernels: &Tensor,
    upstream: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, Tensor)> {
    let (_, dk, db) = backward_impl(input, kernels, upstream, stride, padding, false)?;
    Ok((dk, db))
}

fn backward_impl(
    input: &Tensor,
    kernels: &Tensor,
    upstream: &Tensor,
    stride: usize,
    padding: usize,
    want_input: bool,
) -> Result<(Option<Tensor>, Tensor, Tensor)> {
    let g = Geometry::new(input, kernels, stride, padding)?;
    if upstream.shape() != [g.k, g.oh, g.ow] {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} does not match conv output [{}, {}, {}]",
            upstream.shape(),
            g.k,
            g.oh,
            g.ow
        )));
    }
    let p = g.positions();
    let pl = g.patch_len();
    let dout = upstream.data();

    let col = g.im2col(input.data());
    let mut dk = vec![0.0; g.k * pl];
    gemm(g.k, p, pl, dout, false, &col, true, 0.0, &mut dk);
    let db = dout.chunks_exact(p).map(|r| r.iter().sum()).collect();

    let dx = want_input.then(|| {
        let mut dcol = vec![0.0; pl * p];
        gemm(pl, g.k, p, kernels.data(), true, dout, false, 0.0, &mut dcol);
        Tensor::from_parts(vec![g.c, g.h, g.w], g.col2im(&dcol))
    });

    Ok((
        dx,
        Tensor::from_parts(kernels.shape().to_vec(), dk),
        Tensor::from_parts(vec![g.k], db),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Straight six-loop cross-correlation.
    fn naive(input: &Tensor, kernels: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Tensor {
        let (c, h, w) = input.dims3().unwrap();
        let s = kernels.shape();
        let (k, kh, kw) = (s[0], s[2], s[3]);
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let x = |ci: usize, y: isize, xx: isize| {
            if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                0.0
            } else {
                input.data()[(ci * h + y as usize) * w + xx as usize]
            }
        };
        let mut out = vec![0.0; k * oh * ow];
        for ko in 0..k {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.data()[ko];
                    for ci in 0..c {
                        for dy in 0..kh {
                            for dx in 0..kw {
                                let iy = (oy * stride + dy) as isize - pad as isize;
                                let ix = (ox * stride + dx) as isize - pad as isize;
                                acc += kernels.data()[((ko * c + ci) * kh + dy) * kw + dx]
                                    * x(ci, iy, ix);
                            }
                        }
                    }
                    out[(ko * oh + oy) * ow + ox] = acc;
                }
            }
        }
        Tensor::new(&[k, oh, ow], out).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor::full(&[1, 3, 3], 1.0);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d_forward(&x, &k, &b, 1, 0).unwrap();
        assert_eq!(y, Tensor::full(&[1, 3, 3], 1.0));
    }

    #[test]
    fn full_window_sum() {
        let x = Tensor::new(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Tensor::full(&[1, 1, 2, 2], 1.0);
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random(&[3, 8, 8], &mut rng);
        let k = random(&[4, 3, 3, 3], &mut rng);
        let b = random(&[4], &mut rng);
        for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0), (3, 2)] {
            let fast = conv2d_forward(&x, &k, &b, stride, pad).unwrap();
            let slow = naive(&x, &k, &b, stride, pad);
            assert_eq!(fast.shape(), slow.shape());
            for (a, e) in fast.data().iter().zip(slow.data()) {
                assert!((a - e).abs() < 1e-12, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let k = Tensor::zeros(&[1, 3, 3, 3]);
        let err = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), 1, 0).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 5, 5], &mut rng);
        let k = random(&[3, 2, 3, 3], &mut rng);
        let g = conv2d_backward(&x, &k, &Tensor::zeros(&[3, 3, 3]), 1, 0).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.kernels.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let x = Tensor::full(&[1, 1, 1], 0.7);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let g = conv2d_backward(&x, &k, &Tensor::full(&[1, 1, 1], 1.0), 1, 0).unwrap();
        assert_eq!(g.kernels.data(), &[0.7]);
        assert_eq!(g.input.data(), &[1.0]);
        assert_eq!(g.bias.data(), &[1.0]);
    }

    #[test]
    fn backward_rejects_wrong_upstream() {
        let x = Tensor::zeros(&[1, 4, 4]);
        let k = Tensor::zeros(&[1, 1, 3, 3]);
        assert!(conv2d_backward(&x, &k, &Tensor::zeros(&[1, 4, 4]), 1, 0).is_err());
    }
}

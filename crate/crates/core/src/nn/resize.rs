//! Bilinear resampling of feature maps (half-pixel centre convention).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Interpolation taps for a source coordinate on an axis of length `n`.
/// Coordinates outside `[0, n-1]` clamp to the edge sample.
#[inline]
pub(crate) fn taps(src: f64, n: usize) -> (usize, usize, f64) {
    let max = (n - 1) as f64;
    let s = src.clamp(0.0, max);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(n - 1);
    (i0, i1, s - i0 as f64)
}

fn axis_taps(out: usize, input: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / out as f64;
    (0..out)
        .map(|o| taps((o as f64 + 0.5) * scale - 0.5, input))
        .collect()
}

/// Resizes every channel of `[C,H,W]` to `[C,out_h,out_w]`.
pub fn bilinear_resize(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Param("resize target must be non-empty".into()));
    }
    let ty = axis_taps(out_h, h);
    let tx = axis_taps(out_w, w);
    let x = input.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ty {
            let r0 = &plane[y0 * w..(y0 + 1) * w];
            let r1 = &plane[y1 * w..(y1 + 1) * w];
            for &(x0, x1, fx) in &tx {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
                out.push(top + (bot - top) * fy);
            }
        }
    }
    Ok(Tensor::from_parts(vec![c, out_h, out_w], out))
}

pub fn bilinear_resize_backward(input_shape: &[usize], upstream: &Tensor) -> Result<Tensor> {
    let (c, h, w) = match input_shape {
        [c, h, w] => (*c, *h, *w),
        _ => return Err(Error::Shape(format!("expected rank-3 shape, got {input_shape:?}"))),
    };
    let (uc, out_h, out_w) = upstream.dims3()?;
    if uc != c {
        return Err(Error::Shape(format!("channel mismatch {uc} vs {c}")));
    }
    let ty = axis_taps(out_h, h);
    let tx = axis_taps(out_w, w);
    let g = upstream.data();
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        let plane = &mut dx[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let v = g[(ch * out_h + oy) * out_w + ox];
                plane[y0 * w + x0] += v * (1.0 - fy) * (1.0 - fx);
                plane[y0 * w + x1] += v * (1.0 - fy) * fx;
                plane[y1 * w + x0] += v * fy * (1.0 - fx);
                plane[y1 * w + x1] += v * fy * fx;
            }
        }
    }
    Ok(Tensor::from_parts(vec![c, h, w], dx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_size_is_identity() {
        let x = Tensor::from_fn(&[2, 4, 5], |i| i as f64);
        assert_eq!(bilinear_resize(&x, 4, 5).unwrap(), x);
    }

    #[test]
    fn doubling_a_pair() {
        let x = Tensor::new(&[1, 1, 2], vec![0.0, 1.0]).unwrap();
        let y = bilinear_resize(&x, 1, 4).unwrap();
        assert_eq!(y.data(), &[0.0, 0.25, 0.75, 1.0]);
    }
}

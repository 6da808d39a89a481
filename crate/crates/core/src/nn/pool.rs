use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn pooled_dims(h: usize, w: usize, kernel: usize, stride: usize) -> Result<(usize, usize)> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Param(format!(
            "pool kernel and stride must be >= 1, got kernel={kernel} stride={stride}"
        )));
    }
    if kernel > h || kernel > w {
        return Err(Error::Shape(format!("pool kernel {kernel} exceeds input {h}x{w}")));
    }
    Ok(((h - kernel) / stride + 1, (w - kernel) / stride + 1))
}

/// Average pooling over a 2-D map; each output is the mean of its
/// `kernel x kernel` window.
pub fn avg_pool(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    let (h, w) = input.dims2()?;
    let (oh, ow) = pooled_dims(h, w, kernel, stride)?;
    let x = input.data();
    let area = (kernel * kernel) as f64;
    let mut out = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        for ox in 0..ow {
            let mut acc = 0.0;
            for y in oy * stride..oy * stride + kernel {
                acc += x[y * w + ox * stride..][..kernel].iter().sum::<f64>();
            }
            out.push(acc / area);
        }
    }
    Ok(Tensor::from_parts(vec![oh, ow], out))
}

pub fn avg_pool_backward(
    input_shape: &[usize],
    upstream: &Tensor,
    kernel: usize,
    stride: usize,
) -> Result<Tensor> {
    let (h, w) = match input_shape {
        [h, w] => (*h, *w),
        _ => return Err(Error::Shape(format!("expected rank-2 shape, got {input_shape:?}"))),
    };
    let (oh, ow) = pooled_dims(h, w, kernel, stride)?;
    if upstream.shape() != [oh, ow] {
        return Err(Error::Shape(format!(
            "upstream {:?} does not match pooled [{oh}, {ow}]",
            upstream.shape()
        )));
    }
    let area = (kernel * kernel) as f64;
    let mut dx = vec![0.0; h * w];
    for oy in 0..oh {
        for ox in 0..ow {
            let g = upstream.data()[oy * ow + ox] / area;
            for y in oy * stride..oy * stride + kernel {
                for v in &mut dx[y * w + ox * stride..][..kernel] {
                    *v += g;
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![h, w], dx))
}

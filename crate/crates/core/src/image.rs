//! RGB frames with `[0, 1]` float channels, bilinear window cropping and PNG
//! I/O.

use std::path::Path;

use crate::controller::Window;
use crate::error::{Error, Result};
use crate::nn::bilinear_taps;
use crate::tensor::Tensor;

pub const CHANNELS: usize = 3;

/// Interleaved RGB image, row-major.
#[derive(Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{})", self.width, self.height)
    }
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("image must be non-empty, got {width}x{height}")));
        }
        if data.len() != width * height * CHANNELS {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image needs {} values, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        self.data[i..i + CHANNELS].copy_from_slice(&rgb);
    }

    /// Mean of each channel.
    pub fn mean_rgb(&self) -> [f64; 3] {
        let mut acc = [0.0f64; 3];
        for px in self.data.chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                acc[c] += px[c] as f64;
            }
        }
        let n = (self.width * self.height) as f64;
        acc.map(|v| v / n)
    }

    /// Channel-major `[3, H, W]` tensor, centred on zero (`v - 0.5`).
    pub fn to_tensor(&self) -> Tensor {
        let plane = self.width * self.height;
        let mut out = vec![0.0; CHANNELS * plane];
        for (i, px) in self.data.chunks_exact(CHANNELS).enumerate() {
            for c in 0..CHANNELS {
                out[c * plane + i] = px[c] as f64 - 0.5;
            }
        }
        Tensor::from_parts(vec![CHANNELS, self.height, self.width], out)
    }

    /// Rounds every channel to the nearest 8-bit level so PNG export is
    /// lossless.
    pub fn quantize(&mut self) {
        for v in &mut self.data {
            *v = quantize_level(*v) as f32 / 255.0;
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        let data = rgb.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
        Self::new(w as usize, h as usize, data)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize_level(v)).collect();
        let buf = image::RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })
    }
}

fn quantize_level(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Bilinearly samples the window region of `frame` into an
/// `out_size x out_size` image. Samples past the frame border replicate the
/// edge pixel.
pub fn crop_and_resize(frame: &Image, window: &Window, out_size: usize) -> Image {
    crop_region(frame, (0, 0), (frame.width, frame.height), window, out_size)
}

fn sample_taps(start: f64, step: f64, out_size: usize, n: usize) -> Vec<(usize, usize, f64)> {
    (0..out_size)
        .map(|u| bilinear_taps(start + (u as f64 + 0.5) * step - 0.5, n))
        .collect()
}

/// Inclusive pixel ranges `((x_min, x_max), (y_min, y_max))` that
/// [`crop_and_resize`] reads for this window on a `frame_w x frame_h` frame.
pub fn crop_support(window: &Window, out_size: usize, frame_w: usize, frame_h: usize) -> ((usize, usize), (usize, usize)) {
    let span = |taps: Vec<(usize, usize, f64)>| {
        taps.iter()
            .fold((usize::MAX, 0), |(lo, hi), &(a, b, _)| (lo.min(a).min(b), hi.max(a).max(b)))
    };
    let xs = sample_taps(window.left(), window.w / out_size as f64, out_size, frame_w);
    let ys = sample_taps(window.top(), window.h / out_size as f64, out_size, frame_h);
    (span(xs), span(ys))
}

/// [`crop_and_resize`] on a frame of size `frame_dims` of which only the
/// part starting at `origin` is available in `region`. The region must
/// cover [`crop_support`]; the result is identical to cropping the full
/// frame.
pub fn crop_region(
    region: &Image,
    origin: (usize, usize),
    frame_dims: (usize, usize),
    window: &Window,
    out_size: usize,
) -> Image {
    let (ox, oy) = origin;
    let xt = sample_taps(window.left(), window.w / out_size as f64, out_size, frame_dims.0);
    let yt = sample_taps(window.top(), window.h / out_size as f64, out_size, frame_dims.1);
    let w = region.width;
    let src = &region.data;
    let row = |y: usize| {
        let y = y - oy;
        &src[y * w * CHANNELS..(y + 1) * w * CHANNELS]
    };
    let mut data = Vec::with_capacity(out_size * out_size * CHANNELS);
    for &(y0, y1, fy) in &yt {
        let fy = fy as f32;
        let (r0, r1) = (row(y0), row(y1));
        for &(x0, x1, fx) in &xt {
            let fx = fx as f32;
            let (x0, x1) = (x0 - ox, x1 - ox);
            for c in 0..CHANNELS {
                let a = r0[x0 * CHANNELS + c];
                let b = r0[x1 * CHANNELS + c];
                let d = r1[x0 * CHANNELS + c];
                let e = r1[x1 * CHANNELS + c];
                let top = a + (b - a) * fx;
                let bot = d + (e - d) * fx;
                data.push(top + (bot - top) * fy);
            }
        }
    }
    Image {
        width: out_size,
        height: out_size,
        data,
    }
}

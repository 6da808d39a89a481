//! Deterministic synthetic sequences: a textured target, look-alike
//! distractors, band-limited background clutter, optional occlusion and
//! scale ramps. Also the oracle heatmap and the overlay renderer.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::controller::Window;
use crate::error::{Error, Result};
use crate::grid::{RoiMatrix, GRID};
use crate::image::{crop_region, crop_support, Image};
use crate::metric::{rasterize_gt, BBox};
use crate::sequence::{FrameSource, SequenceRecord};

/// Minimum RGB distance between the target base colour and an unrelated
/// distractor colour (reached at similarity 0).
pub const COLOR_MARGIN: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    pub start: usize,
    pub length: usize,
    /// Fraction of the target width hidden, anchored on its left edge.
    pub coverage: f64,
}

impl Occlusion {
    pub fn active(&self, frame: usize) -> bool {
        frame >= self.start && frame < self.start + self.length
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub frame_width: usize,
    pub frame_height: usize,
    pub length: usize,
    pub target_seed: u64,
    pub init_box: BBox,
    pub distractors: usize,
    /// 0: unrelated look, 1: drawn from the target's appearance distribution.
    pub similarity: f64,
    /// Per-axis bound on the per-frame centre displacement, pixels.
    pub max_velocity: f64,
    /// Per-frame multiplicative growth of the target size.
    pub scale_ramp: f64,
    pub occlusion: Option<Occlusion>,
    pub clutter: f64,
    /// Amplitude of per-frame pixel noise.
    pub noise: f64,
    /// Reflect at the frame border; when false the target may leave.
    pub reflect: bool,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            frame_width: 256,
            frame_height: 256,
            length: 100,
            target_seed: 0,
            init_box: BBox::new(112.0, 112.0, 32.0, 32.0),
            distractors: 2,
            similarity: 0.5,
            max_velocity: 2.5,
            scale_ramp: 1.0,
            occlusion: None,
            clutter: 0.5,
            noise: 0.02,
            reflect: true,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let fw = self.frame_width as f64;
        let fh = self.frame_height as f64;
        if self.frame_width == 0 || self.frame_height == 0 || self.length == 0 {
            return Err(Error::Param("frame size and length must be positive".into()));
        }
        let b = &self.init_box;
        if !(b.w > 0.0 && b.h > 0.0) {
            return Err(Error::Param(format!("target box must have positive size, got {b:?}")));
        }
        if b.w > fw || b.h > fh {
            return Err(Error::Param(format!(
                "target {}x{} larger than the {}x{} frame",
                b.w, b.h, self.frame_width, self.frame_height
            )));
        }
        if self.reflect && (b.x < 0.0 || b.y < 0.0 || b.x + b.w > fw || b.y + b.h > fh) {
            return Err(Error::Param(format!("target box {b:?} starts outside the frame")));
        }
        for (name, v) in [
            ("similarity", self.similarity),
            ("clutter", self.clutter),
            ("noise", self.noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.max_velocity.is_finite() && self.max_velocity >= 0.0) {
            return Err(Error::Param(format!("invalid velocity bound {}", self.max_velocity)));
        }
        if !(self.scale_ramp.is_finite() && self.scale_ramp > 0.0) {
            return Err(Error::Param(format!("invalid scale ramp {}", self.scale_ramp)));
        }
        if let Some(o) = &self.occlusion {
            if !(0.0..=1.0).contains(&o.coverage) {
                return Err(Error::Param(format!("occlusion coverage {} outside [0, 1]", o.coverage)));
            }
        }
        Ok(())
    }
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_unit(seed: u64, a: u64, b: u64, c: u64) -> f64 {
    let h = mix(seed ^ mix(a ^ mix(b ^ mix(c))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in `[0, 1]` on an integer lattice.
fn value_noise(seed: u64, channel: u64, x: f64, y: f64) -> f64 {
    let xf = x.floor();
    let yf = y.floor();
    let (ix, iy) = (xf as i64 as u64, yf as i64 as u64);
    let tx = x - xf;
    let ty = y - yf;
    let sx = tx * tx * (3.0 - 2.0 * tx);
    let sy = ty * ty * (3.0 - 2.0 * ty);
    let v00 = hash_unit(seed, channel, ix, iy);
    let v10 = hash_unit(seed, channel, ix.wrapping_add(1), iy);
    let v01 = hash_unit(seed, channel, ix, iy.wrapping_add(1));
    let v11 = hash_unit(seed, channel, ix.wrapping_add(1), iy.wrapping_add(1));
    let top = v00 + (v10 - v00) * sx;
    let bot = v01 + (v11 - v01) * sx;
    top + (bot - top) * sy
}

/// Texture parameters of one scene object.
#[derive(Debug, Clone, PartialEq)]
pub struct Appearance {
    pub base: [f64; 3],
    pub amplitude: f64,
    /// Lattice cells across the object.
    pub lattice: f64,
    pub pattern_seed: u64,
    pub ellipse: bool,
}

impl Appearance {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            base: [0; 3].map(|_| rng.gen_range(0.15..0.85)),
            amplitude: rng.gen_range(0.12..0.3),
            lattice: rng.gen_range(2.0..6.0),
            pattern_seed: rng.gen(),
            ellipse: rng.gen_bool(0.5),
        }
    }

    /// An independent look whose base colour keeps at least
    /// [`COLOR_MARGIN`] from `target`.
    fn unrelated(target: &Appearance, rng: &mut ChaCha8Rng) -> Self {
        loop {
            let a = Self::random(rng);
            if color_distance(&a.base, &target.base) >= COLOR_MARGIN {
                return a;
            }
        }
    }

    /// Interpolates from an unrelated look towards the target's statistics.
    fn similar_to(target: &Appearance, similarity: f64, rng: &mut ChaCha8Rng) -> Self {
        let other = Self::unrelated(target, rng);
        let lerp = |a: f64, b: f64| b + similarity * (a - b);
        Self {
            base: [0, 1, 2].map(|c| lerp(target.base[c], other.base[c])),
            amplitude: lerp(target.amplitude, other.amplitude),
            lattice: lerp(target.lattice, other.lattice),
            pattern_seed: other.pattern_seed,
            ellipse: if rng.gen_bool(similarity) { target.ellipse } else { other.ellipse },
        }
    }

    fn color(&self, u: f64, v: f64) -> [f64; 3] {
        let lum = value_noise(self.pattern_seed, 3, u * self.lattice, v * self.lattice) - 0.5;
        [0, 1, 2].map(|c| {
            let chan = value_noise(self.pattern_seed, c as u64, u * self.lattice * 2.0, v * self.lattice * 2.0) - 0.5;
            self.base[c] + self.amplitude * (2.0 * lum + 0.6 * chan)
        })
    }
}

pub fn color_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Body {
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    w: f64,
    h: f64,
}

impl Body {
    fn bbox(&self) -> BBox {
        BBox::from_center(self.cx, self.cy, self.w, self.h)
    }
}

fn reflect_axis(pos: &mut f64, vel: &mut f64, half: f64, extent: f64) {
    let lo = half;
    let hi = extent - half;
    if hi <= lo {
        *pos = extent / 2.0;
        return;
    }
    if *pos < lo {
        *pos = 2.0 * lo - *pos;
        *vel = -*vel;
    }
    if *pos > hi {
        *pos = 2.0 * hi - *pos;
        *vel = -*vel;
    }
    *pos = pos.clamp(lo, hi);
}

/// A generated scene. Trajectories and the static background are computed
/// up front; frames are rendered on demand.
#[derive(Debug, Clone)]
pub struct Scene {
    name: String,
    config: SceneConfig,
    target: Appearance,
    distractor_looks: Vec<Appearance>,
    occluder: Appearance,
    target_boxes: Vec<BBox>,
    distractor_boxes: Vec<Vec<BBox>>,
    background: Vec<f32>,
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self> {
        let name = format!("synth_{:016x}", config.seed);
        Self::with_name(config, name)
    }

    pub fn with_name(config: SceneConfig, name: impl Into<String>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let target = Appearance::random(&mut ChaCha8Rng::seed_from_u64(config.target_seed));
        let distractor_looks: Vec<_> = (0..config.distractors)
            .map(|_| Appearance::similar_to(&target, config.similarity, &mut rng))
            .collect();
        let mut occluder = Appearance::unrelated(&target, &mut rng);
        occluder.ellipse = false;

        let (target_boxes, distractor_boxes) = Self::trajectories(&config, &mut rng);
        let background = Self::background(&config, &mut rng);
        Ok(Self {
            name: name.into(),
            config,
            target,
            distractor_looks,
            occluder,
            target_boxes,
            distractor_boxes,
            background,
        })
    }

    fn trajectories(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> (Vec<BBox>, Vec<Vec<BBox>>) {
        let fw = cfg.frame_width as f64;
        let fh = cfg.frame_height as f64;
        let vmax = cfg.max_velocity;
        let accel = vmax * 0.3;
        let jitter = |rng: &mut ChaCha8Rng, m: f64| if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };

        let (cx, cy) = cfg.init_box.center();
        let (w0, h0) = (cfg.init_box.w, cfg.init_box.h);
        let mut target = Body {
            cx,
            cy,
            vx: jitter(rng, vmax * 0.5),
            vy: jitter(rng, vmax * 0.5),
            w: w0,
            h: h0,
        };

        let mut distractors: Vec<Body> = (0..cfg.distractors)
            .map(|_| {
                let w = (w0 * rng.gen_range(0.7..1.3)).min(fw);
                let h = (h0 * rng.gen_range(0.7..1.3)).min(fh);
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let dist = rng.gen_range(1.0..2.0) * w0.max(h0);
                let mut b = Body {
                    cx: cx + dist * angle.cos(),
                    cy: cy + dist * angle.sin(),
                    vx: jitter(rng, vmax * 0.5),
                    vy: jitter(rng, vmax * 0.5),
                    w,
                    h,
                };
                let (mut vx, mut vy) = (b.vx, b.vy);
                reflect_axis(&mut b.cx, &mut vx, w / 2.0, fw);
                reflect_axis(&mut b.cy, &mut vy, h / 2.0, fh);
                b
            })
            .collect();

        let mut target_boxes = Vec::with_capacity(cfg.length);
        let mut distractor_boxes = vec![Vec::with_capacity(cfg.length); cfg.distractors];
        for t in 0..cfg.length {
            if t > 0 {
                target.vx = (target.vx + jitter(rng, accel)).clamp(-vmax, vmax);
                target.vy = (target.vy + jitter(rng, accel)).clamp(-vmax, vmax);
                target.cx += target.vx;
                target.cy += target.vy;
                let growth = cfg.scale_ramp.powi(t as i32);
                target.w = (w0 * growth).min(fw);
                target.h = (h0 * growth).min(fh);
                if cfg.reflect {
                    reflect_axis(&mut target.cx, &mut target.vx, target.w / 2.0, fw);
                    reflect_axis(&mut target.cy, &mut target.vy, target.h / 2.0, fh);
                }
                for d in distractors.iter_mut() {
                    // weak pull keeps look-alikes in the target's neighbourhood
                    let pull_x = (target.cx - d.cx) * 0.01;
                    let pull_y = (target.cy - d.cy) * 0.01;
                    d.vx = (d.vx + jitter(rng, accel) + pull_x).clamp(-vmax, vmax);
                    d.vy = (d.vy + jitter(rng, accel) + pull_y).clamp(-vmax, vmax);
                    d.cx += d.vx;
                    d.cy += d.vy;
                    reflect_axis(&mut d.cx, &mut d.vx, d.w / 2.0, fw);
                    reflect_axis(&mut d.cy, &mut d.vy, d.h / 2.0, fh);
                }
            }
            target_boxes.push(if t == 0 { cfg.init_box } else { target.bbox() });
            for (track, d) in distractor_boxes.iter_mut().zip(&distractors) {
                track.push(d.bbox());
            }
        }
        (target_boxes, distractor_boxes)
    }

    fn background(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let base: [f64; 3] = [0; 3].map(|_| rng.gen_range(0.3..0.7));
        let seed: u64 = rng.gen();
        let amp = cfg.clutter * 0.35;
        let mut out = Vec::with_capacity(cfg.frame_width * cfg.frame_height * 3);
        for y in 0..cfg.frame_height {
            for x in 0..cfg.frame_width {
                let (fx, fy) = (x as f64, y as f64);
                let coarse = value_noise(seed, 10, fx / 48.0, fy / 48.0) - 0.5;
                let fine = value_noise(seed, 11, fx / 12.0, fy / 12.0) - 0.5;
                for (c, b) in base.iter().enumerate() {
                    let chan = value_noise(seed, c as u64, fx / 24.0, fy / 24.0) - 0.5;
                    let v = b + amp * (1.2 * coarse + 0.8 * fine + 0.8 * chan);
                    out.push(v.clamp(0.0, 1.0) as f32);
                }
            }
        }
        out
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn target_appearance(&self) -> &Appearance {
        &self.target
    }

    pub fn distractor_appearances(&self) -> &[Appearance] {
        &self.distractor_looks
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.target_boxes
    }

    pub fn distractor_boxes(&self, index: usize) -> &[BBox] {
        &self.distractor_boxes[index]
    }

    /// Paints `look` into `img`, which holds the frame region starting at
    /// `origin`.
    fn paint(img: &mut Image, origin: (usize, usize), bbox: &BBox, look: &Appearance, clip_w: Option<f64>) {
        let (ox, oy) = origin;
        let x_end = clip_w.map_or(bbox.x + bbox.w, |cw| bbox.x + cw);
        let x0 = (bbox.x.max(0.0).floor() as usize).max(ox);
        let y0 = (bbox.y.max(0.0).floor() as usize).max(oy);
        let x1 = (x_end.max(0.0).ceil() as usize).min(ox + img.width());
        let y1 = ((bbox.y + bbox.h).max(0.0).ceil() as usize).min(oy + img.height());
        for y in y0..y1 {
            let v = (y as f64 + 0.5 - bbox.y) / bbox.h;
            if !(0.0..1.0).contains(&v) {
                continue;
            }
            for x in x0..x1 {
                let px = x as f64 + 0.5;
                if px >= x_end {
                    continue;
                }
                let u = (px - bbox.x) / bbox.w;
                if !(0.0..1.0).contains(&u) {
                    continue;
                }
                if look.ellipse && (u - 0.5).powi(2) + (v - 0.5).powi(2) > 0.25 {
                    continue;
                }
                let c = look.color(u, v);
                img.set_pixel(x - ox, y - oy, c.map(|v| v.clamp(0.0, 1.0) as f32));
            }
        }
    }

    /// Renders frame `t`; pixel values are quantised to 8-bit levels.
    pub fn render(&self, t: usize) -> Image {
        self.render_region(t, 0, 0, self.config.frame_width, self.config.frame_height)
    }

    /// Renders the pixels `x0..x1`, `y0..y1` of frame `t`, identical to the
    /// same region of [`Scene::render`]. The range is clipped to the frame.
    pub fn render_region(&self, t: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Image {
        let cfg = &self.config;
        let fw = cfg.frame_width;
        let (x1, y1) = (x1.min(fw), y1.min(cfg.frame_height));
        let (x0, y0) = (x0.min(x1), y0.min(y1));
        let (rw, rh) = (x1 - x0, y1 - y0);
        let mut bg = Vec::with_capacity(rw * rh * 3);
        for y in y0..y1 {
            bg.extend_from_slice(&self.background[(y * fw + x0) * 3..(y * fw + x1) * 3]);
        }
        let mut img = Image::new(rw, rh, bg).expect("region inside the frame");
        let origin = (x0, y0);
        for (look, track) in self.distractor_looks.iter().zip(&self.distractor_boxes) {
            Self::paint(&mut img, origin, &track[t], look, None);
        }
        let target = self.target_boxes[t];
        Self::paint(&mut img, origin, &target, &self.target, None);
        if let Some(o) = cfg.occlusion.filter(|o| o.active(t) && o.coverage > 0.0) {
            let margin = 0.1 * target.h;
            let band = BBox::new(target.x, target.y - margin, target.w, target.h + 2.0 * margin);
            Self::paint(&mut img, origin, &band, &self.occluder, Some(o.coverage * target.w));
        }
        if cfg.noise > 0.0 {
            let amp = cfg.noise;
            let seed = mix(cfg.seed ^ 0xA5A5_5A5A);
            let mut data = img.data().to_vec();
            for (i, v) in data.iter_mut().enumerate() {
                let (y, col) = (y0 + i / 3 / rw, x0 * 3 + i % (3 * rw));
                let n = hash_unit(seed, t as u64, y as u64, col as u64) - 0.5;
                *v = (*v as f64 + 2.0 * amp * n).clamp(0.0, 1.0) as f32;
            }
            img = Image::new(rw, rh, data).expect("same size");
        }
        img.quantize();
        img
    }
}

impl FrameSource for Scene {
    fn name(&self) -> &str {
        &self.name
    }

    fn len(&self) -> usize {
        self.config.length
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, Image>> {
        if index >= self.config.length {
            return Err(Error::Param(format!("frame {index} out of range")));
        }
        Ok(Cow::Owned(self.render(index)))
    }

    fn crop(&self, index: usize, window: &Window, out_size: usize) -> Result<Image> {
        if index >= self.config.length {
            return Err(Error::Param(format!("frame {index} out of range")));
        }
        let (fw, fh) = (self.config.frame_width, self.config.frame_height);
        let ((x0, x1), (y0, y1)) = crop_support(window, out_size, fw, fh);
        let region = self.render_region(index, x0, y0, x1 + 1, y1 + 1);
        Ok(crop_region(&region, (x0, y0), (fw, fh), window, out_size))
    }

    fn gt_box(&self, index: usize) -> BBox {
        self.target_boxes[index]
    }
}

/// Generates and renders a whole sequence.
pub fn gen_sequence(config: &SceneConfig) -> Result<SequenceRecord> {
    let scene = Scene::new(config.clone())?;
    materialize(&scene)
}

pub fn materialize(scene: &Scene) -> Result<SequenceRecord> {
    let frames = (0..scene.len()).map(|t| scene.render(t)).collect();
    SequenceRecord::new(scene.name(), frames, scene.boxes().to_vec())
}

/// Randomised family of scenes sharing a base configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub base: SceneConfig,
    pub count: usize,
    pub min_target: f64,
    pub max_target: f64,
    pub min_distractors: usize,
    pub max_distractors: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            base: SceneConfig::default(),
            count: 8,
            min_target: 20.0,
            max_target: 40.0,
            min_distractors: 1,
            max_distractors: 3,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    /// Per-sequence configs: random target size, aspect, placement,
    /// distractor count and seeds; everything else from `base`.
    pub fn configs(&self) -> Result<Vec<SceneConfig>> {
        if !(self.min_target > 0.0 && self.min_target <= self.max_target) {
            return Err(Error::Param(format!(
                "invalid target size range [{}, {}]",
                self.min_target, self.max_target
            )));
        }
        if self.min_distractors > self.max_distractors {
            return Err(Error::Param("invalid distractor range".into()));
        }
        let fw = self.base.frame_width as f64;
        let fh = self.base.frame_height as f64;
        (0..self.count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed) ^ mix(i as u64 + 1));
                let w = rng.gen_range(self.min_target..=self.max_target).min(fw);
                let h = (w * rng.gen_range(0.75..1.33)).clamp(self.min_target.min(fh), fh);
                let x = rng.gen_range(0.0..=(fw - w));
                let y = rng.gen_range(0.0..=(fh - h));
                let cfg = SceneConfig {
                    init_box: BBox::new(x, y, w, h),
                    distractors: rng.gen_range(self.min_distractors..=self.max_distractors),
                    target_seed: rng.gen(),
                    seed: rng.gen(),
                    ..self.base.clone()
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }

    pub fn scenes(&self) -> Result<Vec<Scene>> {
        self.configs()?
            .into_iter()
            .enumerate()
            .map(|(i, c)| Scene::with_name(c, format!("seq_{i:04}")))
            .collect()
    }
}

/// Ground-truth box rasterised in `window`, as a perfect extractor would
/// report it.
pub fn oracle_heatmap(bbox: &BBox, window: &Window) -> RoiMatrix {
    rasterize_gt(bbox, window)
        .map(|g| g.to_roi())
        .unwrap_or_else(|_| RoiMatrix::zeros())
}

const WINDOW_COLOR: [f32; 3] = [1.0, 0.9, 0.1];
const BOX_COLOR: [f32; 3] = [0.1, 1.0, 0.2];
const HEAT_COLOR: [f32; 3] = [1.0, 0.1, 0.1];
const HEAT_ALPHA: f64 = 0.55;

fn draw_rect(img: &mut Image, left: f64, top: f64, w: f64, h: f64, color: [f32; 3]) {
    let (iw, ih) = (img.width() as i64, img.height() as i64);
    let x0 = left.round() as i64;
    let y0 = top.round() as i64;
    let x1 = (left + w).round() as i64 - 1;
    let y1 = (top + h).round() as i64 - 1;
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < iw && y < ih {
            img.set_pixel(x as usize, y as usize, color);
        }
    };
    for x in x0..=x1 {
        put(x, y0);
        put(x, y1);
    }
    for y in y0..=y1 {
        put(x0, y);
        put(x1, y);
    }
}

/// Frame with the heatmap blended over the window region, the window
/// outline and the predicted box outline.
pub fn render_overlay(frame: &Image, window: &Window, roi: &RoiMatrix, pred_box: &BBox) -> Image {
    let mut out = frame.clone();
    let (left, top) = (window.left(), window.top());
    let x0 = left.max(0.0).floor() as usize;
    let y0 = top.max(0.0).floor() as usize;
    let x1 = (left + window.w).min(frame.width() as f64).ceil().max(0.0) as usize;
    let y1 = (top + window.h).min(frame.height() as f64).ceil().max(0.0) as usize;
    for y in y0..y1 {
        let gy = ((y as f64 + 0.5 - top) / window.h * GRID as f64).floor();
        if !(0.0..GRID as f64).contains(&gy) {
            continue;
        }
        for x in x0..x1 {
            let gx = ((x as f64 + 0.5 - left) / window.w * GRID as f64).floor();
            if !(0.0..GRID as f64).contains(&gx) {
                continue;
            }
            let a = HEAT_ALPHA * roi.get(gy as usize, gx as usize);
            if a == 0.0 {
                continue;
            }
            let p = out.pixel(x, y);
            let blended = [0, 1, 2].map(|c| (p[c] as f64 + a * (HEAT_COLOR[c] - p[c]) as f64) as f32);
            out.set_pixel(x, y, blended);
        }
    }
    draw_rect(&mut out, left, top, window.w, window.h, WINDOW_COLOR);
    draw_rect(&mut out, pred_box.x, pred_box.y, pred_box.w, pred_box.h, BOX_COLOR);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SceneConfig {
        SceneConfig {
            frame_width: 96,
            frame_height: 80,
            length: 12,
            init_box: BBox::new(30.0, 30.0, 16.0, 12.0),
            seed,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn region_crop_matches_full_render() {
        let scene = Scene::new(SceneConfig {
            occlusion: Some(Occlusion {
                start: 0,
                length: 5,
                coverage: 0.5,
            }),
            ..SceneConfig::default()
        })
        .unwrap();
        let windows = [
            Window::new(128.0, 128.0, 64.0, 64.0),
            Window::new(3.5, 250.2, 80.0, 41.0),
            Window::new(-30.0, 10.0, 20.0, 300.0),
            Window::new(128.0, 128.0, 256.0, 256.0),
        ];
        for t in [0, 3, 50] {
            let full = scene.render(t);
            for w in &windows {
                for size in [56, 112] {
                    assert_eq!(scene.crop(t, w, size).unwrap(), crate::image::crop_and_resize(&full, w, size));
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_sequence(&small(3)).unwrap(), gen_sequence(&small(3)).unwrap());
        assert_ne!(gen_sequence(&small(3)).unwrap(), gen_sequence(&small(4)).unwrap());
    }

    #[test]
    fn static_target() {
        let cfg = SceneConfig {
            max_velocity: 0.0,
            ..small(1)
        };
        let seq = gen_sequence(&cfg).unwrap();
        assert!(seq.boxes.iter().all(|b| *b == cfg.init_box));
    }

    #[test]
    fn scale_ramp_doubles() {
        let cfg = SceneConfig {
            length: 51,
            max_velocity: 0.0,
            scale_ramp: 1.014,
            init_box: BBox::new(100.0, 100.0, 30.0, 20.0),
            ..SceneConfig::default()
        };
        let scene = Scene::new(cfg).unwrap();
        let last = scene.boxes()[50];
        assert!((last.w - 30.0 * 1.014f64.powi(50)).abs() < 1e-9);
        assert!((last.w / 30.0 - 2.0).abs() < 0.01);
        assert!((last.h / 20.0 - 2.0).abs() < 0.01);
    }

    #[test]
    fn oversize_target_rejected() {
        let cfg = SceneConfig {
            init_box: BBox::new(0.0, 0.0, 300.0, 10.0),
            ..SceneConfig::default()
        };
        assert!(matches!(gen_sequence(&cfg), Err(Error::Param(_))));
    }

    #[test]
    fn oracle_centred_block() {
        let win = Window::new(100.0, 100.0, 112.0, 112.0);
        let b = BBox::from_center(100.0, 100.0, 56.0, 56.0);
        let roi = oracle_heatmap(&b, &win);
        for r in 0..GRID {
            for c in 0..GRID {
                let inside = (7..21).contains(&r) && (7..21).contains(&c);
                assert_eq!(roi.get(r, c), if inside { 1.0 } else { 0.0 });
            }
        }
        let far = BBox::new(900.0, 900.0, 5.0, 5.0);
        assert_eq!(oracle_heatmap(&far, &win).sum(), 0.0);
    }

    #[test]
    fn zero_heat_overlay_only_draws_outlines() {
        let frame = Scene::new(small(2)).unwrap().render(0);
        let win = Window::new(40.0, 40.0, 30.0, 30.0);
        let pred = BBox::new(30.0, 32.0, 12.0, 10.0);
        let out = render_overlay(&frame, &win, &RoiMatrix::zeros(), &pred);
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                if out.pixel(x, y) != frame.pixel(x, y) {
                    let c = out.pixel(x, y);
                    assert!(c == WINDOW_COLOR || c == BOX_COLOR, "pixel {x},{y}");
                }
            }
        }
    }

    #[test]
    fn heat_stays_inside_window() {
        let frame = Image::filled(64, 64, [0.5, 0.5, 0.5]);
        let win = Window::new(20.0, 30.0, 24.0, 16.0);
        let out = render_overlay(&frame, &win, &RoiMatrix::filled(1.0), &BBox::new(-50.0, -50.0, 1.0, 1.0));
        for y in 0..64 {
            for x in 0..64 {
                let inside = (8..32).contains(&x) && (22..38).contains(&y);
                if !inside {
                    assert_eq!(out.pixel(x, y), [0.5; 3], "{x},{y}");
                }
            }
        }
    }
}

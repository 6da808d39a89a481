//! Offline training on ordered 15-frame batches with a per-batch template.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{
    backward, encode_template_traced, forward_traced, template_backward, ModelGrads, ModelParams,
};
use crate::controller::Window;
use crate::error::{Error, Result};
use crate::image::{crop_and_resize, Image};
use crate::metric::{rasterize_gt, BBox};
use crate::nn::{mse_loss, sgd_update, ParamSet};
use crate::sequence::FrameSource;
use crate::tensor::Tensor;

use super::model::select_branch;

/// Frames per training batch; the template comes from the first of them.
pub const BATCH_LEN: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Cosine decay of the learning rate down to this fraction of it over
    /// the whole run; 1 keeps it constant.
    pub final_lr_fraction: f64,
    pub seed: u64,
    pub batch_len: usize,
    /// Cap on batches drawn from each sequence. `None` uses every
    /// non-overlapping run of `batch_len` frames.
    pub batches_per_sequence: Option<usize>,
    /// Range of the window-to-object size ratio sampled per axis.
    pub window_scale: (f64, f64),
    /// Centre offset bound as a fraction of the window size.
    pub center_jitter: f64,
    pub min_window: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.004,
            optimizer: Optimizer::default(),
            final_lr_fraction: 0.05,
            seed: 0,
            batch_len: BATCH_LEN,
            batches_per_sequence: None,
            window_scale: (1.5, 2.8),
            center_jitter: 0.15,
            min_window: 16.0,
        }
    }
}

/// Update rule applied after each batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Heavy-ball momentum; 0 gives the plain `p - lr * g` update.
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Optimizer::Sgd { momentum } => (0.0..1.0).contains(&momentum),
            Optimizer::Adam { beta1, beta2, epsilon } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Per-parameter optimizer state.
struct OptState {
    first: ModelParams,
    second: ModelParams,
    steps: i32,
}

impl OptState {
    fn new(params: &ModelParams) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            steps: 0,
        }
    }

    fn apply(&mut self, opt: &Optimizer, params: &mut ModelParams, grads: &ModelGrads, lr: f64) -> Result<()> {
        self.steps += 1;
        match *opt {
            Optimizer::Sgd { momentum } if momentum == 0.0 => sgd_update(params, grads, lr),
            Optimizer::Sgd { momentum } => {
                for (v, g) in self.first.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (vv, gv) in v.data_mut().iter_mut().zip(g.data()) {
                        *vv = momentum * *vv + gv;
                    }
                }
                sgd_update(params, &self.first, lr)
            }
            Optimizer::Adam { beta1, beta2, epsilon } => {
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                let m_all = self.first.tensors_mut();
                let v_all = self.second.tensors_mut();
                let mut step = grads.zeros_like();
                for (((m, v), g), d) in m_all.into_iter().zip(v_all).zip(grads.tensors()).zip(step.tensors_mut()) {
                    let (m, v, d) = (m.data_mut(), v.data_mut(), d.data_mut());
                    for (i, &gv) in g.data().iter().enumerate() {
                        if !gv.is_finite() {
                            return Err(Error::Training("non-finite gradient".into()));
                        }
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gv;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gv * gv;
                        d[i] = (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                    }
                }
                sgd_update(params, &step, lr)
            }
        }
    }
}

/// One batch: a sequence and the ordered frame indices it draws.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    pub sequence: usize,
    pub frames: Vec<usize>,
    pub seed: u64,
}

fn mix(a: u64, b: u64, c: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(a ^ b.rotate_left(21) ^ c.rotate_left(42));
    r.gen()
}

/// Deterministic batch layout for a dataset with the given sequence
/// lengths. Short sequences are filled by sampling frames with replacement
/// (kept in temporal order).
pub fn plan_batches(lengths: &[usize], cfg: &TrainConfig) -> Vec<BatchPlan> {
    let n = cfg.batch_len;
    let mut plans = Vec::new();
    for (s, &len) in lengths.iter().enumerate() {
        if len == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, s as u64, 0xBA7C));
        if len < n {
            let mut frames: Vec<usize> = (0..n).map(|_| rng.gen_range(0..len)).collect();
            frames.sort_unstable();
            frames[0] = 0;
            plans.push(BatchPlan { sequence: s, frames, seed: rng.gen() });
            continue;
        }
        let full = len / n;
        let starts: Vec<usize> = match cfg.batches_per_sequence {
            Some(k) if k < full => (0..k).map(|_| rng.gen_range(0..=len - n)).collect(),
            _ => (0..full).map(|b| b * n).collect(),
        };
        for start in starts {
            plans.push(BatchPlan {
                sequence: s,
                frames: (start..start + n).collect(),
                seed: rng.gen(),
            });
        }
    }
    plans
}

/// The box region, as the window [`template_crop`] samples.
pub fn template_window(bbox: &BBox) -> Window {
    let (cx, cy) = bbox.center();
    Window::new(cx, cy, bbox.w.max(1.0), bbox.h.max(1.0))
}

/// Square crop of the box region resized to the template resolution.
pub fn template_crop(frame: &Image, bbox: &BBox, size: usize) -> Image {
    crop_and_resize(frame, &template_window(bbox), size)
}

/// Training window around a ground-truth box: jittered centre, per-axis
/// size ratio drawn from `window_scale`.
pub fn sample_window(gt: &BBox, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Window {
    let (lo, hi) = cfg.window_scale;
    let w = (gt.w * rng.gen_range(lo..=hi)).max(cfg.min_window);
    let h = (gt.h * rng.gen_range(lo..=hi)).max(cfg.min_window);
    let j = cfg.center_jitter;
    let (cx, cy) = gt.center();
    Window::new(
        cx + rng.gen_range(-j..=j) * w,
        cy + rng.gen_range(-j..=j) * h,
        w,
        h,
    )
}

/// Mean loss of one batch and its gradient (mean over frames).
pub fn batch_gradient<S: FrameSource>(
    params: &ModelParams,
    source: &S,
    plan: &BatchPlan,
    cfg: &TrainConfig,
) -> Result<(f64, ModelGrads)> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let first = plan.frames[0];
    let tpl = source.crop(first, &template_window(&source.gt_box(first)), params.template_input())?;
    let (tf, t_trace) = encode_template_traced(params, &tpl)?;

    let mut grads = params.zeros_like();
    let mut g_template = Tensor::zeros(tf.features().shape());
    let scale = 1.0 / plan.frames.len() as f64;
    let mut total = 0.0;
    for &fi in &plan.frames {
        let gt = source.gt_box(fi);
        let window = sample_window(&gt, cfg, &mut rng);
        let branch = select_branch(window.w, window.h);
        let crop = source.crop(fi, &window, branch.input_size())?;
        let target = rasterize_gt(&gt, &window)?.to_tensor().reshape(&[1, 28, 28])?;

        let trace = forward_traced(params, &crop, &tf, branch)?;
        let (loss, mut g) = mse_loss(&trace.output, &target)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss on sequence {} ({}), frame {fi}, branch {branch}",
                plan.sequence,
                source.name()
            )));
        }
        total += loss;
        for v in g.data_mut() {
            *v *= scale;
        }
        let gt_feat = backward(params, &trace, &g, &mut grads)?;
        g_template.add_scaled(&gt_feat, 1.0)?;
    }
    template_backward(params, &t_trace, &g_template, &mut grads)?;
    Ok((total * scale, grads))
}

/// Trains `params` in place; returns the mean batch loss of every epoch.
pub fn train_with_progress<S: FrameSource>(
    params: &mut ModelParams,
    dataset: &[S],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::Param(format!("invalid learning rate {}", cfg.learning_rate)));
    }
    cfg.optimizer.validate()?;
    if cfg.batch_len == 0 {
        return Err(Error::Param("batch length must be positive".into()));
    }
    let lengths: Vec<usize> = dataset.iter().map(|s| s.len()).collect();
    let plans = plan_batches(&lengths, cfg);
    if plans.is_empty() {
        return Err(Error::Param("dataset has no frames".into()));
    }

    if !(0.0..=1.0).contains(&cfg.final_lr_fraction) {
        return Err(Error::Param(format!("final lr fraction {} outside [0, 1]", cfg.final_lr_fraction)));
    }
    let mut state = OptState::new(params);
    let total_steps = (cfg.epochs * plans.len()).max(1) as f64;
    let mut step = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..plans.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64, 0x0DE5)));
        let mut losses = vec![0.0; plans.len()];
        for &bi in &order {
            let plan = &plans[bi];
            let (loss, grads) = batch_gradient(params, &dataset[plan.sequence], plan, cfg)
                .map_err(|e| match e {
                    Error::Training(msg) => Error::Training(format!("epoch {epoch}: {msg}")),
                    other => other,
                })?;
            losses[bi] = loss;
            let progress = step as f64 / total_steps;
            let f = cfg.final_lr_fraction;
            let lr = cfg.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
            state.apply(&cfg.optimizer, params, &grads, lr)?;
            step += 1;
        }
        // canonical order so the mean does not depend on the shuffle
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok(history)
}

/// Trains a copy of `params`.
pub fn train<S: FrameSource>(
    params: &ModelParams,
    dataset: &[S],
    cfg: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    let mut p = params.clone();
    let history = train_with_progress(&mut p, dataset, cfg, |_, _| {})?;
    Ok((p, history))
}

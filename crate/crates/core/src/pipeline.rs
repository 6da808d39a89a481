//! Per-sequence tracking loop: crop the window, extract the RoI matrix,
//! step the controller, optionally refresh the template.

use crate::controller::{self, ControllerConfig, SizeEstimate, Window, WindowBounds};
use crate::error::{Error, Result};
use crate::extractor::{
    encode_template, extract_roi_matrix, select_branch_with, template_crop, BranchId, ModelParams,
    TemplateFeatures, MEDIUM_BRANCH_MAX, SMALL_BRANCH_MAX,
};
use crate::grid::RoiMatrix;
use crate::image::{crop_and_resize, Image};
use crate::metric::{heatmap_iou, rasterize_gt, BBox, SequenceScore};
use crate::sequence::FrameSource;
use crate::synth::oracle_heatmap;

pub use crate::image::crop_and_resize as crop_window;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub grow_threshold: f64,
    pub shrink_threshold: f64,
    pub grow_factor: f64,
    pub shrink_factor: f64,
    pub bin_threshold: f64,
    pub activity_threshold: f64,
    /// Re-encode the template every `n` frames; 0 keeps the first one.
    pub template_update_period: usize,
    pub small_branch_max: f64,
    pub medium_branch_max: f64,
    pub min_window: f64,
    /// Maximum window size as a multiple of the frame size.
    pub max_window_factor: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let c = ControllerConfig::default();
        Self {
            grow_threshold: c.grow_threshold,
            shrink_threshold: c.shrink_threshold,
            grow_factor: c.grow_factor,
            shrink_factor: c.shrink_factor,
            bin_threshold: c.bin_threshold,
            activity_threshold: c.activity_threshold,
            template_update_period: 0,
            small_branch_max: SMALL_BRANCH_MAX,
            medium_branch_max: MEDIUM_BRANCH_MAX,
            min_window: WindowBounds::DEFAULT_MIN,
            max_window_factor: WindowBounds::DEFAULT_FRAME_MULTIPLE,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.shrink_threshold && self.shrink_threshold < self.grow_threshold && self.grow_threshold < 1.0) {
            return Err(Error::Param(format!(
                "thresholds must satisfy 0 < shrink ({}) < grow ({}) < 1",
                self.shrink_threshold, self.grow_threshold
            )));
        }
        if !(self.grow_factor > 0.0 && self.shrink_factor > 0.0) {
            return Err(Error::Param("scale factors must be positive".into()));
        }
        if !(self.bin_threshold > 0.0 && self.bin_threshold < 1.0) {
            return Err(Error::Param(format!("bin threshold {} outside (0, 1)", self.bin_threshold)));
        }
        if !(self.min_window > 0.0 && self.max_window_factor > 0.0) {
            return Err(Error::Param("window bounds must be positive".into()));
        }
        if self.small_branch_max > self.medium_branch_max {
            return Err(Error::Param("branch thresholds out of order".into()));
        }
        Ok(())
    }

    pub fn bounds(&self, frame_w: usize, frame_h: usize) -> WindowBounds {
        WindowBounds {
            min_w: self.min_window,
            min_h: self.min_window,
            max_w: (frame_w as f64 * self.max_window_factor).max(self.min_window),
            max_h: (frame_h as f64 * self.max_window_factor).max(self.min_window),
        }
    }

    pub fn controller(&self, frame_w: usize, frame_h: usize) -> ControllerConfig {
        ControllerConfig {
            grow_threshold: self.grow_threshold,
            shrink_threshold: self.shrink_threshold,
            grow_factor: self.grow_factor,
            shrink_factor: self.shrink_factor,
            bin_threshold: self.bin_threshold,
            activity_threshold: self.activity_threshold,
            bounds: self.bounds(frame_w, frame_h),
        }
    }

    pub fn branch_for(&self, window: &Window) -> BranchId {
        select_branch_with(window.w, window.h, self.small_branch_max, self.medium_branch_max)
    }
}

/// What an extractor sees for one frame.
pub struct ExtractRequest<'a> {
    pub crop: &'a Image,
    pub branch: BranchId,
    pub template: &'a TemplateFeatures,
    pub window: Window,
    pub frame_index: usize,
}

/// Anything that turns a window crop into a RoI matrix.
pub trait RoiSource {
    fn template_size(&self) -> usize;
    fn encode_template(&self, template: &Image) -> Result<TemplateFeatures>;
    fn extract(&self, request: &ExtractRequest<'_>) -> Result<RoiMatrix>;
}

impl RoiSource for ModelParams {
    fn template_size(&self) -> usize {
        self.template_input()
    }

    fn encode_template(&self, template: &Image) -> Result<TemplateFeatures> {
        encode_template(self, template)
    }

    fn extract(&self, request: &ExtractRequest<'_>) -> Result<RoiMatrix> {
        extract_roi_matrix(self, request.crop, request.template, request.branch)
    }
}

/// Perfect extractor: rasterises the ground-truth box of the requested
/// frame into the current window.
#[derive(Debug, Clone)]
pub struct OracleSource {
    boxes: Vec<BBox>,
}

impl OracleSource {
    pub fn new(boxes: Vec<BBox>) -> Self {
        Self { boxes }
    }

    pub fn from_sequence<S: FrameSource + ?Sized>(seq: &S) -> Self {
        Self::new((0..seq.len()).map(|i| seq.gt_box(i)).collect())
    }
}

impl RoiSource for OracleSource {
    fn template_size(&self) -> usize {
        8
    }

    fn encode_template(&self, _template: &Image) -> Result<TemplateFeatures> {
        Ok(TemplateFeatures::empty())
    }

    fn extract(&self, request: &ExtractRequest<'_>) -> Result<RoiMatrix> {
        let b = self.boxes.get(request.frame_index).ok_or_else(|| {
            Error::Param(format!("oracle has no box for frame {}", request.frame_index))
        })?;
        Ok(oracle_heatmap(b, &request.window))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub window: Window,
    pub template: TemplateFeatures,
    pub frame_index: usize,
    pub lost: bool,
    pub last_estimate: Option<SizeEstimate>,
    /// Most recent confident prediction.
    pub last_box: BBox,
    frame_size: (usize, usize),
}

impl TrackerState {
    pub fn frame_size(&self) -> (usize, usize) {
        self.frame_size
    }
}

/// Result of tracking one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame_index: usize,
    pub pred_box: BBox,
    pub roi: RoiMatrix,
    /// The window the RoI matrix was extracted from.
    pub window: Window,
    pub branch: BranchId,
    pub lost: bool,
}

/// Centres a window of twice the box size on the box and encodes the
/// template from the box crop.
pub fn init_tracker<R: RoiSource + ?Sized>(
    source: &R,
    first_frame: &Image,
    init_box: &BBox,
    config: &TrackerConfig,
) -> Result<TrackerState> {
    config.validate()?;
    if !(init_box.w > 0.0 && init_box.h > 0.0) || !(init_box.x.is_finite() && init_box.y.is_finite()) {
        return Err(Error::Param(format!("initial box must have positive area, got {init_box:?}")));
    }
    let (cx, cy) = init_box.center();
    let bounds = config.bounds(first_frame.width(), first_frame.height());
    let window = bounds.clamp(Window::new(cx, cy, 2.0 * init_box.w, 2.0 * init_box.h));
    let tpl = template_crop(first_frame, init_box, source.template_size());
    Ok(TrackerState {
        window,
        template: source.encode_template(&tpl)?,
        frame_index: 0,
        lost: false,
        last_estimate: None,
        last_box: *init_box,
        frame_size: (first_frame.width(), first_frame.height()),
    })
}

/// Tracks the next frame and advances the state.
pub fn track_frame<R: RoiSource + ?Sized>(
    state: &mut TrackerState,
    frame: &Image,
    source: &R,
    config: &TrackerConfig,
) -> Result<FrameOutput> {
    if (frame.width(), frame.height()) != state.frame_size {
        return Err(Error::Param(format!(
            "frame size changed from {:?} to {}x{}",
            state.frame_size,
            frame.width(),
            frame.height()
        )));
    }
    let frame_index = state.frame_index + 1;
    let window = state.window;
    let branch = config.branch_for(&window);
    let crop = crop_and_resize(frame, &window, branch.input_size());
    let roi = source.extract(&ExtractRequest {
        crop: &crop,
        branch,
        template: &state.template,
        window,
        frame_index,
    })?;

    let ctrl = config.controller(state.frame_size.0, state.frame_size.1);
    let outcome = controller::step(&window, &roi, &ctrl);
    if !outcome.lost {
        let w = outcome.window;
        state.last_box = BBox::from_center(w.cx, w.cy, outcome.estimate.obj_w, outcome.estimate.obj_h);
        state.last_estimate = Some(outcome.estimate);
    }
    state.window = outcome.window;
    state.lost = outcome.lost;
    state.frame_index = frame_index;

    let n = config.template_update_period;
    if n > 0 && frame_index % n == 0 && !outcome.lost {
        let tpl = template_crop(frame, &state.last_box, source.template_size());
        state.template = source.encode_template(&tpl)?;
    }

    Ok(FrameOutput {
        frame_index,
        pred_box: state.last_box,
        roi,
        window,
        branch,
        lost: outcome.lost,
    })
}

/// Everything a tracking run over one sequence produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRun {
    /// One box per frame; frame 0 is the initialisation box.
    pub boxes: Vec<BBox>,
    /// Per tracked frame (1..len).
    pub frames: Vec<FrameOutput>,
    pub score: SequenceScore,
}

/// Initialises on the first ground-truth box and tracks every later frame,
/// scoring each RoI matrix against the ground truth rasterised in the same
/// window.
pub fn run_sequence<R: RoiSource + ?Sized, S: FrameSource + ?Sized>(
    source: &R,
    seq: &S,
    config: &TrackerConfig,
) -> Result<SequenceRun> {
    if seq.is_empty() {
        return Err(Error::Param(format!("sequence {} is empty", seq.name())));
    }
    let first = seq.frame(0)?;
    let init = seq.gt_box(0);
    let mut state = init_tracker(source, &first, &init, config)?;
    drop(first);

    let mut boxes = vec![init];
    let mut frames = Vec::with_capacity(seq.len().saturating_sub(1));
    let mut scores = Vec::with_capacity(seq.len().saturating_sub(1));
    let mut empty = 0;
    for t in 1..seq.len() {
        let frame = seq.frame(t)?;
        let out = track_frame(&mut state, &frame, source, config)?;
        let gt = rasterize_gt(&seq.gt_box(t), &out.window)?;
        if gt.count() == 0 && out.roi.sum() == 0.0 {
            empty += 1;
        }
        scores.push(heatmap_iou(&gt, &out.roi));
        boxes.push(out.pred_box);
        frames.push(out);
    }
    Ok(SequenceRun {
        boxes,
        frames,
        score: SequenceScore::from_scores(seq.name(), 1, scores, empty),
    })
}

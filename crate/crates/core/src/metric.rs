//! Ground-truth rasterisation onto the RoI grid, the soft heatmap-overlap
//! score, overlap/IoU conversion and score aggregation.

use crate::controller::Window;
use crate::error::{Error, Result};
use crate::grid::{GtMatrix, RoiMatrix, GRID};

/// Axis-aligned box in frame pixels, `(x, y)` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Plain box intersection-over-union.
    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let ih = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        let inter = iw.max(0.0) * ih.max(0.0);
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

/// Tolerance on the half-cell coverage test, so exact halves computed with
/// rounding noise still count.
const COVERAGE_SLACK: f64 = 1e-9;

/// Marks every grid cell of `window` that the box covers by at least half
/// of the cell's area.
pub fn rasterize_gt(bbox: &BBox, window: &Window) -> Result<GtMatrix> {
    if !(window.w > 0.0 && window.h > 0.0) {
        return Err(Error::Param(format!(
            "window must have positive size, got {}x{}",
            window.w, window.h
        )));
    }
    let cw = window.w / GRID as f64;
    let ch = window.h / GRID as f64;
    let gx0 = (bbox.x - window.left()) / cw;
    let gx1 = (bbox.x + bbox.w - window.left()) / cw;
    let gy0 = (bbox.y - window.top()) / ch;
    let gy1 = (bbox.y + bbox.h - window.top()) / ch;
    let cover = |lo: f64, hi: f64, i: usize| -> f64 {
        let a = lo.max(i as f64);
        let b = hi.min(i as f64 + 1.0);
        (b - a).clamp(0.0, 1.0)
    };
    let xs: Vec<f64> = (0..GRID).map(|c| cover(gx0, gx1, c)).collect();
    let ys: Vec<f64> = (0..GRID).map(|r| cover(gy0, gy1, r)).collect();
    Ok(GtMatrix::from_fn(|r, c| xs[c] * ys[r] >= 0.5 - COVERAGE_SLACK))
}

/// Soft overlap `(P.Q) / (P.1 - P.Q + Q.1)` between a binary ground truth
/// and a heatmap; 0 when both are empty.
pub fn heatmap_iou(gt: &GtMatrix, pred: &RoiMatrix) -> f64 {
    let mut dot = 0.0;
    let mut gt_mass = 0.0;
    let mut pred_mass = 0.0;
    for (&g, &p) in gt.as_slice().iter().zip(pred.as_slice()) {
        if g {
            dot += p;
            gt_mass += 1.0;
        }
        pred_mass += p;
    }
    let denom = gt_mass - dot + pred_mass;
    if denom > 0.0 {
        dot / denom
    } else {
        0.0
    }
}

/// Mutual-overlap fraction to intersection-over-union: `o / (2 - o)`.
pub fn overlap_to_iou(o: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&o), "overlap {o} outside [0, 1]");
    o / (2.0 - o)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Per-frame scores of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceScore {
    pub name: String,
    /// Frame index of the first score (frame 0 only initialises the tracker).
    pub first_frame: usize,
    pub frame_scores: Vec<f64>,
    pub mean: f64,
    /// Frames where both matrices were empty and scored 0.
    pub empty_frames: usize,
}

impl SequenceScore {
    pub fn from_scores(name: impl Into<String>, first_frame: usize, frame_scores: Vec<f64>, empty_frames: usize) -> Self {
        Self {
            name: name.into(),
            first_frame,
            mean: mean(&frame_scores),
            frame_scores,
            empty_frames,
        }
    }

    pub fn tracked_frames(&self) -> usize {
        self.frame_scores.len()
    }

    /// No frame was scored (a one-frame sequence only initialises).
    pub fn is_empty(&self) -> bool {
        self.frame_scores.is_empty()
    }
}

/// Scores paired ground-truth and predicted matrices frame by frame.
pub fn score_sequence(name: &str, gt: &[GtMatrix], preds: &[RoiMatrix]) -> Result<SequenceScore> {
    if gt.len() != preds.len() {
        return Err(Error::Param(format!(
            "count mismatch: {} ground-truth frames vs {} predictions",
            gt.len(),
            preds.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::Param("cannot score an empty sequence".into()));
    }
    let mut empty = 0;
    let scores = gt
        .iter()
        .zip(preds)
        .map(|(g, p)| {
            if g.count() == 0 && p.sum() == 0.0 {
                empty += 1;
            }
            heatmap_iou(g, p)
        })
        .collect();
    Ok(SequenceScore::from_scores(name, 0, scores, empty))
}

/// Dataset-level aggregate: the dataset mean is the mean of the
/// per-sequence means.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub sequences: Vec<SequenceScore>,
    pub dataset_mean: f64,
    pub frame_count: usize,
}

impl ScoreReport {
    pub fn new(sequences: Vec<SequenceScore>) -> Self {
        let scored: Vec<f64> = sequences.iter().filter(|s| !s.is_empty()).map(|s| s.mean).collect();
        Self {
            dataset_mean: mean(&scored),
            frame_count: sequences.iter().map(|s| s.tracked_frames()).sum(),
            sequences,
        }
    }

    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<24} {:>8} {:>10}\n", "sequence", "frames", "mean");
        for s in &self.sequences {
            let flag = if s.is_empty() { "  (no tracked frames)" } else { "" };
            out += &format!("{:<24} {:>8} {:>10.4}{flag}\n", s.name, s.tracked_frames(), s.mean);
        }
        out += &format!("{:<24} {:>8} {:>10.4}\n", "dataset", self.frame_count, self.dataset_mean);
        out
    }
}

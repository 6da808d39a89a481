//! Geometric window control driven by the RoI matrix: quadrant direction
//! matrix, window translation, object-size read-out and per-axis window
//! rescaling.

use std::f64::consts::SQRT_2;

use crate::grid::{RoiMatrix, GRID};

/// Quadrant size of the direction matrix pooling.
pub const QUADRANT: usize = GRID / 2;
const EPS: f64 = 1e-9;

/// Search region in frame pixels. May extend past the frame borders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Window {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).abs() <= self.w / 2.0 && (y - self.cy).abs() <= self.h / 2.0
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.cx.is_finite() && self.cy.is_finite()
    }
}

/// Per-axis window size limits in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowBounds {
    pub min_w: f64,
    pub min_h: f64,
    pub max_w: f64,
    pub max_h: f64,
}

impl WindowBounds {
    pub const DEFAULT_MIN: f64 = 16.0;
    pub const DEFAULT_FRAME_MULTIPLE: f64 = 4.0;

    /// 16 px minimum, four times the frame as maximum.
    pub fn for_frame(frame_w: usize, frame_h: usize) -> Self {
        Self {
            min_w: Self::DEFAULT_MIN,
            min_h: Self::DEFAULT_MIN,
            max_w: frame_w as f64 * Self::DEFAULT_FRAME_MULTIPLE,
            max_h: frame_h as f64 * Self::DEFAULT_FRAME_MULTIPLE,
        }
    }

    pub fn clamp(&self, mut window: Window) -> Window {
        window.w = window.w.clamp(self.min_w, self.max_w);
        window.h = window.h.clamp(self.min_h, self.max_h);
        window
    }
}

impl Default for WindowBounds {
    fn default() -> Self {
        Self {
            min_w: Self::DEFAULT_MIN,
            min_h: Self::DEFAULT_MIN,
            max_w: f64::INFINITY,
            max_h: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub grow_threshold: f64,
    pub shrink_threshold: f64,
    pub grow_factor: f64,
    pub shrink_factor: f64,
    /// Cells at or above this value count as object when measuring size.
    pub bin_threshold: f64,
    /// Minimum heatmap mass (sum over all cells) for a confident detection.
    pub activity_threshold: f64,
    pub bounds: WindowBounds,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            grow_threshold: 0.75,
            shrink_threshold: 0.25,
            grow_factor: SQRT_2,
            shrink_factor: SQRT_2 / 2.0,
            bin_threshold: 0.5,
            activity_threshold: 2.0,
            bounds: WindowBounds::default(),
        }
    }
}

/// 2x2 quadrant means of a RoI matrix: `[[top-left, top-right],
/// [bottom-left, bottom-right]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionMatrix(pub [[f64; 2]; 2]);

impl DirectionMatrix {
    pub fn left(&self) -> f64 {
        self.0[0][0] + self.0[1][0]
    }

    pub fn right(&self) -> f64 {
        self.0[0][1] + self.0[1][1]
    }

    pub fn top(&self) -> f64 {
        self.0[0][0] + self.0[0][1]
    }

    pub fn bottom(&self) -> f64 {
        self.0[1][0] + self.0[1][1]
    }

    pub fn mean(&self) -> f64 {
        (self.left() + self.right()) / 4.0
    }

    /// Total mass of the source RoI matrix (sum over its cells).
    pub fn mass(&self) -> f64 {
        (self.left() + self.right()) * (QUADRANT * QUADRANT) as f64
    }
}

/// Quadrant means of the RoI matrix: `avg_pool` with kernel and stride 14.
///
/// Each quadrant is summed in mirror-symmetric pairs, so flipping the input
/// permutes the entries bit-exactly.
pub fn direction_matrix(roi: &RoiMatrix) -> DirectionMatrix {
    const Q: usize = QUADRANT;
    let mut out = [[0.0; 2]; 2];
    for (qi, row) in out.iter_mut().enumerate() {
        for (qj, cell) in row.iter_mut().enumerate() {
            let at = |r: usize, c: usize| roi.get(qi * Q + r, qj * Q + c);
            let mut sum = 0.0;
            for r in 0..Q / 2 {
                for c in 0..Q / 2 {
                    let top = at(r, c) + at(r, Q - 1 - c);
                    let bottom = at(Q - 1 - r, c) + at(Q - 1 - r, Q - 1 - c);
                    sum += top + bottom;
                }
            }
            *cell = sum / (Q * Q) as f64;
        }
    }
    DirectionMatrix(out)
}

/// Window translation for the next frame, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Movement {
    pub dx: f64,
    pub dy: f64,
    /// Heatmap mass was below the activity threshold; `dx`/`dy` are zero.
    pub lost: bool,
}

/// Normalised left/right and top/bottom mass imbalance scaled by a quarter
/// of the window width (`lambda`) and height (`mu`).
pub fn movement(d: &DirectionMatrix, window: &Window, activity_threshold: f64) -> Movement {
    if d.mass() < activity_threshold {
        return Movement {
            dx: 0.0,
            dy: 0.0,
            lost: true,
        };
    }
    let lambda = window.w / 4.0;
    let mu = window.h / 4.0;
    let (l, r, t, b) = (d.left(), d.right(), d.top(), d.bottom());
    Movement {
        dx: lambda * (r - l) / (r + l + EPS),
        dy: mu * (b - t) / (t + b + EPS),
        lost: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeEstimate {
    pub obj_w: f64,
    pub obj_h: f64,
    /// Sum of the raw heatmap.
    pub mass: f64,
    /// No cell reached the binarisation threshold.
    pub empty: bool,
}

/// Object extent from the binarised heatmap: the widest row and the tallest
/// column, scaled to window pixels.
pub fn estimate_object_size(roi: &RoiMatrix, window: &Window, bin_threshold: f64) -> SizeEstimate {
    let mut col_sums = [0usize; GRID];
    let mut max_row = 0usize;
    for r in 0..GRID {
        let mut row = 0;
        for (c, col) in col_sums.iter_mut().enumerate() {
            if roi.get(r, c) >= bin_threshold {
                row += 1;
                *col += 1;
            }
        }
        max_row = max_row.max(row);
    }
    let max_col = col_sums.iter().copied().max().unwrap_or(0);
    SizeEstimate {
        obj_w: max_row as f64 / GRID as f64 * window.w,
        obj_h: max_col as f64 / GRID as f64 * window.h,
        mass: roi.sum(),
        empty: max_row == 0,
    }
}

fn rescale_axis(size: f64, obj: f64, cfg: &ControllerConfig) -> f64 {
    let ratio = obj / size;
    if ratio > cfg.grow_threshold {
        size * cfg.grow_factor
    } else if ratio < cfg.shrink_threshold {
        size * cfg.shrink_factor
    } else {
        size
    }
}

/// Grows an axis whose object ratio is above the grow threshold and shrinks
/// one below the shrink threshold; axes are independent and the centre is
/// kept.
pub fn update_window_size(window: &Window, est: &SizeEstimate, cfg: &ControllerConfig) -> Window {
    cfg.bounds.clamp(Window {
        w: rescale_axis(window.w, est.obj_w, cfg),
        h: rescale_axis(window.h, est.obj_h, cfg),
        ..*window
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub window: Window,
    pub estimate: SizeEstimate,
    pub movement: Movement,
    pub lost: bool,
}

/// One control update: move towards the heatmap mass, then adapt the
/// window size. A lost frame (low mass or nothing above the binarisation
/// threshold) holds the window in place.
pub fn step(window: &Window, roi: &RoiMatrix, cfg: &ControllerConfig) -> StepOutcome {
    let d = direction_matrix(roi);
    let mv = movement(&d, window, cfg.activity_threshold);
    let estimate = estimate_object_size(roi, window, cfg.bin_threshold);
    let lost = mv.lost || estimate.empty;
    if lost {
        return StepOutcome {
            window: *window,
            estimate,
            movement: mv,
            lost,
        };
    }
    let moved = Window {
        cx: window.cx + mv.dx,
        cy: window.cy + mv.dy,
        ..*window
    };
    StepOutcome {
        window: update_window_size(&moved, &estimate, cfg),
        estimate,
        movement: mv,
        lost,
    }
}

/// Binary block of ones over rows `r0..r1`, columns `c0..c1`.
pub fn block_roi(r0: usize, r1: usize, c0: usize, c1: usize) -> RoiMatrix {
    RoiMatrix::from_fn(|r, c| {
        if (r0..r1).contains(&r) && (c0..c1).contains(&c) {
            1.0
        } else {
            0.0
        }
    })
}


#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Binary RoI with the requested number of ones in each quadrant.
    fn quadrant_counts(counts: [[usize; 2]; 2]) -> RoiMatrix {
        let mut m = RoiMatrix::zeros();
        for (qi, row) in counts.iter().enumerate() {
            for (qj, &n) in row.iter().enumerate() {
                for k in 0..n {
                    m.set(qi * QUADRANT + k / QUADRANT, qj * QUADRANT + k % QUADRANT, 1.0);
                }
            }
        }
        m
    }

    #[test]
    fn direction_equals_avg_pool() {
        let roi = RoiMatrix::from_fn(|r, c| ((r * 31 + c * 17) % 29) as f64 / 29.0);
        let pooled = crate::nn::avg_pool(&roi.to_tensor(), 14, 14).unwrap();
        let d = direction_matrix(&roi);
        for (a, b) in d.0.iter().flatten().zip(pooled.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn direction_of_trivial_maps() {
        assert_eq!(direction_matrix(&RoiMatrix::zeros()).0, [[0.0; 2]; 2]);
        let d = direction_matrix(&RoiMatrix::filled(0.3));
        assert!(d.0.iter().flatten().all(|&v| approx(v, 0.3, 1e-15)));
    }

    #[test]
    fn direction_from_quadrant_counts() {
        let d = direction_matrix(&quadrant_counts([[49, 56], [56, 64]]));
        assert_eq!(d.0[0][0], 0.25);
        assert!(approx(d.0[0][1], 0.2857143, 5e-8));
        assert!(approx(d.0[1][0], 0.2857143, 5e-8));
        assert!(approx(d.0[1][1], 0.3265306, 5e-8));
        assert_eq!(d.0[0][1], 56.0 / 196.0);
        assert_eq!(d.0[1][1], 64.0 / 196.0);
    }

    #[test]
    fn movement_examples() {
        let win = Window::new(0.0, 0.0, 112.0, 112.0);
        let m = movement(&DirectionMatrix([[0.3; 2]; 2]), &win, 2.0);
        assert_eq!((m.dx, m.dy, m.lost), (0.0, 0.0, false));

        let m = movement(&DirectionMatrix([[0.0, 0.5], [0.0, 0.5]]), &win, 2.0);
        assert!(approx(m.dx, 28.0, 1e-6));
        assert_eq!(m.dy, 0.0);

        let m = movement(
            &DirectionMatrix([[0.25, 0.2857143], [0.2857143, 0.3265306]]),
            &win,
            2.0,
        );
        // 28 * 0.0765306 / 1.1479592
        assert!(approx(m.dx, 1.866666, 1e-3), "{}", m.dx);
        assert!(approx(m.dy, 1.866666, 1e-3), "{}", m.dy);
        assert!(m.dx > 0.0 && m.dy > 0.0);
    }

    #[test]
    fn low_mass_is_lost() {
        let win = Window::new(0.0, 0.0, 100.0, 100.0);
        let roi = block_roi(0, 1, 0, 1);
        let m = movement(&direction_matrix(&roi), &win, 2.0);
        assert!(m.lost);
        assert_eq!((m.dx, m.dy), (0.0, 0.0));
    }

    #[test]
    fn size_examples() {
        let win = Window::new(0.0, 0.0, 112.0, 112.0);
        let e = estimate_object_size(&RoiMatrix::zeros(), &win, 0.5);
        assert_eq!((e.obj_w, e.obj_h), (0.0, 0.0));
        assert!(e.empty);

        let e = estimate_object_size(&RoiMatrix::filled(1.0), &win, 0.5);
        assert_eq!((e.obj_w, e.obj_h), (112.0, 112.0));

        let e = estimate_object_size(&block_roi(3, 13, 5, 11), &win, 0.5);
        assert!(approx(e.obj_h, 40.0, 1e-12));
        assert!(approx(e.obj_w, 24.0, 1e-12));
    }

    #[test]
    fn window_size_rules() {
        let cfg = ControllerConfig::default();
        let win = Window::new(10.0, 20.0, 100.0, 100.0);
        let est = |w: f64| SizeEstimate {
            obj_w: w,
            obj_h: 50.0,
            mass: 100.0,
            empty: false,
        };
        let grown = update_window_size(&win, &est(80.0), &cfg);
        assert!(approx(grown.w, 141.4214, 1e-4));
        assert_eq!(grown.h, 100.0);
        assert_eq!((grown.cx, grown.cy), (10.0, 20.0));
        assert!(approx(update_window_size(&win, &est(20.0), &cfg).w, 70.7107, 1e-4));
        assert_eq!(update_window_size(&win, &est(50.0), &cfg).w, 100.0);
    }

    #[test]
    fn grow_then_shrink_round_trips() {
        let cfg = ControllerConfig::default();
        let win = Window::new(0.0, 0.0, 100.0, 60.0);
        let big = SizeEstimate { obj_w: 90.0, obj_h: 30.0, mass: 1.0, empty: false };
        let grown = update_window_size(&win, &big, &cfg);
        let small = SizeEstimate { obj_w: 10.0, obj_h: 30.0, mass: 1.0, empty: false };
        let back = update_window_size(&grown, &small, &cfg);
        assert!(approx(back.w, 100.0, 1e-9));
    }

    #[test]
    fn centred_blob_is_a_fixed_point() {
        let cfg = ControllerConfig::default();
        let win = Window::new(50.0, 60.0, 80.0, 80.0);
        let out = step(&win, &block_roi(7, 21, 7, 21), &cfg);
        assert!(!out.lost);
        assert_eq!(out.window, win);
    }

    #[test]
    fn lost_frame_holds_position() {
        let cfg = ControllerConfig::default();
        let win = Window::new(50.0, 60.0, 80.0, 80.0);
        let out = step(&win, &RoiMatrix::filled(0.001), &cfg);
        assert!(out.lost);
        assert_eq!(out.window, win);
    }

    #[test]
    fn bounds_clamp_growth_and_shrink() {
        let mut cfg = ControllerConfig::default();
        cfg.bounds.max_w = 120.0;
        let win = Window::new(0.0, 0.0, 100.0, 17.0);
        let est = SizeEstimate { obj_w: 99.0, obj_h: 1.0, mass: 1.0, empty: false };
        let out = update_window_size(&win, &est, &cfg);
        assert_eq!(out.w, 120.0);
        assert_eq!(out.h, 16.0);
    }
}

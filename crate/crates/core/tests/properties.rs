use proptest::prelude::*;

use roitrack::controller::{
    direction_matrix, estimate_object_size, movement, step, update_window_size, ControllerConfig, SizeEstimate,
    Window,
};
use roitrack::extractor::{build_model, read_model, write_model};
use roitrack::grid::{GtMatrix, RoiMatrix, GRID};
use roitrack::metric::{heatmap_iou, overlap_to_iou, rasterize_gt, BBox};
use roitrack::nn::{sgd_step, sigmoid_scalar};
use roitrack::synth::{color_distance, Scene, SceneConfig};
use roitrack::FrameSource;

fn roi_strategy() -> impl Strategy<Value = RoiMatrix> {
    prop::collection::vec(0.0f64..=1.0, GRID * GRID).prop_map(|v| RoiMatrix::from_slice(&v).unwrap())
}

fn binary_strategy() -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), GRID * GRID)
}

fn gt_from(bits: &[bool]) -> GtMatrix {
    GtMatrix::from_fn(|r, c| bits[r * GRID + c])
}

fn window_strategy() -> impl Strategy<Value = Window> {
    (-50.0f64..300.0, -50.0f64..300.0, 16.0f64..400.0, 16.0f64..400.0).prop_map(|(x, y, w, h)| Window::new(x, y, w, h))
}

proptest! {
    #[test]
    fn direction_preserves_mean(roi in roi_strategy()) {
        let d = direction_matrix(&roi);
        prop_assert!((d.mean() - roi.mean()).abs() < 1e-12);
    }

    #[test]
    fn binary_direction_entries_are_multiples(bits in binary_strategy()) {
        let d = direction_matrix(&gt_from(&bits).to_roi());
        for v in d.0.iter().flatten() {
            let k = v * 196.0;
            prop_assert!((k - k.round()).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn mirror_equivariance(roi in roi_strategy(), w in window_strategy()) {
        let base = movement(&direction_matrix(&roi), &w, 0.0);
        let h = movement(&direction_matrix(&roi.flip_horizontal()), &w, 0.0);
        let v = movement(&direction_matrix(&roi.flip_vertical()), &w, 0.0);
        prop_assert_eq!(h.dx, -base.dx);
        prop_assert_eq!(h.dy, base.dy);
        prop_assert_eq!(v.dy, -base.dy);
        prop_assert_eq!(v.dx, base.dx);
    }

    #[test]
    fn movement_bounded_by_quarter_window(roi in roi_strategy(), w in window_strategy()) {
        let m = movement(&direction_matrix(&roi), &w, 0.0);
        prop_assert!(m.dx.abs() <= w.w / 4.0);
        prop_assert!(m.dy.abs() <= w.h / 4.0);
    }

    #[test]
    fn size_update_idempotent_inside_band(w in window_strategy(), ow in 1.0f64..400.0, oh in 1.0f64..400.0) {
        let cfg = ControllerConfig::default();
        let est = SizeEstimate { obj_w: ow, obj_h: oh, mass: 100.0, empty: false };
        let once = update_window_size(&w, &est, &cfg);
        let in_band = |obj: f64, size: f64| (0.25..=0.75).contains(&(obj / size));
        if in_band(ow, once.w) && in_band(oh, once.h) {
            prop_assert_eq!(update_window_size(&once, &est, &cfg), once);
        }
    }

    #[test]
    fn step_stays_finite_and_positive(roi in roi_strategy(), w in window_strategy()) {
        let cfg = ControllerConfig::default();
        let out = step(&w, &roi, &cfg);
        let n = out.window;
        prop_assert!(n.cx.is_finite() && n.cy.is_finite());
        prop_assert!(n.w >= cfg.bounds.min_w && n.h >= cfg.bounds.min_h);
        prop_assert!(n.w <= cfg.bounds.max_w && n.h <= cfg.bounds.max_h);
    }

    #[test]
    fn size_estimate_within_window(roi in roi_strategy(), w in window_strategy()) {
        let e = estimate_object_size(&roi, &w, 0.5);
        prop_assert!(e.obj_w >= 0.0 && e.obj_w <= w.w);
        prop_assert!(e.obj_h >= 0.0 && e.obj_h <= w.h);
    }

    #[test]
    fn sigmoid_open_interval_and_monotone(a in -800.0f64..800.0, b in -800.0f64..800.0) {
        let (sa, sb) = (sigmoid_scalar(a), sigmoid_scalar(b));
        prop_assert!(sa > 0.0 && sa < 1.0);
        if a < b {
            prop_assert!(sa <= sb);
        }
    }

    #[test]
    fn binary_iou_symmetric_and_bounded(a in binary_strategy(), b in binary_strategy()) {
        let (ga, gb) = (gt_from(&a), gt_from(&b));
        let ab = heatmap_iou(&ga, &gb.to_roi());
        let ba = heatmap_iou(&gb, &ga.to_roi());
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        if ga.count() > 0 {
            prop_assert_eq!(heatmap_iou(&ga, &ga.to_roi()), 1.0);
        }
        if ab == 1.0 {
            prop_assert!(ga == gb);
        }
    }

    #[test]
    fn soft_iou_bounded(a in binary_strategy(), roi in roi_strategy()) {
        let v = heatmap_iou(&gt_from(&a), &roi);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn overlap_conversion_increasing(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        if a < b {
            prop_assert!(overlap_to_iou(a) < overlap_to_iou(b));
        }
        let v = overlap_to_iou(a);
        prop_assert!(v <= a);
        if a > 0.0 {
            prop_assert!(v < a);
        }
    }

    #[test]
    fn rasterize_monotone(x in -20.0f64..120.0, y in -20.0f64..120.0, w in 1.0f64..80.0, h in 1.0f64..80.0,
                          grow in (0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0),
                          win in window_strategy()) {
        let small = rasterize_gt(&BBox::new(x, y, w, h), &win).unwrap();
        let big = BBox::new(x - grow.0, y - grow.1, w + grow.0 + grow.2, h + grow.1 + grow.3);
        let big = rasterize_gt(&big, &win).unwrap();
        for (s, b) in small.as_slice().iter().zip(big.as_slice()) {
            prop_assert!(!s || *b);
        }
    }
}

#[test]
fn overlap_conversion_fixed_points() {
    assert_eq!(overlap_to_iou(0.0), 0.0);
    assert_eq!(overlap_to_iou(1.0), 1.0);
}

#[test]
fn sgd_with_zero_rate_is_identity() {
    let p = build_model(3);
    let g = build_model(4);
    let q = sgd_step(&p, &g, 0.0).unwrap();
    assert_eq!(write_model(&q), write_model(&p));
}

#[test]
fn model_file_round_trip() {
    for seed in 0..3 {
        let p = build_model(seed);
        let bytes = write_model(&p);
        let back = read_model(&bytes).unwrap();
        assert_eq!(write_model(&back), bytes);
        assert_eq!(back, p);
    }
}

fn scene(seed: u64, similarity: f64) -> Scene {
    Scene::new(SceneConfig {
        seed,
        target_seed: seed.wrapping_mul(7919) + 1,
        similarity,
        distractors: 3,
        ..SceneConfig::default()
    })
    .unwrap()
}

#[test]
fn synthetic_velocity_bound() {
    for seed in 0..20 {
        let s = scene(seed, 0.5);
        let vmax = s.config().max_velocity;
        for pair in s.boxes().windows(2) {
            let (a, b) = (pair[0].center(), pair[1].center());
            assert!((a.0 - b.0).abs() <= vmax + 1e-9 && (a.1 - b.1).abs() <= vmax + 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let a = scene(11, 0.7);
    let b = scene(11, 0.7);
    assert_eq!(a.boxes(), b.boxes());
    for t in [0, 37, 99] {
        assert_eq!(a.frame(t).unwrap().data(), b.frame(t).unwrap().data());
    }
    assert_ne!(scene(12, 0.7).boxes(), a.boxes());
}

#[test]
fn unrelated_distractors_keep_colour_margin() {
    for seed in 0..50 {
        let s = scene(seed, 0.0);
        let t = s.target_appearance().base;
        for d in s.distractor_appearances() {
            assert!(color_distance(&d.base, &t) >= roitrack::synth::COLOR_MARGIN - 1e-12);
        }
    }
}

#[test]
fn similar_distractors_match_target_statistics() {
    // At similarity 1 distractor statistics equal the target's; at 0 they
    // are independent draws, so the mean colour gap must shrink markedly.
    let gap = |sim: f64| {
        let mut total = 0.0;
        let mut n = 0.0;
        for seed in 0..60 {
            let s = scene(seed, sim);
            let t = s.target_appearance();
            for d in s.distractor_appearances() {
                total += color_distance(&d.base, &t.base) + (d.amplitude - t.amplitude).abs();
                n += 1.0;
            }
        }
        total / n
    };
    let (g0, g1) = (gap(0.0), gap(1.0));
    assert!(g1 < 1e-12, "similarity 1 gap {g1}");
    assert!(g0 > 0.35, "similarity 0 gap {g0}");
}

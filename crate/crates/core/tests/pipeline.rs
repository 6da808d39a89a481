use roitrack::extractor::build_model;
use roitrack::image::Image;
use roitrack::metric::BBox;
use roitrack::pipeline::{init_tracker, run_sequence, track_frame, OracleSource, TrackerConfig};
use roitrack::sequence::SequenceRecord;
use roitrack::synth::{Scene, SceneConfig};
use roitrack::FrameSource;

fn blank_sequence(boxes: Vec<BBox>) -> SequenceRecord {
    let frames = vec![Image::filled(256, 256, [0.4, 0.4, 0.4]); boxes.len()];
    SequenceRecord::new("blank", frames, boxes).unwrap()
}

#[test]
fn oracle_follows_constant_motion() {
    let boxes: Vec<BBox> = (0..100).map(|t| BBox::new(20.0 + 2.0 * t as f64, 100.0, 24.0, 24.0)).collect();
    let seq = blank_sequence(boxes.clone());
    let run = run_sequence(&OracleSource::from_sequence(&seq), &seq, &TrackerConfig::default()).unwrap();
    for (f, b) in run.frames.iter().zip(&boxes[1..]) {
        let (cx, cy) = b.center();
        assert!(f.window.contains(cx, cy), "frame {}: {:?} vs {:?}", f.frame_index, f.window, b);
    }
}

#[test]
fn oracle_on_synthetic_scenes_scores_high() {
    for seed in 0..5 {
        let scene = Scene::new(SceneConfig {
            seed,
            target_seed: seed + 100,
            init_box: BBox::new(100.0, 100.0, 30.0, 26.0),
            ..SceneConfig::default()
        })
        .unwrap();
        let run = run_sequence(&OracleSource::from_sequence(&scene), &scene, &TrackerConfig::default()).unwrap();
        assert!(run.score.mean >= 0.8, "seed {seed}: {}", run.score.mean);
    }
}

#[test]
fn template_constant_without_refresh() {
    let scene = Scene::new(SceneConfig {
        length: 8,
        ..SceneConfig::default()
    })
    .unwrap();
    let model = build_model(1);
    let cfg = TrackerConfig::default();
    let first = scene.frame(0).unwrap();
    let mut state = init_tracker(&model, &first, &scene.gt_box(0), &cfg).unwrap();
    let initial = state.template.clone();
    for t in 1..scene.len() {
        track_frame(&mut state, &scene.frame(t).unwrap(), &model, &cfg).unwrap();
        assert_eq!(state.frame_index, t);
        assert_eq!(state.template.features().data(), initial.features().data());
    }
}

#[test]
fn tracking_is_deterministic() {
    let scene = Scene::new(SceneConfig {
        length: 6,
        seed: 9,
        ..SceneConfig::default()
    })
    .unwrap();
    let model = build_model(2);
    let cfg = TrackerConfig::default();
    let a = run_sequence(&model, &scene, &cfg).unwrap();
    let b = run_sequence(&model, &scene, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn window_stays_inside_bounds() {
    let boxes: Vec<BBox> = (0..60).map(|t| BBox::new(100.0, 100.0, 4.0 + 4.0 * t as f64, 8.0)).collect();
    let seq = blank_sequence(boxes);
    let cfg = TrackerConfig::default();
    let bounds = cfg.bounds(256, 256);
    let run = run_sequence(&OracleSource::from_sequence(&seq), &seq, &cfg).unwrap();
    for f in &run.frames {
        assert!(f.window.w >= bounds.min_w && f.window.w <= bounds.max_w);
        assert!(f.window.h >= bounds.min_h && f.window.h <= bounds.max_h);
    }
}

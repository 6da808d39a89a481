// Frame-by-frame tracking with the public state machine, comparing the
// perfect extractor with an untrained network (or a model file).
//
// `cargo run --release --example track_sequence [model.roix]`

use std::path::Path;

use roitrack::extractor::{build_model, load_model};
use roitrack::pipeline::{init_tracker, run_sequence, track_frame, OracleSource, RoiSource, TrackerConfig};
use roitrack::{FrameSource, Scene, SceneConfig};

fn track<R: RoiSource>(name: &str, source: &R, scene: &Scene, cfg: &TrackerConfig) -> roitrack::Result<()> {
    let mut state = init_tracker(source, scene.frame(0)?.as_ref(), &scene.gt_box(0), cfg)?;
    let mut lost = 0;
    for t in 1..scene.len() {
        let out = track_frame(&mut state, scene.frame(t)?.as_ref(), source, cfg)?;
        lost += out.lost as usize;
        if t % 10 == 0 {
            let gt = scene.gt_box(t);
            println!(
                "{name:<9} frame {t:>2} branch {:?} box IoU {:.3}",
                out.branch,
                out.pred_box.iou(&gt)
            );
        }
    }
    let run = run_sequence(source, scene, cfg)?;
    println!("{name:<9} lost on {lost} frames, mean heatmap IoU {:.4}", run.score.mean);
    Ok(())
}

fn run_example(model_path: Option<&Path>) -> roitrack::Result<()> {
    let scene = Scene::new(SceneConfig {
        length: 31,
        similarity: 0.7,
        seed: 21,
        ..SceneConfig::default()
    })?;
    let cfg = TrackerConfig::default();
    track("oracle", &OracleSource::from_sequence(&scene), &scene, &cfg)?;
    let model = match model_path {
        Some(p) => load_model(p)?,
        None => build_model(0),
    };
    track("network", &model, &scene, &cfg)
}

fn main() {
    let path = std::env::args_os().nth(1);
    if let Err(e) = run_example(path.as_deref().map(Path::new)) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

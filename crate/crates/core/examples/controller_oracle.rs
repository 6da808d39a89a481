// Closed-loop window control driven by perfect heatmaps on a target that
// doubles in size over 50 frames.

use roitrack::pipeline::{run_sequence, OracleSource, TrackerConfig};
use roitrack::{BBox, FrameSource, Scene, SceneConfig};

fn run_example() -> roitrack::Result<()> {
    let scene = Scene::new(SceneConfig {
        length: 51,
        scale_ramp: 1.014,
        init_box: BBox::new(110.0, 110.0, 20.0, 20.0),
        max_velocity: 1.5,
        distractors: 0,
        seed: 3,
        ..SceneConfig::default()
    })?;
    let oracle = OracleSource::from_sequence(&scene);
    let run = run_sequence(&oracle, &scene, &TrackerConfig::default())?;

    let mut last = (0.0, 0.0);
    for f in &run.frames {
        let size = (f.window.w, f.window.h);
        if size != last {
            let gt = scene.gt_box(f.frame_index);
            println!(
                "frame {:>2}: window {:6.2} x {:6.2}, object/window {:.3} x {:.3}",
                f.frame_index,
                size.0,
                size.1,
                gt.w / size.0,
                gt.h / size.1
            );
            last = size;
        }
    }
    println!("mean heatmap IoU {:.4}", run.score.mean);
    Ok(())
}

fn main() {
    run_example().expect("example runs");
}

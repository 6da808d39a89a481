// Generates a synthetic scene, writes it as a sequence directory and saves
// an overlay of the first frame with an oracle heatmap.
//
// `cargo run --example synth_scene [out_dir]`

use std::path::PathBuf;

use roitrack::controller::Window;
use roitrack::io::export_sequence;
use roitrack::synth::{oracle_heatmap, render_overlay, Occlusion};
use roitrack::{BBox, FrameSource, Scene, SceneConfig};

fn run_example(out: PathBuf) -> roitrack::Result<()> {
    let scene = Scene::with_name(
        SceneConfig {
            length: 30,
            distractors: 2,
            similarity: 0.7,
            init_box: BBox::new(100.0, 90.0, 30.0, 24.0),
            occlusion: Some(Occlusion {
                start: 12,
                length: 4,
                coverage: 0.5,
            }),
            seed: 11,
            ..SceneConfig::default()
        },
        "demo",
    )?;
    let dir = out.join(scene.name());
    export_sequence(&scene, &dir)?;

    for t in (0..scene.len()).step_by(10) {
        let b = scene.gt_box(t);
        println!("frame {t:>2}: x {:6.1} y {:6.1} w {:5.1} h {:5.1}", b.x, b.y, b.w, b.h);
    }

    let b = scene.gt_box(0);
    let (cx, cy) = b.center();
    let window = Window::new(cx, cy, 2.0 * b.w, 2.0 * b.h);
    let overlay = render_overlay(scene.frame(0)?.as_ref(), &window, &oracle_heatmap(&b, &window), &b);
    overlay.save_png(&dir.join("overlay_0.png"))?;
    println!("wrote {} frames to {}", scene.len(), dir.display());
    Ok(())
}

fn main() {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("roitrack_synth_scene"));
    if let Err(e) = run_example(out) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

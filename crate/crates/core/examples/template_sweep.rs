// Drives the command line end to end: synthesise a small dataset, then
// track and evaluate it for several template refresh periods.
//
// `cargo run --release --example template_sweep [model.roix]`

use std::path::Path;

use roitrack::cli::cli_main;
use roitrack::extractor::{build_model, save_model};
use roitrack::io::read_report;

fn run_example(model: Option<&str>, root: &Path) -> roitrack::Result<Vec<(usize, f64)>> {
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let data = root.join("data");
    let cfg = root.join("scene.cfg");
    std::fs::write(&cfg, "length = 16\nsimilarity = 0.7\n").expect("scratch dir is writable");
    assert_eq!(cli_main(["roitrack", "synth", "--out", &s(&data), "--config", &s(&cfg), "--count", "2"]), 0);

    let model = match model {
        Some(m) => m.to_string(),
        None => {
            let p = root.join("untrained.roix");
            save_model(&build_model(0), &p)?;
            s(&p)
        }
    };
    let mut rows = Vec::new();
    for n in [0usize, 5, 10, 20] {
        let tracks = root.join(format!("tracks_{n}"));
        let report = root.join(format!("report_{n}.csv"));
        let n = n.to_string();
        let track = ["roitrack", "track", "--model", &model, "--seq", &s(&data), "--out", &s(&tracks)];
        assert_eq!(cli_main(track.into_iter().chain(["--template-update-n", &n, "--dump-rois"])), 0);
        assert_eq!(
            cli_main(["roitrack", "eval", "--data", &s(&data), "--tracks", &s(&tracks), "--report", &s(&report)]),
            0
        );
        rows.push((n.parse().unwrap(), read_report(&report)?.dataset_mean));
    }
    println!("{:>4}  {:>8}", "n", "mean");
    for (n, mean) in &rows {
        println!("{n:>4}  {mean:>8.4}");
    }
    Ok(rows)
}

fn main() {
    let model = std::env::args().nth(1);
    let root = std::env::temp_dir().join("roitrack_template_sweep");
    if let Err(e) = run_example(model.as_deref(), &root) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

use std::fs;
use std::path::Path;

use roitrack::cli::cli_main;
use roitrack::image::Image;
use roitrack::io::{
    discover_sequences, export_sequence, load_sequence, read_predictions, read_report, write_predictions,
    SequenceDir,
};
use roitrack::metric::BBox;
use roitrack::synth::{gen_sequence, SceneConfig};

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["roitrack"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn export_then_load_matches_up_to_quantisation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SceneConfig {
        length: 5,
        seed: 4,
        ..SceneConfig::default()
    };
    let mut seq = gen_sequence(&cfg).unwrap();
    export_sequence(&seq, dir.path()).unwrap();
    let back = load_sequence(dir.path()).unwrap();
    for f in &mut seq.frames {
        f.quantize();
    }
    assert_eq!(back.frames, seq.frames);
    assert_eq!(back.boxes, seq.boxes);
}

#[test]
fn ground_truth_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..10 {
        Image::filled(8, 8, [0.5; 3]).save_png(&dir.path().join(format!("{:08}.png", i + 1))).unwrap();
    }
    write_predictions(&dir.path().join("groundtruth.txt"), &vec![BBox::new(1.0, 1.0, 2.0, 2.0); 9]).unwrap();
    let err = SequenceDir::open(dir.path()).unwrap_err();
    assert!(err.to_string().contains("count mismatch"), "{err}");
}

#[test]
fn empty_prediction_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    write_predictions(&path, &[]).unwrap();
    assert_eq!(fs::read(&path).unwrap(), b"");
    assert!(read_predictions(&path).unwrap().is_empty());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert_eq!(run(&["fly"]), 2);
    assert_eq!(run(&["track", "--bogus"]), 2);
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(run(&["eval", "--data", p(&missing), "--tracks", p(&missing)]), 1);
}

#[test]
fn synth_track_eval_render() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg_path = dir.path().join("scene.cfg");
    fs::write(&cfg_path, "length = 12\nframe_width = 128\nframe_height = 128\ninit_box = 40,40,20,20\n").unwrap();
    assert_eq!(run(&["synth", "--out", p(&data), "--config", p(&cfg_path), "--count", "2", "--seed", "5"]), 0);
    let seqs = discover_sequences(&data).unwrap();
    assert_eq!(seqs.len(), 2);
    assert!(seqs[0].join("scene.cfg").is_file());

    let tracks = dir.path().join("tracks");
    assert_eq!(run(&["track", "--oracle", "--seq", p(&data), "--out", p(&tracks), "--dump-rois"]), 0);
    let report = dir.path().join("report.csv");
    assert_eq!(run(&["eval", "--data", p(&data), "--tracks", p(&tracks), "--report", p(&report)]), 0);
    let r = read_report(&report).unwrap();
    assert_eq!(r.sequences.len(), 2);
    assert_eq!(r.frame_count, 22);
    let recomputed = r.sequences.iter().map(|s| s.mean).sum::<f64>() / 2.0;
    assert!((r.dataset_mean - recomputed).abs() < 1e-15);
    assert!(r.dataset_mean > 0.8);

    let frames = dir.path().join("frames");
    assert_eq!(run(&["render", "--seq", p(&data), "--tracks", p(&tracks), "--out", p(&frames)]), 0);
    assert_eq!(fs::read_dir(frames.join("seq_0000")).unwrap().count(), 12);

    // box-IoU fallback when no RoI dump exists
    for s in &seqs {
        fs::remove_file(tracks.join(s.file_name().unwrap()).join("rois.txt")).unwrap();
    }
    assert_eq!(run(&["eval", "--data", p(&data), "--tracks", p(&tracks)]), 0);

    // truncated predictions
    let pred = tracks.join("seq_0001").join("predictions.txt");
    let mut boxes = read_predictions(&pred).unwrap();
    boxes.pop();
    write_predictions(&pred, &boxes).unwrap();
    assert_eq!(run(&["eval", "--data", p(&data), "--tracks", p(&tracks)]), 1);
}

#[test]
fn single_sequence_synth_and_unknown_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    fs::write(&cfg_path, "lenght = 12\n").unwrap();
    let out = dir.path().join("one");
    assert_eq!(run(&["synth", "--out", p(&out), "--config", p(&cfg_path)]), 1);
    fs::write(&cfg_path, "length = 3\n").unwrap();
    assert_eq!(run(&["synth", "--out", p(&out), "--config", p(&cfg_path), "--seed", "1"]), 0);
    assert_eq!(load_sequence(&out).unwrap().frames.len(), 3);
}

#[test]
fn template_update_flag_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("seq");
    let cfg_path = dir.path().join("scene.cfg");
    fs::write(&cfg_path, "length = 6\n").unwrap();
    assert_eq!(run(&["synth", "--out", p(&data), "--config", p(&cfg_path)]), 0);
    let model = dir.path().join("m.roix");
    roitrack::extractor::save_model(&roitrack::extractor::build_model(1), &model).unwrap();
    for n in ["0", "5"] {
        let out = dir.path().join(format!("t{n}"));
        assert_eq!(
            run(&["track", "--model", p(&model), "--seq", p(&data), "--out", p(&out), "--template-update-n", n]),
            0
        );
        assert_eq!(read_predictions(&out.join("seq").join("predictions.txt")).unwrap().len(), 6);
    }
}

#[test]
fn train_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg_path = dir.path().join("scene.cfg");
    fs::write(&cfg_path, "length = 16\n").unwrap();
    assert_eq!(run(&["synth", "--out", p(&data), "--config", p(&cfg_path), "--count", "2", "--seed", "8"]), 0);

    let adam = dir.path().join("adam.roix");
    let args = ["--epochs", "2", "--batches-per-sequence", "1", "--seed", "4"];
    let train = ["train", "--data", p(&data), "--out", p(&adam)];
    assert_eq!(run(&[&train[..], &args[..]].concat()), 0);
    let model = roitrack::extractor::load_model(&adam).unwrap();
    assert!(model.is_finite());
    assert_ne!(model, roitrack::extractor::build_model(4));

    let sgd = dir.path().join("sgd.roix");
    let train = ["train", "--data", p(&data), "--out", p(&sgd), "--momentum", "0.9", "--lr", "0.05"];
    assert_eq!(run(&[&train[..], &args[..]].concat()), 0);
    assert!(sgd.is_file());

    let bad = ["train", "--data", p(&data), "--out", p(&sgd), "--lr=-1"];
    assert_eq!(run(&bad), 1);
}

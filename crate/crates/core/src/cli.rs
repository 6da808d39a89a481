//! Command-line front end. [`cli_main`] takes the full argument vector and
//! returns the process exit code: 0 on success, 1 when a command fails,
//! 2 on a usage error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::controller::Window;
use crate::error::{Error, Result};
use crate::extractor::{build_model, load_model, save_model, train_with_progress, Optimizer, TrainConfig};
use crate::grid::RoiMatrix;
use crate::io::{
    discover_sequences, export_sequence, load_dataset_spec, load_scene_config, load_tracker_config, read_predictions,
    read_rois, scene_config_to_string, write_predictions, write_report, write_rois, RoiRecord, SequenceDir,
};
use crate::metric::{heatmap_iou, rasterize_gt, BBox, ScoreReport, SequenceScore};
use crate::pipeline::{run_sequence, OracleSource, RoiSource, TrackerConfig};
use crate::sequence::FrameSource;
use crate::synth::{render_overlay, DatasetSpec, Scene, SceneConfig};

pub const PREDICTIONS_FILE: &str = "predictions.txt";
pub const ROIS_FILE: &str = "rois.txt";
pub const SCENE_FILE: &str = "scene.cfg";
/// Learning rate used when `--momentum` selects SGD without `--lr`.
const SGD_LR: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "roitrack", version, about = "Window-controller object tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic sequence directories.
    Synth(SynthArgs),
    /// Train an extractor on sequence directories.
    Train(TrainArgs),
    /// Track sequences and write predictions.
    Track(TrackArgs),
    /// Score tracking output against ground truth.
    Eval(EvalArgs),
    /// Draw predictions and heatmaps over the frames.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// key = value scene settings; with --count, dataset ranges too.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generate this many randomised sequences as seq_0000, seq_0001, ...
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Sequence directories or directories of sequences.
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Learning rate (default 0.004 for Adam, 0.1 for SGD).
    #[arg(long)]
    lr: Option<f64>,
    /// Train with SGD and this momentum instead of Adam.
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Batches drawn from each sequence per epoch (default: all).
    #[arg(long)]
    batches_per_sequence: Option<usize>,
}

#[derive(Debug, Args)]
struct TrackArgs {
    /// Model file; required unless --oracle is given.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use ground-truth heatmaps instead of a model.
    #[arg(long)]
    oracle: bool,
    /// Sequence directory or directory of sequences.
    #[arg(long)]
    seq: PathBuf,
    /// Output directory; one subdirectory per sequence.
    #[arg(long)]
    out: PathBuf,
    /// key = value tracker settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-encode the template every n frames (0: never).
    #[arg(long)]
    template_update_n: Option<usize>,
    /// Also write each frame's window and RoI matrix.
    #[arg(long)]
    dump_rois: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Sequence directory or directory of sequences with ground truth.
    #[arg(long)]
    data: PathBuf,
    /// Output directory of `track`.
    #[arg(long)]
    tracks: PathBuf,
    /// CSV report to write.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    seq: PathBuf,
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI on `argv` (including the program name).
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn export_scene(scene: &Scene, dir: &Path) -> Result<()> {
    export_sequence(scene, dir)?;
    let cfg_path = dir.join(SCENE_FILE);
    fs::write(&cfg_path, scene_config_to_string(scene.config())).map_err(|e| Error::io(&cfg_path, e))
}

fn synth(a: SynthArgs) -> Result<()> {
    if let Some(count) = a.count {
        let mut spec = match &a.config {
            Some(p) => load_dataset_spec(p)?,
            None => DatasetSpec::default(),
        };
        spec.count = count;
        if let Some(s) = a.seed {
            spec.seed = s;
        }
        for scene in spec.scenes()? {
            export_scene(&scene, &a.out.join(scene.name()))?;
        }
        println!("wrote {count} sequences to {}", a.out.display());
    } else {
        let mut cfg = match &a.config {
            Some(p) => load_scene_config(p)?,
            None => SceneConfig::default(),
        };
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        let name = a.out.file_name().map_or("sequence".into(), |n| n.to_string_lossy().into_owned());
        let scene = Scene::with_name(cfg, name)?;
        export_scene(&scene, &a.out)?;
        println!("wrote {} frames to {}", scene.len(), a.out.display());
    }
    Ok(())
}

fn open_all(roots: &[PathBuf]) -> Result<Vec<SequenceDir>> {
    let mut seqs = Vec::new();
    for root in roots {
        for dir in discover_sequences(root)? {
            seqs.push(SequenceDir::open(&dir)?);
        }
    }
    Ok(seqs)
}

fn train(a: TrainArgs) -> Result<()> {
    let seqs = open_all(&a.data)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr.unwrap_or(if a.momentum.is_some() { SGD_LR } else { defaults.learning_rate }),
        optimizer: a.momentum.map_or(defaults.optimizer, |momentum| Optimizer::Sgd { momentum }),
        seed: a.seed,
        batches_per_sequence: a.batches_per_sequence.or(defaults.batches_per_sequence),
        ..defaults
    };
    let mut params = build_model(a.seed);
    println!("training on {} sequences", seqs.len());
    train_with_progress(&mut params, &seqs, &cfg, |epoch, loss| {
        println!("epoch {} loss {loss}", epoch + 1);
    })?;
    save_model(&params, &a.out)?;
    println!("saved {}", a.out.display());
    Ok(())
}

fn track(a: TrackArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_tracker_config(p)?,
        None => TrackerConfig::default(),
    };
    if let Some(n) = a.template_update_n {
        cfg.template_update_period = n;
    }
    let model = match (&a.model, a.oracle) {
        (Some(_), true) => return Err(Error::Param("--model and --oracle are exclusive".into())),
        (Some(p), false) => Some(load_model(p)?),
        (None, true) => None,
        (None, false) => return Err(Error::Param("either --model or --oracle is required".into())),
    };
    let mut scores = Vec::new();
    for dir in discover_sequences(&a.seq)? {
        let seq = SequenceDir::open(&dir)?;
        let oracle;
        let source: &dyn RoiSource = match &model {
            Some(m) => m,
            None => {
                oracle = OracleSource::from_sequence(&seq);
                &oracle
            }
        };
        let run = run_sequence(source, &seq, &cfg)?;
        let out = a.out.join(&seq.name);
        create_dir(&out)?;
        write_predictions(&out.join(PREDICTIONS_FILE), &run.boxes)?;
        if a.dump_rois {
            let records: Vec<RoiRecord> = run.frames.iter().map(RoiRecord::from).collect();
            write_rois(&out.join(ROIS_FILE), &records)?;
        }
        println!("{} {}", seq.name, run.score.mean);
        scores.push(run.score);
    }
    let report = ScoreReport::new(scores);
    println!("template_update_n {} dataset mean {}", cfg.template_update_period, report.dataset_mean);
    Ok(())
}

fn count_mismatch(name: &str, what: &str, got: usize, want: usize) -> Error {
    Error::format(name, format!("count mismatch: {got} {what} for {want} tracked frames"))
}

fn eval_sequence(seq: &SequenceDir, tracks: &Path) -> Result<SequenceScore> {
    let dir = tracks.join(&seq.name);
    let rois_path = dir.join(ROIS_FILE);
    let tracked = seq.len().saturating_sub(1);
    let mut scores = Vec::with_capacity(tracked);
    let mut empty = 0;
    if rois_path.is_file() {
        let records = read_rois(&rois_path)?;
        if records.len() != tracked {
            return Err(count_mismatch(&seq.name, "RoI records", records.len(), tracked));
        }
        for (k, r) in records.iter().enumerate() {
            if r.frame_index != k + 1 {
                return Err(Error::format(
                    rois_path.display().to_string(),
                    format!("record {} has frame index {}", k + 1, r.frame_index),
                ));
            }
            let gt = rasterize_gt(&seq.boxes[k + 1], &r.window)?;
            if gt.count() == 0 && r.roi.sum() == 0.0 {
                empty += 1;
            }
            scores.push(heatmap_iou(&gt, &r.roi));
        }
    } else {
        let preds = read_predictions(&dir.join(PREDICTIONS_FILE))?;
        if preds.len() != seq.len() {
            return Err(count_mismatch(&seq.name, "predicted boxes", preds.len(), seq.len()));
        }
        scores.extend((1..seq.len()).map(|t| preds[t].iou(&seq.boxes[t])));
    }
    Ok(SequenceScore::from_scores(seq.name.clone(), 1, scores, empty))
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut scores = Vec::new();
    for dir in discover_sequences(&a.data)? {
        scores.push(eval_sequence(&SequenceDir::open(&dir)?, &a.tracks)?);
    }
    let report = ScoreReport::new(scores);
    print!("{}", report.to_table());
    if let Some(p) = &a.report {
        write_report(p, &report)?;
    }
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    for dir in discover_sequences(&a.seq)? {
        let seq = SequenceDir::open(&dir)?;
        let tdir = a.tracks.join(&seq.name);
        let preds = read_predictions(&tdir.join(PREDICTIONS_FILE))?;
        if preds.len() != seq.len() {
            return Err(count_mismatch(&seq.name, "predicted boxes", preds.len(), seq.len()));
        }
        let rois_path = tdir.join(ROIS_FILE);
        let rois = if rois_path.is_file() { read_rois(&rois_path)? } else { Vec::new() };
        let out = a.out.join(&seq.name);
        create_dir(&out)?;
        for (t, pred) in preds.iter().enumerate() {
            let frame = seq.frame(t)?;
            let (window, roi) = match rois.iter().find(|r| r.frame_index == t) {
                Some(r) => (r.window, r.roi.clone()),
                None => (box_window(pred), RoiMatrix::zeros()),
            };
            render_overlay(&frame, &window, &roi, pred).save_png(&out.join(format!("{:08}.png", t + 1)))?;
        }
        println!("rendered {} frames of {}", seq.len(), seq.name);
    }
    Ok(())
}

fn box_window(b: &BBox) -> Window {
    let (cx, cy) = b.center();
    Window::new(cx, cy, 2.0 * b.w, 2.0 * b.h)
}

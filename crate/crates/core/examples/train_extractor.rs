// Trains the RoI extractor on a few synthetic sequences and saves it.
//
// `cargo run --release --example train_extractor [sequences] [epochs] [out]`

use std::path::{Path, PathBuf};

use roitrack::extractor::{build_model, save_model, train_with_progress, Optimizer, TrainConfig};
use roitrack::synth::DatasetSpec;
use roitrack::SceneConfig;

fn run_example(sequences: usize, epochs: usize, out: &Path) -> roitrack::Result<Vec<f64>> {
    let scenes = DatasetSpec {
        base: SceneConfig {
            similarity: 0.7,
            length: 30,
            ..SceneConfig::default()
        },
        count: sequences,
        seed: 1,
        ..DatasetSpec::default()
    }
    .scenes()?;
    let cfg = TrainConfig {
        epochs,
        learning_rate: 0.002,
        optimizer: Optimizer::adam(),
        batches_per_sequence: Some(1),
        seed: 5,
        ..TrainConfig::default()
    };
    let mut model = build_model(cfg.seed);
    println!("{} parameters", model.parameter_count());
    let history = train_with_progress(&mut model, &scenes, &cfg, |e, loss| println!("epoch {} loss {loss:.5}", e + 1))?;
    save_model(&model, out)?;
    println!("saved {}", out.display());
    Ok(history)
}

fn main() {
    let mut args = std::env::args().skip(1);
    let sequences = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("roitrack_example.roix"));
    if let Err(e) = run_example(sequences, epochs, &out) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

//! Sequence directories: numbered frame images plus `groundtruth.txt`.

use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metric::BBox;
use crate::sequence::{FrameSource, SequenceRecord};

pub const GROUNDTRUTH_FILE: &str = "groundtruth.txt";

const FRAME_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Parses `x,y,w,h` lines. Blank lines are only allowed at the end.
pub fn parse_boxes(text: &str, source: &str) -> Result<Vec<BBox>> {
    let lines: Vec<&str> = text.lines().collect();
    let used = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |i| i + 1);
    lines[..used]
        .iter()
        .enumerate()
        .map(|(i, line)| parse_box(line).map_err(|d| Error::format(format!("{source} line {}", i + 1), d)))
        .collect()
}

fn parse_box(line: &str) -> std::result::Result<BBox, String> {
    let parts: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(format!("expected 4 comma-separated values, got {}: {line:?}", parts.len()));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|_| format!("not a number: {p:?}"))?;
        if !slot.is_finite() {
            return Err(format!("not finite: {p:?}"));
        }
    }
    Ok(BBox::new(v[0], v[1], v[2], v[3]))
}

/// One `x,y,w,h` line per box, shortest round-trip float formatting.
pub fn format_boxes(boxes: &[BBox]) -> String {
    boxes
        .iter()
        .map(|b| format!("{},{},{},{}\n", b.x, b.y, b.w, b.h))
        .collect()
}

pub fn read_boxes(path: &Path) -> Result<Vec<BBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_boxes(&text, &path.display().to_string())
}

pub fn write_boxes(path: &Path, boxes: &[BBox]) -> Result<()> {
    fs::write(path, format_boxes(boxes)).map_err(|e| Error::io(path, e))
}

/// Predictions share the ground-truth layout.
pub fn write_predictions(path: &Path, boxes: &[BBox]) -> Result<()> {
    write_boxes(path, boxes)
}

pub fn read_predictions(path: &Path) -> Result<Vec<BBox>> {
    read_boxes(path)
}

/// Image files in `dir`, sorted by file name.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_frame = path.is_file()
            && path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_frame {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// A sequence on disk; frames are decoded on demand.
#[derive(Debug, Clone)]
pub struct SequenceDir {
    pub path: PathBuf,
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub boxes: Vec<BBox>,
}

impl SequenceDir {
    pub fn open(path: &Path) -> Result<Self> {
        let boxes = read_boxes(&path.join(GROUNDTRUTH_FILE))?;
        let frames = frame_files(path)?;
        if frames.len() != boxes.len() {
            return Err(Error::format(
                path.display().to_string(),
                format!("count mismatch: {} frames vs {} ground-truth lines", frames.len(), boxes.len()),
            ));
        }
        Ok(Self {
            path: path.to_path_buf(),
            name: sequence_name(path),
            frames,
            boxes,
        })
    }

    pub fn load(&self) -> Result<SequenceRecord> {
        let frames = self.frames.iter().map(|p| Image::load(p)).collect::<Result<Vec<_>>>()?;
        SequenceRecord::new(self.name.clone(), frames, self.boxes.clone())
    }
}

fn sequence_name(path: &Path) -> String {
    path.canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".to_string())
}

impl FrameSource for SequenceDir {
    fn name(&self) -> &str {
        &self.name
    }

    fn len(&self) -> usize {
        self.frames.len()
    }

    fn frame(&self, index: usize) -> Result<Cow<'_, Image>> {
        let path = self
            .frames
            .get(index)
            .ok_or_else(|| Error::Param(format!("frame {index} out of range for {}", self.name)))?;
        Image::load(path).map(Cow::Owned)
    }

    fn gt_box(&self, index: usize) -> BBox {
        self.boxes[index]
    }
}

/// Reads every frame of the directory eagerly.
pub fn load_sequence(path: &Path) -> Result<SequenceRecord> {
    SequenceDir::open(path)?.load()
}

/// Writes `00000001.png`, `00000002.png`, ... and `groundtruth.txt`.
pub fn export_sequence<S: FrameSource + ?Sized>(seq: &S, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for i in 0..seq.len() {
        seq.frame(i)?.save_png(&dir.join(format!("{:08}.png", i + 1)))?;
    }
    let boxes: Vec<BBox> = (0..seq.len()).map(|i| seq.gt_box(i)).collect();
    write_boxes(&dir.join(GROUNDTRUTH_FILE), &boxes)
}

/// `root` itself when it holds a ground-truth file, otherwise its
/// immediate subdirectories that do, sorted by name.
pub fn discover_sequences(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(GROUNDTRUTH_FILE).is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.join(GROUNDTRUTH_FILE).is_file() {
            dirs.push(path);
        }
    }
    if dirs.is_empty() {
        return Err(Error::format(
            root.display().to_string(),
            format!("no {GROUNDTRUTH_FILE} here or in any subdirectory"),
        ));
    }
    dirs.sort();
    Ok(dirs)
}

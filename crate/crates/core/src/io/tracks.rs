//! Per-frame RoI dumps and score reports.

use std::fs;
use std::path::Path;

use crate::controller::Window;
use crate::error::{Error, Result};
use crate::grid::{RoiMatrix, GRID_CELLS};
use crate::metric::{ScoreReport, SequenceScore};
use crate::pipeline::FrameOutput;

/// The window and RoI matrix of one tracked frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiRecord {
    pub frame_index: usize,
    pub window: Window,
    pub roi: RoiMatrix,
}

impl From<&FrameOutput> for RoiRecord {
    fn from(f: &FrameOutput) -> Self {
        Self {
            frame_index: f.frame_index,
            window: f.window,
            roi: f.roi.clone(),
        }
    }
}

/// `frame_index,cx,cy,w,h,v0,...,v783` per line, cells in row-major order.
pub fn format_rois(records: &[RoiRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let w = r.window;
        out += &format!("{},{},{},{},{}", r.frame_index, w.cx, w.cy, w.w, w.h);
        for v in r.roi.as_slice() {
            out += &format!(",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_rois(text: &str, source: &str) -> Result<Vec<RoiRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let field = || format!("{source} line {}", i + 1);
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 5 + GRID_CELLS {
                return Err(Error::format(
                    field(),
                    format!("expected {} values, got {}", 5 + GRID_CELLS, parts.len()),
                ));
            }
            let frame_index = parts[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::format(field(), format!("bad frame index {:?}", parts[0])))?;
            let nums = parts[1..]
                .iter()
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::format(field(), "non-numeric value"))?;
            let window = Window::new(nums[0], nums[1], nums[2], nums[3]);
            let roi = RoiMatrix::from_slice(&nums[4..]).map_err(|e| Error::format(field(), e.to_string()))?;
            Ok(RoiRecord {
                frame_index,
                window,
                roi,
            })
        })
        .collect()
}

pub fn write_rois(path: &Path, records: &[RoiRecord]) -> Result<()> {
    fs::write(path, format_rois(records)).map_err(|e| Error::io(path, e))
}

pub fn read_rois(path: &Path) -> Result<Vec<RoiRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rois(&text, &path.display().to_string())
}

pub const REPORT_HEADER: &str = "sequence,frame,score";

/// CSV with one row per scored frame, a `mean` row per sequence and a
/// final `dataset,mean,<value>` row.
pub fn format_report(report: &ScoreReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for s in &report.sequences {
        for (k, v) in s.frame_scores.iter().enumerate() {
            out += &format!("{},{},{}\n", s.name, s.first_frame + k, v);
        }
        out += &format!("{},mean,{}\n", s.name, s.mean);
    }
    out += &format!("dataset,mean,{}\n", report.dataset_mean);
    out
}

/// Inverse of [`format_report`]. Empty-frame counts are not stored and
/// come back as 0.
pub fn parse_report(text: &str) -> Result<ScoreReport> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == REPORT_HEADER => {}
        _ => return Err(Error::format("report line 1", format!("expected header {REPORT_HEADER:?}"))),
    }
    let mut sequences = Vec::new();
    let mut current: Option<(String, usize, Vec<f64>)> = None;
    let mut dataset = None;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let field = || format!("report line {}", i + 1);
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(field(), "expected 3 columns"));
        }
        let score: f64 = parts[2].parse().map_err(|_| Error::format(field(), "bad score"))?;
        if parts[1] == "mean" {
            if parts[0] == "dataset" && current.is_none() {
                dataset = Some(score);
                continue;
            }
            let (name, first, scores) = current.take().unwrap_or((parts[0].to_string(), 1, Vec::new()));
            if name != parts[0] {
                return Err(Error::format(field(), format!("mean row for {} inside {name}", parts[0])));
            }
            let s = SequenceScore::from_scores(name, first, scores, 0);
            if s.mean != score {
                return Err(Error::format(field(), format!("stored mean {score} != recomputed {}", s.mean)));
            }
            sequences.push(s);
        } else {
            let frame: usize = parts[1].parse().map_err(|_| Error::format(field(), "bad frame index"))?;
            let entry = current.get_or_insert_with(|| (parts[0].to_string(), frame, Vec::new()));
            if entry.0 != parts[0] || entry.1 + entry.2.len() != frame {
                return Err(Error::format(field(), "rows out of order"));
            }
            entry.2.push(score);
        }
    }
    if current.is_some() {
        return Err(Error::format("report", "sequence without a mean row"));
    }
    let report = ScoreReport::new(sequences);
    match dataset {
        Some(d) if d == report.dataset_mean => Ok(report),
        Some(d) => Err(Error::format(
            "report dataset row",
            format!("stored mean {d} != recomputed {}", report.dataset_mean),
        )),
        None => Err(Error::format("report", "missing dataset row")),
    }
}

pub fn write_report(path: &Path, report: &ScoreReport) -> Result<()> {
    fs::write(path, format_report(report)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ScoreReport> {
    parse_report(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

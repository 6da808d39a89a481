//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys are errors.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metric::BBox;
use crate::pipeline::TrackerConfig;
use crate::synth::{DatasetSpec, Occlusion, SceneConfig};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("config line {}", i + 1), "expected key = value"))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::format(format!("config line {}", i + 1), "empty key"));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::format(format!("config line {}", i + 1), format!("duplicate key {key}")));
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

fn value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| {
        Error::format(
            format!("config line {} ({})", e.line, e.key),
            format!("cannot parse {:?}", e.value),
        )
    })
}

fn unknown(e: &Entry) -> Error {
    Error::format(format!("config line {}", e.line), format!("unknown key {}", e.key))
}

fn apply_scene_key(cfg: &mut SceneConfig, e: &Entry) -> Result<bool> {
    match e.key.as_str() {
        "frame_width" => cfg.frame_width = value(e)?,
        "frame_height" => cfg.frame_height = value(e)?,
        "length" => cfg.length = value(e)?,
        "target_seed" => cfg.target_seed = value(e)?,
        "init_box" => {
            let v = parse_floats(e, 4)?;
            cfg.init_box = BBox::new(v[0], v[1], v[2], v[3]);
        }
        "distractors" => cfg.distractors = value(e)?,
        "similarity" => cfg.similarity = value(e)?,
        "max_velocity" => cfg.max_velocity = value(e)?,
        "scale_ramp" => cfg.scale_ramp = value(e)?,
        "occlusion" => {
            cfg.occlusion = if e.value == "none" {
                None
            } else {
                let v = parse_floats(e, 3)?;
                if v[0] < 0.0 || v[1] < 0.0 || v[0].fract() != 0.0 || v[1].fract() != 0.0 {
                    return Err(Error::format(
                        format!("config line {} (occlusion)", e.line),
                        "start and length must be non-negative integers",
                    ));
                }
                Some(Occlusion {
                    start: v[0] as usize,
                    length: v[1] as usize,
                    coverage: v[2],
                })
            }
        }
        "clutter" => cfg.clutter = value(e)?,
        "noise" => cfg.noise = value(e)?,
        "reflect" => cfg.reflect = value(e)?,
        "seed" => cfg.seed = value(e)?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn parse_floats(e: &Entry, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = e
        .value
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(format!("config line {} ({})", e.line, e.key), format!("cannot parse {:?}", e.value)))?;
    if v.len() != n {
        return Err(Error::format(
            format!("config line {} ({})", e.line, e.key),
            format!("expected {n} comma-separated numbers, got {}", v.len()),
        ));
    }
    Ok(v)
}

pub fn parse_scene_config(text: &str) -> Result<SceneConfig> {
    let mut cfg = SceneConfig::default();
    for e in parse_entries(text)? {
        if !apply_scene_key(&mut cfg, &e)? {
            return Err(unknown(&e));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Scene keys set the base config; `count`, `min_target`, `max_target`,
/// `min_distractors`, `max_distractors` and `dataset_seed` set the ranges.
pub fn parse_dataset_spec(text: &str) -> Result<DatasetSpec> {
    let mut spec = DatasetSpec::default();
    for e in parse_entries(text)? {
        match e.key.as_str() {
            "count" => spec.count = value(&e)?,
            "min_target" => spec.min_target = value(&e)?,
            "max_target" => spec.max_target = value(&e)?,
            "min_distractors" => spec.min_distractors = value(&e)?,
            "max_distractors" => spec.max_distractors = value(&e)?,
            "dataset_seed" => spec.seed = value(&e)?,
            _ => {
                if !apply_scene_key(&mut spec.base, &e)? {
                    return Err(unknown(&e));
                }
            }
        }
    }
    spec.base.validate()?;
    Ok(spec)
}

/// Writes every scene field; [`parse_scene_config`] reads it back exactly.
pub fn scene_config_to_string(cfg: &SceneConfig) -> String {
    let b = cfg.init_box;
    let occlusion = match &cfg.occlusion {
        Some(o) => format!("{},{},{}", o.start, o.length, o.coverage),
        None => "none".to_string(),
    };
    format!(
        "frame_width = {}\nframe_height = {}\nlength = {}\ntarget_seed = {}\ninit_box = {},{},{},{}\n\
         distractors = {}\nsimilarity = {}\nmax_velocity = {}\nscale_ramp = {}\nocclusion = {}\n\
         clutter = {}\nnoise = {}\nreflect = {}\nseed = {}\n",
        cfg.frame_width,
        cfg.frame_height,
        cfg.length,
        cfg.target_seed,
        b.x,
        b.y,
        b.w,
        b.h,
        cfg.distractors,
        cfg.similarity,
        cfg.max_velocity,
        cfg.scale_ramp,
        occlusion,
        cfg.clutter,
        cfg.noise,
        cfg.reflect,
        cfg.seed
    )
}

pub fn parse_tracker_config(text: &str) -> Result<TrackerConfig> {
    let mut cfg = TrackerConfig::default();
    for e in parse_entries(text)? {
        match e.key.as_str() {
            "grow_threshold" => cfg.grow_threshold = value(&e)?,
            "shrink_threshold" => cfg.shrink_threshold = value(&e)?,
            "grow_factor" => cfg.grow_factor = value(&e)?,
            "shrink_factor" => cfg.shrink_factor = value(&e)?,
            "bin_threshold" => cfg.bin_threshold = value(&e)?,
            "activity_threshold" => cfg.activity_threshold = value(&e)?,
            "template_update_period" => cfg.template_update_period = value(&e)?,
            "small_branch_max" => cfg.small_branch_max = value(&e)?,
            "medium_branch_max" => cfg.medium_branch_max = value(&e)?,
            "min_window" => cfg.min_window = value(&e)?,
            "max_window_factor" => cfg.max_window_factor = value(&e)?,
            _ => return Err(unknown(&e)),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_scene_config(path: &Path) -> Result<SceneConfig> {
    parse_scene_config(&read_text(path)?)
}

pub fn load_dataset_spec(path: &Path) -> Result<DatasetSpec> {
    parse_dataset_spec(&read_text(path)?)
}

pub fn load_tracker_config(path: &Path) -> Result<TrackerConfig> {
    parse_tracker_config(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks_skipped() {
        let e = parse_entries("# header\n\n a = 1 \nb=two\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].line, e[0].key.as_str(), e[0].value.as_str()), (3, "a", "1"));
        assert_eq!(e[1].value, "two");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_tracker_config("grow_treshold = 0.8\n").unwrap_err();
        assert!(err.to_string().contains("unknown key grow_treshold"), "{err}");
        assert!(parse_scene_config("colour = red").is_err());
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(parse_entries("a = 1\na = 2").is_err());
        assert!(parse_entries("just words").is_err());
        let err = parse_tracker_config("\n\nbin_threshold = half").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn tracker_overrides() {
        let c = parse_tracker_config("template_update_period = 5\ngrow_threshold = 0.8").unwrap();
        assert_eq!(c.template_update_period, 5);
        assert_eq!(c.grow_threshold, 0.8);
        assert_eq!(c.shrink_threshold, TrackerConfig::default().shrink_threshold);
        assert!(parse_tracker_config("shrink_threshold = 0.9").is_err());
    }

    #[test]
    fn scene_config_round_trip() {
        let mut cfg = SceneConfig {
            similarity: 0.9,
            scale_ramp: 1.014,
            init_box: BBox::new(10.25, 20.5, 33.1, 17.0),
            seed: u64::MAX,
            ..SceneConfig::default()
        };
        assert_eq!(parse_scene_config(&scene_config_to_string(&cfg)).unwrap(), cfg);
        cfg.occlusion = Some(Occlusion {
            start: 30,
            length: 12,
            coverage: 0.6,
        });
        assert_eq!(parse_scene_config(&scene_config_to_string(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn dataset_keys() {
        let s = parse_dataset_spec("count = 3\nsimilarity = 0.7\nmax_distractors = 2").unwrap();
        assert_eq!(s.count, 3);
        assert_eq!(s.base.similarity, 0.7);
        assert_eq!(s.max_distractors, 2);
    }
}

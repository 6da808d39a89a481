//! On-disk formats: sequence directories, predictions, RoI dumps,
//! reports and config files.

pub mod config;
mod dataset;
mod tracks;

pub use config::{
    load_dataset_spec, load_scene_config, load_tracker_config, parse_dataset_spec, parse_scene_config,
    parse_tracker_config, scene_config_to_string,
};
pub use dataset::{
    discover_sequences, export_sequence, format_boxes, frame_files, load_sequence, parse_boxes, read_boxes,
    read_predictions, write_boxes, write_predictions, SequenceDir, GROUNDTRUTH_FILE,
};
pub use tracks::{
    format_report, format_rois, parse_report, parse_rois, read_report, read_rois, write_report, write_rois,
    RoiRecord, REPORT_HEADER,
};

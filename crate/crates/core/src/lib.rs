//! Single-object tracking with a template-conditioned RoI-heatmap extractor
//! and a geometric search-window controller.
//!
//! Each frame, the search window (about twice the target size) is cropped,
//! fed to a small fully convolutional network together with features of the
//! target template, and turned into a 28x28 presence heatmap. The heatmap's
//! quadrant means steer the window and its row/column extents resize it.
//!
//! Module map:
//! - [`nn`]: tensor kernels with explicit backward passes and gradient checks
//! - [`extractor`]: the four-branch model, training and the model file
//! - [`controller`]: direction matrix, movement, size estimate, window update
//! - [`metric`]: ground-truth rasterisation, heatmap overlap, aggregation
//! - [`synth`]: synthetic scenes, oracle heatmaps, overlays
//! - [`pipeline`]: the per-sequence tracking loop
//! - [`io`]: sequence directories, predictions, reports, config files
//! - [`cli`]: the `roitrack` command line

pub mod cli;
pub mod controller;
pub mod error;
pub mod extractor;
pub mod grid;
pub mod image;
pub mod io;
pub mod metric;
pub mod nn;
pub mod pipeline;
pub mod sequence;
pub mod synth;
pub mod tensor;

pub use controller::{ControllerConfig, DirectionMatrix, SizeEstimate, Window, WindowBounds};
pub use error::{Error, Result};
pub use extractor::{BranchId, ModelParams, TemplateFeatures};
pub use grid::{GtMatrix, RoiMatrix, GRID};
pub use image::Image;
pub use metric::{BBox, ScoreReport, SequenceScore};
pub use pipeline::{TrackerConfig, TrackerState};
pub use sequence::{FrameSource, SequenceRecord};
pub use synth::{Scene, SceneConfig};
pub use tensor::Tensor;

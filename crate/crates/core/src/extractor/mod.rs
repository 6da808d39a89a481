//! The RoI extractor: model definition, training and the binary model
//! file.

mod format;
mod model;
mod train;

pub use format::{load_model, read_model, save_model, write_model, MAGIC, VERSION};
pub use model::{
    build_model, build_model_with, encode_template, extract_roi_matrix, extract_with_template,
    select_branch, select_branch_with, ArchSpec, BranchId, ConvLayer, ModelGrads, ModelParams,
    TemplateFeatures, MEDIUM_BRANCH_MAX, SMALL_BRANCH_MAX,
};
pub use train::{
    batch_gradient, plan_batches, sample_window, template_crop, template_window, train, train_with_progress,
    BatchPlan, Optimizer, TrainConfig, BATCH_LEN,
};

pub use crate::grid::RoiMatrix;

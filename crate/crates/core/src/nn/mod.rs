//! Dense-tensor layer kernels with explicit forward and backward passes:
//! exactly the operations the RoI extractor is built from.

mod activation;
mod conv;
pub mod gradcheck;
mod loss;
mod pool;
mod resize;
mod sgd;

pub use activation::{relu, relu_backward, relu_in_place, sigmoid, sigmoid_backward, sigmoid_scalar};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads};
pub(crate) use conv::conv2d_backward_params;
pub use gradcheck::{grad_check, layer_suite, GradCheckReport, GradMismatch, LayerCheck};
pub use loss::mse_loss;
pub use pool::{avg_pool, avg_pool_backward};
pub use resize::{bilinear_resize, bilinear_resize_backward};
pub(crate) use resize::taps as bilinear_taps;
pub use sgd::{sgd_step, sgd_update, ParamSet};

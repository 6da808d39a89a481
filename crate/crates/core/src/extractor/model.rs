//! Four-branch, template-conditioned, fully convolutional RoI extractor.
//!
//! Three image branches take the search-window crop at 224, 112 or 56 px
//! and reduce it with stride-2 3x3 convolutions to a 28x28 feature map. A
//! template branch encodes a 56x56 crop of the target; its feature map is
//! bilinearly resized to 28x28 and concatenated channel-wise with the active
//! image branch. A shared head of two 3x3 convolutions ends in a sigmoid
//! and emits the 28x28 RoI matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{RoiMatrix, GRID};
use crate::image::Image;
use crate::nn::{
    bilinear_resize, bilinear_resize_backward, conv2d_backward, conv2d_backward_params,
    conv2d_forward, relu_backward, relu_in_place, sigmoid, sigmoid_backward, ParamSet,
};
use crate::tensor::{concat_channels, split_channels, Tensor};

pub const KERNEL: usize = 3;

/// Which image branch processes the crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchId {
    B224,
    B112,
    B56,
}

impl BranchId {
    pub const ALL: [BranchId; 3] = [BranchId::B224, BranchId::B112, BranchId::B56];

    /// Side length of the square crop this branch consumes.
    pub fn input_size(self) -> usize {
        match self {
            BranchId::B224 => 224,
            BranchId::B112 => 112,
            BranchId::B56 => 56,
        }
    }

    /// Number of stride-2 stages down to the 28x28 grid.
    pub fn stages(self) -> usize {
        match self {
            BranchId::B224 => 3,
            BranchId::B112 => 2,
            BranchId::B56 => 1,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            BranchId::B224 => 0,
            BranchId::B112 => 1,
            BranchId::B56 => 2,
        }
    }
}

impl std::fmt::Display for BranchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "B{}", self.input_size())
    }
}

/// Default window-size thresholds for branch selection (inclusive).
pub const SMALL_BRANCH_MAX: f64 = 64.0;
pub const MEDIUM_BRANCH_MAX: f64 = 128.0;

/// Picks the branch from the larger window side.
pub fn select_branch(window_w: f64, window_h: f64) -> BranchId {
    select_branch_with(window_w, window_h, SMALL_BRANCH_MAX, MEDIUM_BRANCH_MAX)
}

pub fn select_branch_with(window_w: f64, window_h: f64, small_max: f64, medium_max: f64) -> BranchId {
    let side = window_w.max(window_h);
    if side <= small_max {
        BranchId::B56
    } else if side <= medium_max {
        BranchId::B112
    } else {
        BranchId::B224
    }
}

/// Layer widths. Branch depth is fixed by its input size; only channel
/// counts vary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub template_input: usize,
    /// Output channels of each stage, indexed like [`BranchId::ALL`].
    pub branch_channels: [Vec<usize>; 3],
    pub template_channels: Vec<usize>,
    /// Hidden head widths; the final layer always has one channel.
    pub head_channels: Vec<usize>,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            template_input: 56,
            branch_channels: [vec![16, 32, 32], vec![16, 32], vec![32]],
            template_channels: vec![16, 16],
            head_channels: vec![32, 1],
        }
    }
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        for b in BranchId::ALL {
            let ch = &self.branch_channels[b.index()];
            if ch.len() != b.stages() {
                return Err(Error::Param(format!(
                    "branch {b} needs {} stages, got {}",
                    b.stages(),
                    ch.len()
                )));
            }
        }
        self.branch_out_channels()?;
        let all: Vec<usize> = self
            .branch_channels
            .iter()
            .flatten()
            .chain(&self.template_channels)
            .chain(&self.head_channels)
            .copied()
            .collect();
        if all.contains(&0) {
            return Err(Error::Param("channel counts must be positive".into()));
        }
        if self.template_channels.is_empty() || self.template_input == 0 {
            return Err(Error::Param("template branch needs at least one stage".into()));
        }
        if self.template_input % (1 << self.template_channels.len()) != 0 {
            return Err(Error::Param(format!(
                "template input {} not divisible by 2^{}",
                self.template_input,
                self.template_channels.len()
            )));
        }
        if self.head_channels.last() != Some(&1) {
            return Err(Error::Param("head must end in a single channel".into()));
        }
        Ok(())
    }

    fn branch_out_channels(&self) -> Result<usize> {
        let outs: Vec<usize> = self
            .branch_channels
            .iter()
            .map(|c| c.last().copied().unwrap_or(0))
            .collect();
        if outs.iter().any(|&c| c != outs[0]) {
            return Err(Error::Param(format!(
                "all branches must emit the same channel count, got {outs:?}"
            )));
        }
        Ok(outs[0])
    }

    /// Spatial size of the template feature map before resizing.
    pub fn template_feature_size(&self) -> usize {
        self.template_input >> self.template_channels.len()
    }

    pub fn template_out_channels(&self) -> usize {
        *self.template_channels.last().expect("validated")
    }

    pub fn head_in_channels(&self) -> usize {
        self.branch_channels[0].last().copied().unwrap_or(0) + self.template_out_channels()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl ConvLayer {
    fn init(out_c: usize, in_c: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_c * KERNEL * KERNEL;
        let bound = (1.0 / fan_in as f64).sqrt();
        let kernels = Tensor::from_fn(&[out_c, in_c, KERNEL, KERNEL], |_| rng.gen_range(-bound..bound));
        let bias = Tensor::from_fn(&[out_c], |_| rng.gen_range(-bound..bound));
        Self { kernels, bias }
    }

    fn zeros_like(&self) -> Self {
        Self {
            kernels: Tensor::zeros(self.kernels.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }
}

/// All learnable weights of the extractor plus the architecture they were
/// built for. The same type carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub(crate) arch: ArchSpec,
    pub(crate) branches: [Vec<ConvLayer>; 3],
    pub(crate) template: Vec<ConvLayer>,
    pub(crate) head: Vec<ConvLayer>,
}

pub type ModelGrads = ModelParams;

fn init_stack(channels: &[usize], in_c: usize, rng: &mut ChaCha8Rng) -> Vec<ConvLayer> {
    let mut prev = in_c;
    channels
        .iter()
        .map(|&c| {
            let layer = ConvLayer::init(c, prev, rng);
            prev = c;
            layer
        })
        .collect()
}

/// Deterministic initialisation of the default architecture.
pub fn build_model(seed: u64) -> ModelParams {
    build_model_with(ArchSpec::default(), seed).expect("default architecture is valid")
}

/// Uniform `[-sqrt(1/fan_in), sqrt(1/fan_in)]` weights and biases.
pub fn build_model_with(arch: ArchSpec, seed: u64) -> Result<ModelParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let branches = [0, 1, 2].map(|i| init_stack(&arch.branch_channels[i], 3, &mut rng));
    let template = init_stack(&arch.template_channels, 3, &mut rng);
    let head = init_stack(&arch.head_channels, arch.head_in_channels(), &mut rng);
    Ok(ModelParams {
        arch,
        branches,
        template,
        head,
    })
}

impl ParamSet for ModelParams {
    /// Fixed order: branches B224, B112, B56 (stage by stage, kernels then
    /// bias), then the template stages, then the head layers.
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers()
            .flat_map(|l| [&l.kernels, &l.bias])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.branches
            .iter_mut()
            .flatten()
            .chain(self.template.iter_mut())
            .chain(self.head.iter_mut())
            .flat_map(|l| [&mut l.kernels, &mut l.bias])
            .collect()
    }
}

impl ModelParams {
    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.branches
            .iter()
            .flatten()
            .chain(&self.template)
            .chain(&self.head)
    }

    pub fn branch_layers(&self, branch: BranchId) -> &[ConvLayer] {
        &self.branches[branch.index()]
    }

    pub fn zeros_like(&self) -> ModelGrads {
        ModelParams {
            arch: self.arch.clone(),
            branches: [0, 1, 2].map(|i| self.branches[i].iter().map(ConvLayer::zeros_like).collect()),
            template: self.template.iter().map(ConvLayer::zeros_like).collect(),
            head: self.head.iter().map(ConvLayer::zeros_like).collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn template_input(&self) -> usize {
        self.arch.template_input
    }
}

/// Template-branch output, resized to the grid and ready for
/// concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateFeatures {
    pub(crate) features: Tensor,
    pub source_size: (usize, usize),
}

impl TemplateFeatures {
    pub fn features(&self) -> &Tensor {
        &self.features
    }

    /// Placeholder for extractors that ignore the template.
    pub fn empty() -> Self {
        Self {
            features: Tensor::zeros(&[1, 1, 1]),
            source_size: (0, 0),
        }
    }
}

/// Activations of a conv+ReLU stack: `acts[0]` is the input, `acts[i+1]` the
/// output of layer `i`.
struct StackTrace {
    acts: Vec<Tensor>,
}

fn stack_forward(layers: &[ConvLayer], input: Tensor, stride: usize) -> Result<StackTrace> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input);
    for l in layers {
        let mut y = conv2d_forward(acts.last().expect("non-empty"), &l.kernels, &l.bias, stride, 1)?;
        relu_in_place(&mut y);
        acts.push(y);
    }
    Ok(StackTrace { acts })
}

/// Backpropagates `grad` (w.r.t. the last activation) through the stack,
/// adding into `grads`. Returns the input gradient when `want_input`.
fn stack_backward(
    layers: &[ConvLayer],
    trace: &StackTrace,
    mut grad: Tensor,
    stride: usize,
    grads: &mut [ConvLayer],
    want_input: bool,
) -> Result<Option<Tensor>> {
    for i in (0..layers.len()).rev() {
        let upstream = relu_backward(&trace.acts[i + 1], &grad)?;
        let l = &layers[i];
        if i == 0 && !want_input {
            let (dk, db) = conv2d_backward_params(&trace.acts[0], &l.kernels, &upstream, stride, 1)?;
            grads[i].kernels.add_scaled(&dk, 1.0)?;
            grads[i].bias.add_scaled(&db, 1.0)?;
            return Ok(None);
        }
        let g = conv2d_backward(&trace.acts[i], &l.kernels, &upstream, stride, 1)?;
        grads[i].kernels.add_scaled(&g.kernels, 1.0)?;
        grads[i].bias.add_scaled(&g.bias, 1.0)?;
        grad = g.input;
    }
    Ok(Some(grad))
}

/// Template encoding with the activations needed for backpropagation.
pub(crate) struct TemplateTrace {
    stack: StackTrace,
    raw_shape: Vec<usize>,
}

pub(crate) fn encode_template_traced(
    params: &ModelParams,
    template: &Image,
) -> Result<(TemplateFeatures, TemplateTrace)> {
    let size = params.arch.template_input;
    if template.width() != size || template.height() != size {
        return Err(Error::Shape(format!(
            "template must be {size}x{size}, got {}x{}",
            template.width(),
            template.height()
        )));
    }
    let stack = stack_forward(&params.template, template.to_tensor(), 2)?;
    let raw = stack.acts.last().expect("non-empty");
    let raw_shape = raw.shape().to_vec();
    let features = bilinear_resize(raw, GRID, GRID)?;
    Ok((
        TemplateFeatures {
            features,
            source_size: (size, size),
        },
        TemplateTrace { stack, raw_shape },
    ))
}

/// Encodes a target template already resized to the template resolution.
pub fn encode_template(params: &ModelParams, template: &Image) -> Result<TemplateFeatures> {
    encode_template_traced(params, template).map(|(f, _)| f)
}

pub(crate) fn template_backward(
    params: &ModelParams,
    trace: &TemplateTrace,
    grad_features: &Tensor,
    grads: &mut ModelGrads,
) -> Result<()> {
    let g_raw = bilinear_resize_backward(&trace.raw_shape, grad_features)?;
    stack_backward(&params.template, &trace.stack, g_raw, 2, &mut grads.template, false)?;
    Ok(())
}

/// Everything the backward pass needs from one forward pass.
pub(crate) struct ForwardTrace {
    branch: BranchId,
    branch_stack: StackTrace,
    head_stack: StackTrace,
    logits_input: Tensor,
    pub(crate) output: Tensor,
}

pub(crate) fn forward_traced(
    params: &ModelParams,
    crop: &Image,
    template: &TemplateFeatures,
    branch: BranchId,
) -> Result<ForwardTrace> {
    let size = branch.input_size();
    if crop.width() != size || crop.height() != size {
        return Err(Error::Shape(format!(
            "branch {branch} expects a {size}x{size} crop, got {}x{}",
            crop.width(),
            crop.height()
        )));
    }
    let expected = [params.arch.template_out_channels(), GRID, GRID];
    if template.features.shape() != expected {
        return Err(Error::Shape(format!(
            "template features {:?} do not match concatenation point {expected:?}",
            template.features.shape()
        )));
    }
    let branch_stack = stack_forward(params.branch_layers(branch), crop.to_tensor(), 2)?;
    let joined = concat_channels(&[branch_stack.acts.last().expect("non-empty"), &template.features])?;

    let (hidden, last) = params.head.split_at(params.head.len() - 1);
    let head_stack = stack_forward(hidden, joined, 1)?;
    let logits_input = head_stack.acts.last().expect("non-empty").clone();
    let logits = conv2d_forward(&logits_input, &last[0].kernels, &last[0].bias, 1, 1)?;
    let output = sigmoid(&logits);
    Ok(ForwardTrace {
        branch,
        branch_stack,
        head_stack,
        logits_input,
        output,
    })
}

/// Backpropagates the gradient of the loss w.r.t. the sigmoid output.
/// Returns the gradient w.r.t. the template features.
pub(crate) fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    grad_output: &Tensor,
    grads: &mut ModelGrads,
) -> Result<Tensor> {
    let n_head = params.head.len();
    let last = &params.head[n_head - 1];
    let g_logits = sigmoid_backward(&trace.output, grad_output)?;
    let g = conv2d_backward(&trace.logits_input, &last.kernels, &g_logits, 1, 1)?;
    grads.head[n_head - 1].kernels.add_scaled(&g.kernels, 1.0)?;
    grads.head[n_head - 1].bias.add_scaled(&g.bias, 1.0)?;

    let g_joined = stack_backward(
        &params.head[..n_head - 1],
        &trace.head_stack,
        g.input,
        1,
        &mut grads.head[..n_head - 1],
        true,
    )?
    .expect("input gradient requested");

    let branch_c = trace.branch_stack.acts.last().expect("non-empty").shape()[0];
    let mut parts = split_channels(&g_joined, &[branch_c, params.arch.template_out_channels()])?;
    let g_template = parts.pop().expect("two parts");
    let g_branch = parts.pop().expect("two parts");
    let bi = trace.branch.index();
    stack_backward(
        &params.branches[bi],
        &trace.branch_stack,
        g_branch,
        2,
        &mut grads.branches[bi],
        false,
    )?;
    Ok(g_template)
}

/// Runs the active image branch and the shared head on a crop already
/// resized to the branch resolution.
pub fn extract_roi_matrix(
    params: &ModelParams,
    crop: &Image,
    template: &TemplateFeatures,
    branch: BranchId,
) -> Result<RoiMatrix> {
    let trace = forward_traced(params, crop, template, branch)?;
    RoiMatrix::from_tensor(&trace.output)
}

/// Same as [`extract_roi_matrix`] but encodes the raw template inline.
pub fn extract_with_template(
    params: &ModelParams,
    crop: &Image,
    template: &Image,
    branch: BranchId,
) -> Result<RoiMatrix> {
    let feats = encode_template(params, template)?;
    extract_roi_matrix(params, crop, &feats, branch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(size: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(size, size, |_, _| [rng.gen(), rng.gen(), rng.gen()])
    }

    #[test]
    fn branch_thresholds() {
        assert_eq!(select_branch(60.0, 50.0), BranchId::B56);
        assert_eq!(select_branch(64.0, 10.0), BranchId::B56);
        assert_eq!(select_branch(128.0, 90.0), BranchId::B112);
        assert_eq!(select_branch(500.0, 400.0), BranchId::B224);
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(build_model(1), build_model(1));
        assert_ne!(build_model(1), build_model(2));
    }

    #[test]
    fn every_branch_emits_the_grid() {
        let params = build_model(3);
        let tf = encode_template(&params, &noise_image(56, 9)).unwrap();
        assert_eq!(tf.features().shape(), &[16, GRID, GRID]);
        for b in BranchId::ALL {
            let roi = extract_roi_matrix(&params, &noise_image(b.input_size(), 4), &tf, b).unwrap();
            assert!(roi.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn template_encoding_is_pure() {
        let params = build_model(5);
        let t = noise_image(56, 1);
        assert_eq!(encode_template(&params, &t).unwrap(), encode_template(&params, &t).unwrap());
    }

    #[test]
    fn cached_template_matches_inline() {
        let params = build_model(5);
        let t = noise_image(56, 1);
        let crop = noise_image(112, 2);
        let tf = encode_template(&params, &t).unwrap();
        let a = extract_roi_matrix(&params, &crop, &tf, BranchId::B112).unwrap();
        let b = extract_with_template(&params, &crop, &t, BranchId::B112).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn resolution_mismatches() {
        let params = build_model(5);
        assert!(matches!(encode_template(&params, &noise_image(40, 1)), Err(Error::Shape(_))));
        let tf = encode_template(&params, &noise_image(56, 1)).unwrap();
        let err = extract_roi_matrix(&params, &noise_image(112, 2), &tf, BranchId::B56);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn arch_validation() {
        let mut arch = ArchSpec::default();
        arch.branch_channels[2] = vec![16, 32];
        assert!(build_model_with(arch, 0).is_err());
        let mut arch = ArchSpec::default();
        arch.head_channels = vec![32, 2];
        assert!(build_model_with(arch, 0).is_err());
    }
}

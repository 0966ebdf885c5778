//! The CSI reconstruction network: stacked dilated-convolution blocks with
//! batch normalization and ReLU, a linear output convolution, and the
//! masked residual merge that passes observed entries through unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::{scatter_to_sparse, FeedbackVector, Mask};
use crate::nn::adam::AdamState;
use crate::nn::layers::{
    batch_norm_backward, batch_norm_infer, batch_norm_train, conv_backward, conv_forward,
    relu_backward, relu_forward, residual_merge, residual_merge_backward, BatchNormLayer, BnCache,
    ConvLayer,
};
use crate::numerics::{RealTensor, Scalar};

/// Kinds of layers in the reconstruction stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    ConvT,
    BatchNorm,
    Relu,
    ResidualMerge,
}

/// Static description of one layer, used for checkpoints and parameter
/// accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub dilation: usize,
    pub has_bias: bool,
}

/// Channel widths and dilations of the convolution blocks. The default
/// matches the published architecture; the alternate schedule doubles the
/// early dilations for sparser masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_channels: Vec<usize>,
    pub dilations: Vec<usize>,
}

impl Architecture {
    /// Full-scale stack: channels 32/64/128/64/32, dilations [15,7,4,2,2].
    pub fn paper_scale() -> Self {
        Architecture {
            hidden_channels: vec![32, 64, 128, 64, 32],
            dilations: vec![15, 7, 4, 2, 2],
        }
    }

    /// Alternate dilation schedule for sparser masks: [30,15,7,4,2].
    pub fn paper_scale_wide_dilation() -> Self {
        Architecture {
            hidden_channels: vec![32, 64, 128, 64, 32],
            dilations: vec![30, 15, 7, 4, 2],
        }
    }

    /// Small stack for desk-scale experiments.
    pub fn desk_default() -> Self {
        Architecture {
            hidden_channels: vec![16, 32, 32, 16, 8],
            dilations: vec![8, 4, 2, 1, 1],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_channels.is_empty() || self.hidden_channels.len() != self.dilations.len() {
            return Err(Error::Configuration(
                "hidden_channels and dilations must be equal-length and non-empty".into(),
            ));
        }
        if self.dilations.iter().any(|&d| d == 0) {
            return Err(Error::Configuration("dilations must be >= 1".into()));
        }
        Ok(())
    }
}

/// One runtime layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(ConvLayer<T>),
    Norm(BatchNormLayer<T>),
    Relu,
}

/// Ordered collection of layer parameters; the residual merge at the end of
/// the stack is implicit and has no parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub layers: Vec<Layer<T>>,
    pub architecture: Architecture,
}

impl<T: Scalar> ModelParams<T> {
    /// Build and initialize the stack: [conv, bn, relu] per hidden block and
    /// a final linear convolution back to 2 channels. Weights are uniform in
    /// +-sqrt(6 / (fan_in + fan_out)), biases zero, gamma 1, beta 0.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut in_ch = 2usize;
        for (&out_ch, &dilation) in arch.hidden_channels.iter().zip(&arch.dilations) {
            layers.push(Layer::Conv(init_conv(&mut rng, in_ch, out_ch, dilation)));
            layers.push(Layer::Norm(BatchNormLayer::new(out_ch)));
            layers.push(Layer::Relu);
            in_ch = out_ch;
        }
        layers.push(Layer::Conv(init_conv(&mut rng, in_ch, 2, 1)));
        Ok(ModelParams {
            layers,
            architecture: arch.clone(),
        })
    }

    /// Layer table including the mask reshape and residual merge rows, in
    /// execution order.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        for layer in &self.layers {
            specs.push(match layer {
                Layer::Conv(c) => LayerSpec {
                    kind: LayerKind::ConvT,
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    kernel: (3, 3),
                    dilation: c.dilation,
                    has_bias: true,
                },
                Layer::Norm(n) => LayerSpec {
                    kind: LayerKind::BatchNorm,
                    in_channels: n.channels(),
                    out_channels: n.channels(),
                    kernel: (0, 0),
                    dilation: 0,
                    has_bias: false,
                },
                Layer::Relu => LayerSpec {
                    kind: LayerKind::Relu,
                    in_channels: 0,
                    out_channels: 0,
                    kernel: (0, 0),
                    dilation: 0,
                    has_bias: false,
                },
            });
        }
        specs.push(LayerSpec {
            kind: LayerKind::ResidualMerge,
            in_channels: 2,
            out_channels: 2,
            kernel: (0, 0),
            dilation: 0,
            has_bias: false,
        });
        specs
    }

    /// Per-layer parameter counts for the layers that carry parameters, in
    /// stack order (convolutions count weights + biases, batch norms count
    /// gamma/beta plus both running statistics).
    pub fn parameter_counts(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv(c) => Some(c.parameter_count()),
                Layer::Norm(n) => Some(n.parameter_count()),
                Layer::Relu => None,
            })
            .collect()
    }

    /// Total number of trainable scalars (conv weights/biases, bn gamma/beta).
    pub fn trainable_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => c.weight.len() + c.bias.len(),
                Layer::Norm(n) => 2 * n.channels(),
                Layer::Relu => 0,
            })
            .sum()
    }

    /// Mutable views of the trainable tensors in a fixed enumeration order.
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(c.weight.data_mut());
                    out.push(c.bias.as_mut_slice());
                }
                Layer::Norm(n) => {
                    out.push(n.gamma.as_mut_slice());
                    out.push(n.beta.as_mut_slice());
                }
                Layer::Relu => {}
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv(c) => Layer::Conv(c.cast()),
                    Layer::Norm(n) => Layer::Norm(n.cast()),
                    Layer::Relu => Layer::Relu,
                })
                .collect(),
            architecture: self.architecture.clone(),
        }
    }
}

fn init_conv<T: Scalar>(
    rng: &mut ChaCha8Rng,
    in_ch: usize,
    out_ch: usize,
    dilation: usize,
) -> ConvLayer<T> {
    let mut layer = ConvLayer::zeros(in_ch, out_ch, dilation);
    let fan_in = 9.0 * in_ch as f64;
    let fan_out = 9.0 * out_ch as f64;
    let bound = (6.0 / (fan_in + fan_out)).sqrt();
    for w in layer.weight.data_mut() {
        *w = T::from_f64((rng.gen::<f64>() * 2.0 - 1.0) * bound);
    }
    layer
}

/// Intermediate activations recorded by a training-mode forward pass.
pub struct ForwardTrace<T> {
    /// Scattered sparse input, `[B, na, nc, 2]`.
    pub x0: RealTensor<T>,
    /// Input to each layer; `acts[i]` feeds `layers[i]`.
    pub acts: Vec<RealTensor<T>>,
    pub bn_caches: Vec<Option<BnCache<T>>>,
    pub output: RealTensor<T>,
}

/// Gradients for the trainable tensors, aligned with
/// [`ModelParams::trainable_mut`].
pub type ModelGrads<T> = Vec<Vec<T>>;

/// Build the batched sparse input tensor from feedback vectors.
pub fn scatter_batch<T: Scalar>(
    fbs: &[FeedbackVector<T>],
    mask: &Mask,
) -> Result<RealTensor<T>> {
    if fbs.is_empty() {
        return Err(Error::Argument("empty feedback batch".into()));
    }
    let (na, nc) = (mask.na(), mask.nc());
    let mut out = RealTensor::zeros(&[fbs.len(), na, nc, 2]);
    let plane = na * nc * 2;
    for (bi, fb) in fbs.iter().enumerate() {
        let sparse = scatter_to_sparse(fb, mask)?;
        out.data_mut()[bi * plane..(bi + 1) * plane].copy_from_slice(sparse.data());
    }
    Ok(out)
}

/// Training-mode forward over a batch: records the activations needed for
/// the backward pass and updates the batch-norm running statistics.
pub fn forward_train_batch<T: Scalar>(
    model: &mut ModelParams<T>,
    x0: RealTensor<T>,
    mask: &Mask,
) -> Result<ForwardTrace<T>> {
    let mut acts: Vec<RealTensor<T>> = Vec::with_capacity(model.layers.len());
    let mut bn_caches: Vec<Option<BnCache<T>>> = Vec::with_capacity(model.layers.len());
    let mut current = x0.clone();
    for layer in &mut model.layers {
        let next = match layer {
            Layer::Conv(c) => {
                bn_caches.push(None);
                conv_forward(&current, c)?
            }
            Layer::Norm(n) => {
                let (y, cache) = batch_norm_train(&current, n)?;
                bn_caches.push(Some(cache));
                y
            }
            Layer::Relu => {
                bn_caches.push(None);
                relu_forward(&current)
            }
        };
        acts.push(std::mem::replace(&mut current, next));
    }
    let output = residual_merge(&current, &x0, mask)?;
    acts.push(current);
    Ok(ForwardTrace {
        x0,
        acts,
        bn_caches,
        output,
    })
}

/// Inference-mode forward over a batch: running statistics, no caches, no
/// mutation.
pub fn forward_infer_batch<T: Scalar>(
    model: &ModelParams<T>,
    x0: &RealTensor<T>,
    mask: &Mask,
) -> Result<RealTensor<T>> {
    let mut current = x0.clone();
    for layer in &model.layers {
        current = match layer {
            Layer::Conv(c) => conv_forward(&current, c)?,
            Layer::Norm(n) => batch_norm_infer(&current, n)?,
            Layer::Relu => relu_forward(&current),
        };
    }
    residual_merge(&current, x0, mask)
}

/// Backpropagate `grad_output` through the stack, returning gradients for
/// every trainable tensor in enumeration order.
pub fn backward_batch<T: Scalar>(
    model: &ModelParams<T>,
    trace: &ForwardTrace<T>,
    grad_output: &RealTensor<T>,
    mask: &Mask,
) -> Result<ModelGrads<T>> {
    let (mut grad, _grad_x0) = residual_merge_backward(grad_output, mask)?;
    // Collect per-layer gradients walking backwards, then reverse into
    // enumeration order.
    let mut rev_grads: Vec<Vec<Vec<T>>> = Vec::new();
    for (i, layer) in model.layers.iter().enumerate().rev() {
        match layer {
            Layer::Conv(c) => {
                let (gx, gw, gb) = conv_backward(&grad, &trace.acts[i], c)?;
                rev_grads.push(vec![gw.into_data(), gb]);
                grad = gx;
            }
            Layer::Norm(n) => {
                let cache = trace.bn_caches[i].as_ref().ok_or_else(|| {
                    Error::Argument("batch norm backward requires a train-mode trace".into())
                })?;
                let (gx, ggamma, gbeta) = batch_norm_backward(&grad, cache, n)?;
                rev_grads.push(vec![ggamma, gbeta]);
                grad = gx;
            }
            Layer::Relu => {
                grad = relu_backward(&grad, &trace.acts[i]);
            }
        }
    }
    let mut grads: ModelGrads<T> = Vec::new();
    for layer_grads in rev_grads.into_iter().rev() {
        grads.extend(layer_grads);
    }
    Ok(grads)
}

/// Reconstruct one channel tensor from a feedback vector. This is the
/// deployment path: batch of one, inference-mode batch norm.
pub fn forward<T: Scalar>(
    model: &ModelParams<T>,
    fb: &FeedbackVector<T>,
    mask: &Mask,
) -> Result<RealTensor<T>> {
    if fb.values.len() != mask.feedback_len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} feedback values", mask.feedback_len()),
            got: format!("{}", fb.values.len()),
        });
    }
    let x0 = scatter_batch(std::slice::from_ref(fb), mask)?;
    let out = forward_infer_batch(model, &x0, mask)?;
    let plane = mask.na() * mask.nc() * 2;
    let data = out.data()[..plane].to_vec();
    RealTensor::from_vec(&[mask.na(), mask.nc(), 2], data)
}

/// Apply one Adam update of `grads` to the model's trainable tensors.
pub fn apply_adam<T: Scalar>(
    model: &mut ModelParams<T>,
    grads: &ModelGrads<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    state.step(model.trainable_mut(), grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{apply_mask, uniform_mask};

    #[test]
    fn paper_scale_parameter_counts_match_table() {
        let model = ModelParams::<f32>::new(&Architecture::paper_scale(), 1).unwrap();
        assert_eq!(
            model.parameter_counts(),
            vec![608, 128, 18496, 256, 73856, 512, 73792, 256, 18464, 128, 578]
        );
    }

    #[test]
    fn paper_scale_feedback_length() {
        let mask = uniform_mask(64, 160, 0.025).unwrap();
        assert_eq!(mask.feedback_len(), 512);
    }

    #[test]
    fn fresh_model_passes_observed_entries_through() {
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let model = ModelParams::<f32>::new(&Architecture::desk_default(), 3).unwrap();
        let mut tensor = RealTensor::<f32>::zeros(&[4, 8, 2]);
        for (i, v) in tensor.data_mut().iter_mut().enumerate() {
            *v = (i as f32 * 0.37).sin();
        }
        let fb = apply_mask(&tensor, &mask).unwrap();
        let out = forward(&model, &fb, &mask).unwrap();
        for (a, c) in mask.kept_positions() {
            assert_eq!(out.get3(a, c, 0), tensor.get3(a, c, 0));
            assert_eq!(out.get3(a, c, 1), tensor.get3(a, c, 1));
        }
    }

    #[test]
    fn dual_precision_forward_agrees() {
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let model32 = ModelParams::<f32>::new(&Architecture::desk_default(), 5).unwrap();
        let model64 = model32.cast::<f64>();
        let mut tensor = RealTensor::<f32>::zeros(&[4, 8, 2]);
        for (i, v) in tensor.data_mut().iter_mut().enumerate() {
            *v = ((i * 7 % 13) as f32 - 6.0) * 0.1;
        }
        let fb32 = apply_mask(&tensor, &mask).unwrap();
        let fb64 = FeedbackVector {
            values: fb32.values.iter().map(|&v| v as f64).collect(),
            mask_id: fb32.mask_id.clone(),
        };
        let out32 = forward(&model32, &fb32, &mask).unwrap();
        let out64 = forward(&model64, &fb64, &mask).unwrap();
        for (a, b) in out32.data().iter().zip(out64.data()) {
            let denom = b.abs().max(1e-3);
            assert!(((*a as f64) - b).abs() / denom < 1e-4);
        }
    }

    #[test]
    fn layer_spec_table_shape() {
        let model = ModelParams::<f32>::new(&Architecture::paper_scale(), 1).unwrap();
        let specs = model.layer_specs();
        // 5 blocks of (conv, bn, relu) + final conv + residual merge.
        assert_eq!(specs.len(), 17);
        assert_eq!(specs[0].kind, LayerKind::ConvT);
        assert_eq!(specs[0].dilation, 15);
        assert_eq!(specs[16].kind, LayerKind::ResidualMerge);
    }
}

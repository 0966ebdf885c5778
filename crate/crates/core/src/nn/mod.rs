//! From-scratch differentiable layers, the reconstruction network and the
//! Adam optimizer.

mod adam;
mod layers;
mod model;

pub use adam::{AdamConfig, AdamState};
pub use layers::{
    batch_norm_backward, batch_norm_forward, batch_norm_infer, batch_norm_train, conv_backward,
    conv_forward, relu_backward, relu_forward, residual_merge, residual_merge_backward,
    BatchNormLayer, BnCache, ConvLayer, Mode,
};
pub use model::{
    apply_adam, backward_batch, forward, forward_infer_batch, forward_train_batch, scatter_batch,
    Architecture, ForwardTrace, Layer, LayerKind, LayerSpec, ModelGrads, ModelParams,
};

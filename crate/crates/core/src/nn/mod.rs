//! Minimal differentiable tensor substrate.

mod gemm;
mod init;
pub mod layers;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gemm::dot;
pub use init::{glorot_bound, glorot_init};
pub use layers::{
    conv2d, conv_out_len, deconv2d, deconv_out_len, elementwise_mul, linear, relu, softmax,
};
pub use optim::{clip_global_norm, global_norm, AdamConfig, AdamState};
pub use params::{Grads, Param, ParamId, ParamSet};
pub use tape::{ErrorClip, Tape, TapeGrads, Var};
pub use tensor::Tensor;

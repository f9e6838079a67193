//! A small dense-tensor network engine: convolution, transposed
//! convolution, max pooling, ReLU, Euclidean loss, backpropagation and SGD.
//!
//! Everything runs in `f64`.

mod conv;
mod gradcheck;
mod im2col;
mod io;
mod layer;
mod ops;
mod pool;
mod sgd;
mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use conv::{
    conv2d_backward, conv2d_forward, conv_output_size, deconv2d_backward, deconv2d_forward,
    deconv_output_size, ConvGrads,
};
pub use gradcheck::{gradient_check, gradient_check_with, Differentiable, GradCheckOptions, GradCheckReport};
pub use io::{decode_tensor, encode_tensor, read_tensor, write_tensor, TENSOR_MAGIC};
pub use layer::{Activation, Layer, LayerKind, LayerSpec, Stack, Tape};
pub use ops::{euclidean_loss, relu, relu_backward, resize_bilinear, resize_bilinear_backward};
pub use pool::{maxpool_backward, maxpool_forward, PoolOutput};
pub use sgd::{sgd_step, SgdConfig};
pub use tensor::Tensor;

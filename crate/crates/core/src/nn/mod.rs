//! Dense numeric kernels, the parameter store and gradient checking.
//!
//! All sequence feature maps are stored position-major: a sequence of `n`
//! vectors of width `c` is an `n × c` [`Matrix`] whose row `h` is the vector
//! at position `h`. A convolution window over positions `h..h+s` is then one
//! contiguous slice of the backing buffer.

mod gradcheck;
mod matrix;
mod ops;
mod params;

pub use gradcheck::{grad_check, GradCheckReport, TensorCheck};
pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub use ops::{
    affine, mean_pool, relu, relu_backward, sigmoid, sigmoid_scalar, softmax, softmax_backward,
    tanh_act, window_conv, window_conv_backward, Axis,
};
pub use params::{uniform_matrix, Gradients, ParamId, ParamStore};

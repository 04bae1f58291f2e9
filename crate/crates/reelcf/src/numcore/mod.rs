//! Dense numerical kernels: temporal convolution, ReLU, temporal average
//! pooling, fully-connected layers, and the stable sigmoid/BCE head, each
//! with an analytic backward pass and a finite-difference checker.
//!
//! Everything runs in `f64`; feature files are `f32` on disk and widened on
//! load. All kernels are pure functions with fixed summation order, so
//! outputs are bit-reproducible and safe to call concurrently.

mod conv;
mod dense;
mod gradcheck;
mod tensor;

pub use conv::{temporal_conv_backward, temporal_conv_forward, ConvGrads, ConvParams, ConvSpec};
pub use dense::{
    affine_backward, affine_forward, avg_pool_time, avg_pool_time_backward, relu, relu_backward,
    relu_backward_slice, relu_slice, sigmoid, sigmoid_bce, AffineGrads, AffineParams, BceOutput,
};
pub use gradcheck::{
    central_difference_grad, grad_check, max_relative_error, run_layer_gradchecks,
    GradCheckReport, GRADCHECK_EPS, GRADCHECK_TOLERANCE,
};
pub use tensor::Tensor2;

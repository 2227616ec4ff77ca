//! Layer primitives: tensors flow through dilated convolutions, ReLU and
//! elementwise sums, each with an exact backward pass.

mod activation;
mod conv;
mod gemm;
pub mod gradcheck;

pub use activation::{add_elementwise, relu_backward, relu_forward};
pub use conv::{conv2d_dilated_backward, conv2d_dilated_forward, ConvLayerParams, GradBundle};
pub use gradcheck::{finite_difference_gradient, max_relative_error, relative_error};

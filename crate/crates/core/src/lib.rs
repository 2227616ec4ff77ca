//! Dilated residual network for SAR image despeckling.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! * [`speckle`]: unit-mean Gamma speckle `y = x * n` and the equivalent
//!   number of looks,
//! * [`nn`]: dilated convolution, ReLU and sums with exact backward passes,
//!   plus a finite-difference oracle,
//! * [`network`]: the seven-layer network with two skip connections that
//!   predicts the speckle residual, and receptive-field arithmetic,
//! * [`training`]: patch datasets, residual MSE, Adam/SGD and the epoch loop,
//! * [`metrics`]: PSNR, SSIM and EPD-ROA,
//! * [`io`]: PGM images, model files, configs, CSV logs and SVG plots.

pub mod error;
pub mod gradcheck_suite;
pub mod image;
pub mod io;
pub mod metrics;
pub mod network;
pub mod nn;
mod rng;
pub mod speckle;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, ModelError, Result};
pub use image::{ImageF, Region};
pub use metrics::{epd_roa, psnr, ssim, Direction, MetricReport};
pub use network::{build_sardrn, despeckle, Network, NetworkSpec, ReceptiveFieldReport};
pub use nn::{ConvLayerParams, GradBundle};
pub use speckle::{apply_speckle, enl, sample_speckle_field, EnlDefinition, SpeckleConfig};
pub use tensor::{Shape4, Tensor4};
pub use training::{train, AdamState, TrainConfig, TrainReport, TrainingPair};

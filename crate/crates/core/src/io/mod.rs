//! Persistence: PGM images, model files, experiment configs, logs and plots.

pub mod config;
pub mod logs;
pub mod model;
pub mod pgm;
pub mod plot;

pub use config::ExperimentConfig;
pub use model::{decode_model, encode_model, load_model, save_model};
pub use pgm::{decode_pgm, encode_pgm, load_image, save_image, save_image_with_maxval};

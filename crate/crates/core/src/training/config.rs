use crate::error::{Error, Result};
use crate::speckle::SpeckleConfig;

/// Hyperparameters of a training run. Defaults are the reference full-scale settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub looks: f64,
    pub patch_size: usize,
    pub stride: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplicative learning-rate decay applied every `decay_interval_epochs`.
    pub lr_decay: f64,
    pub decay_interval_epochs: usize,
    pub seed: u64,
    /// Divide the Adam moments by `1 - beta^t` before the update.
    pub adam_bias_correction: bool,
    /// Stop after this many optimizer steps even if epochs remain.
    pub max_iterations: Option<usize>,
    /// Draw fresh speckle for every patch each epoch instead of once.
    pub redraw_noise: bool,
    /// Share of images held out for per-epoch validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            looks: 1.0,
            patch_size: 40,
            stride: 10,
            batch_size: 128,
            epochs: 50,
            lr0: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr_decay: 0.5,
            decay_interval_epochs: 10,
            seed: 0,
            adam_bias_correction: false,
            max_iterations: None,
            redraw_noise: false,
            validation_fraction: 0.1,
        }
    }
}

/// The optimizer-specific subset of [`TrainConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bias_correction: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        TrainConfig::default().adam()
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            bias_correction: self.adam_bias_correction,
        }
    }

    pub fn speckle(&self) -> SpeckleConfig {
        SpeckleConfig {
            looks: self.looks,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.speckle().validate()?;
        if self.patch_size == 0 || self.stride == 0 || self.batch_size == 0 {
            return bad("patch_size, stride and batch_size must be positive".into());
        }
        if self.decay_interval_epochs == 0 {
            return bad("decay_interval_epochs must be positive".into());
        }
        for (name, v) in [("lr0", self.lr0), ("lr_decay", self.lr_decay), ("epsilon", self.epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation_fraction must lie in [0, 1), got {}", self.validation_fraction));
        }
        Ok(())
    }
}

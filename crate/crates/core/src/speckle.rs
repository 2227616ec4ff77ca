//! Multiplicative Gamma speckle and the equivalent number of looks.
//!
//! A speckled observation is `y = x * n`, where every `n` is drawn
//! independently from a Gamma distribution with shape `L` and rate `L`
//! (unit mean, variance `1/L`).
//!
//! # Seed-to-output mapping
//!
//! This mapping is part of the public contract; changing it changes every
//! simulated dataset.
//!
//! * Generator: `ChaCha8Rng::seed_from_u64(seed)` with `set_stream(stream)`.
//!   [`sample_speckle_field`] and [`apply_speckle`] use stream 0; training
//!   pairs use one stream per pair (see `training`).
//! * Uniforms: `rng.gen::<f64>()` (53 random bits scaled into `[0, 1)`).
//! * Normals: Box-Muller, one normal per pair of uniforms
//!   `z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`, the sine branch discarded.
//! * Gamma: Marsaglia-Tsang squeeze/rejection for shape `L >= 1`:
//!   `d = L - 1/3`, `c = 1/sqrt(9d)`; draw `z`, reject while
//!   `v = (1 + c z)^3 <= 0`, then draw `u` and accept `d v` if
//!   `u < 1 - 0.0331 z^4` or `ln u < z^2/2 + d(1 - v + ln v)`.
//!   The accepted value is divided by `L`.
//! * Pixels are drawn in row-major order.
//! * `L = +inf` is the noiseless limit and yields `n = 1` without consuming
//!   randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::rng::standard_normal;

/// Number of looks and seed of a speckle simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeckleConfig {
    pub looks: f64,
    pub seed: u64,
}

impl SpeckleConfig {
    pub fn new(looks: f64, seed: u64) -> Result<Self> {
        let cfg = Self { looks, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Unit gain everywhere (`L -> inf`).
    pub fn noiseless(seed: u64) -> Self {
        Self {
            looks: f64::INFINITY,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // NaN fails this comparison too
        if !(self.looks >= 1.0) {
            return Err(Error::Domain(format!("number of looks must be >= 1, got {}", self.looks)));
        }
        Ok(())
    }

    /// A sampler on the given stream of this configuration's seed.
    pub fn sampler(&self, stream: u64) -> Result<GammaSpeckle> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Ok(GammaSpeckle {
            looks: self.looks,
            rng,
        })
    }
}

/// Stream of unit-mean Gamma(L, L) speckle gains.
#[derive(Debug, Clone)]
pub struct GammaSpeckle {
    looks: f64,
    rng: ChaCha8Rng,
}

impl GammaSpeckle {
    pub fn sample(&mut self) -> f64 {
        if self.looks.is_infinite() {
            return 1.0;
        }
        let d = self.looks - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = standard_normal(&mut self.rng);
            let t = 1.0 + c * z;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u: f64 = self.rng.gen();
            let z2 = z * z;
            if u < 1.0 - 0.0331 * z2 * z2 || u.ln() < 0.5 * z2 + d * (1.0 - v + v.ln()) {
                return d * v / self.looks;
            }
        }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.sample();
        }
    }
}

/// A `height x width` field of i.i.d. speckle gains on stream 0.
pub fn sample_speckle_field(height: usize, width: usize, cfg: &SpeckleConfig) -> Result<ImageF> {
    if height == 0 || width == 0 {
        return Err(Error::Argument(format!("speckle field must be non-empty, got {height}x{width}")));
    }
    let mut sampler = cfg.sampler(0)?;
    let mut pixels = vec![0.0; height * width];
    sampler.fill(&mut pixels);
    ImageF::new(height, width, pixels)
}

/// Multiplies `x` pixelwise by a speckle field drawn from `cfg`.
pub fn apply_speckle(x: &ImageF, cfg: &SpeckleConfig) -> Result<ImageF> {
    apply_speckle_stream(x, cfg, 0)
}

/// [`apply_speckle`] on an explicit generator stream.
pub fn apply_speckle_stream(x: &ImageF, cfg: &SpeckleConfig, stream: u64) -> Result<ImageF> {
    if let Some(i) = x.pixels().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!("speckle needs nonnegative intensities, pixel {i} is negative")));
    }
    let mut sampler = cfg.sampler(stream)?;
    let mut out = x.clone();
    for v in out.pixels_mut() {
        *v *= sampler.sample();
    }
    Ok(out)
}

/// Which ENL formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnlDefinition {
    /// `mean / variance`.
    MeanOverVariance,
    /// `mean^2 / variance`, the conventional estimator of L.
    #[default]
    Standard,
}

impl std::str::FromStr for EnlDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-over-variance" => Ok(Self::MeanOverVariance),
            "standard" => Ok(Self::Standard),
            _ => Err(Error::Argument(format!("unknown ENL definition {s:?} (expected \"standard\" or \"mean-over-variance\")"))),
        }
    }
}

/// Equivalent number of looks of a (homogeneous) region, using the
/// population variance.
pub fn enl(region: &ImageF, definition: EnlDefinition) -> Result<f64> {
    if region.len() < 2 {
        return Err(Error::Argument("ENL needs at least two pixels".into()));
    }
    let first = region.pixels()[0];
    let mean = region.mean();
    let var = region.variance();
    if var == 0.0 || region.pixels().iter().all(|&v| v == first) {
        return Err(Error::DegenerateRegion);
    }
    Ok(match definition {
        EnlDefinition::MeanOverVariance => mean / var,
        EnlDefinition::Standard => mean * mean / var,
    })
}

use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// Single-channel image with `f64` pixels in row-major order.
///
/// Clean images live in `[0, 1]`; speckled observations may exceed 1 and
/// raw network estimates may leave the range entirely until export.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageF {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

/// Axis-aligned rectangle `(x, y, w, h)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl std::str::FromStr for Region {
    type Err = Error;

    /// Parses `"x,y,w,h"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Argument(format!("region {s:?}: {e}")))?;
        match parts[..] {
            [x, y, w, h] => Ok(Region { x, y, w, h }),
            _ => Err(Error::Argument(format!("region {s:?}: expected x,y,w,h"))),
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.w, self.h)
    }
}

impl ImageF {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("ImageF::new", if height == 0 { "height" } else { "width" }, 1, 0));
        }
        if pixels.len() != height * width {
            return Err(Error::shape("ImageF::new", "pixel count", height * width, pixels.len()));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pixel {i}")));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(y, x));
            }
        }
        Self { height, width, pixels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn same_dims(&self, other: &ImageF, op: &'static str) -> Result<()> {
        if self.height != other.height {
            return Err(Error::shape(op, "height", self.height, other.height));
        }
        if self.width != other.width {
            return Err(Error::shape(op, "width", self.width, other.width));
        }
        Ok(())
    }

    pub fn crop(&self, r: Region) -> Result<ImageF> {
        if r.w == 0 || r.h == 0 || r.x + r.w > self.width || r.y + r.h > self.height {
            return Err(Error::Argument(format!(
                "region {r} does not fit a {}x{} image",
                self.width, self.height
            )));
        }
        Ok(ImageF::from_fn(r.h, r.w, |y, x| self.get(r.y + y, r.x + x)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageF {
        ImageF {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamped(&self) -> ImageF {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Population variance (divides by the pixel count).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pixels.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.pixels.len() as f64
    }

    /// A `1 x 1 x h x w` tensor view of the pixels.
    pub fn to_tensor(&self) -> Tensor4 {
        Tensor4::from_vec(Shape4::new(1, 1, self.height, self.width), self.pixels.clone())
            .expect("pixel count matches shape")
    }

    /// Builds an image from sample `n`, channel 0 of a tensor.
    pub fn from_tensor(t: &Tensor4, n: usize) -> Result<ImageF> {
        let s = t.shape();
        if s.c != 1 {
            return Err(Error::shape("ImageF::from_tensor", "channels", 1, s.c));
        }
        ImageF::new(s.h, s.w, t.plane(n, 0).to_vec())
    }
}

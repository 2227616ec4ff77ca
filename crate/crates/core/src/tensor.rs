//! Dense 4-D tensors in (batch, channel, height, width) layout.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dimensions of a [`Tensor4`]: batch, channels, height, width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Checks `other` against `self` axis by axis, naming the first mismatch.
    pub fn expect_eq(&self, other: &Shape4, op: &'static str) -> Result<()> {
        let axes = [
            ("batch", self.n, other.n),
            ("channels", self.c, other.c),
            ("height", self.h, other.h),
            ("width", self.w, other.w),
        ];
        for (axis, expected, found) in axes {
            if expected != found {
                return Err(Error::shape(op, axis, expected, found));
            }
        }
        Ok(())
    }

    pub(crate) fn expect_nonempty(&self, op: &'static str) -> Result<()> {
        let axes = [
            ("batch", self.n),
            ("channels", self.c),
            ("height", self.h),
            ("width", self.w),
        ];
        for (axis, v) in axes {
            if v == 0 {
                return Err(Error::shape(op, axis, 1, 0));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Shape4 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Row-major NCHW tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(shape: Shape4) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn filled(shape: Shape4, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape("Tensor4::from_vec", "data length", shape.len(), data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + y) * self.shape.w + x
    }

    /// The `h*w` plane for sample `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[f64] {
        let start = self.offset(n, c, 0, 0);
        &self.data[start..start + self.shape.plane()]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let start = self.offset(n, c, 0, 0);
        let len = self.shape.plane();
        &mut self.data[start..start + len]
    }

    /// Returns a tensor holding samples `range` of the batch.
    pub fn batch_slice(&self, range: std::ops::Range<usize>) -> Tensor4 {
        let per = self.shape.c * self.shape.plane();
        let shape = Shape4::new(range.len(), self.shape.c, self.shape.h, self.shape.w);
        Tensor4 {
            shape,
            data: self.data[range.start * per..range.end * per].to_vec(),
        }
    }

    /// Concatenates tensors with equal (c, h, w) along the batch axis.
    pub fn stack(parts: &[Tensor4]) -> Result<Tensor4> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("cannot stack zero tensors".into()))?
            .shape;
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            let s = p.shape;
            Shape4::new(s.n, first.c, first.h, first.w).expect_eq(&s, "Tensor4::stack")?;
            n += s.n;
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor4 {
            shape: Shape4::new(n, first.c, first.h, first.w),
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor4 {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor4 {
        self.map(|v| v * s)
    }

    /// `self += other`, shapes must match.
    pub fn add_assign(&mut self, other: &Tensor4) -> Result<()> {
        self.shape.expect_eq(&other.shape, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Tensor4) -> Result<Tensor4> {
        self.shape.expect_eq(&other.shape, "sub")?;
        Ok(Tensor4 {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor4) -> Result<f64> {
        self.shape.expect_eq(&other.shape, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;

    fn index(&self, (n, c, y, x): (usize, usize, usize, usize)) -> &f64 {
        &self.data[self.offset(n, c, y, x)]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (n, c, y, x): (usize, usize, usize, usize)) -> &mut f64 {
        let o = self.offset(n, c, y, x);
        &mut self.data[o]
    }
}

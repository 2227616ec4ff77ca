//! Dilated 2-D convolution (stride 1, zero padding) with exact gradients.
//!
//! The forward map is a cross-correlation:
//!
//! ```text
//! out[n, o, y, x] = b[o] + sum_{i, ky, kx} w[o, i, ky, kx] * in[n, i, y + d*ky - p, x + d*kx - p]
//! ```
//!
//! with out-of-range input taps reading zero. A learned kernel absorbs the
//! flip that separates this from textbook convolution, so the two
//! parameterizations are interchangeable for training.
//!
//! Both passes lower the input to a matrix of dilated taps (im2col) and
//! work on contiguous rows. Every routine is single-threaded and
//! accumulates in a fixed order, so results are bit-reproducible.

use super::gemm::{gemm_nn, transpose};
use crate::error::{Error, Result};
use crate::tensor::{Shape4, Tensor4};

/// Weights, bias and geometry of one dilated convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    /// Shape `(out_channels, in_channels, kernel, kernel)`.
    pub weights: Tensor4,
    pub bias: Vec<f64>,
    pub dilation: usize,
    pub pad: usize,
}

/// Gradients of a scalar loss with respect to a convolution's input and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub grad_input: Tensor4,
    pub grad_weights: Tensor4,
    pub grad_bias: Vec<f64>,
}

impl ConvLayerParams {
    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize, dilation: usize, pad: usize) -> Self {
        Self {
            weights: Tensor4::zeros(Shape4::new(out_channels, in_channels, kernel, kernel)),
            bias: vec![0.0; out_channels],
            dilation,
            pad,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    fn validate(&self) -> Result<()> {
        let s = self.weights.shape();
        if s.h != s.w {
            return Err(Error::shape("conv2d", "kernel width", s.h, s.w));
        }
        if s.h == 0 {
            return Err(Error::Argument("kernel size must be at least 1".into()));
        }
        if self.dilation == 0 {
            return Err(Error::Argument("dilation must be positive".into()));
        }
        if self.bias.len() != s.n {
            return Err(Error::shape("conv2d", "bias length", s.n, self.bias.len()));
        }
        Ok(())
    }

    /// Span of the dilated kernel minus one: `d * (S - 1)`.
    fn reach(&self) -> usize {
        self.dilation * (self.kernel() - 1)
    }

    /// Output spatial size for an input of size `dim`, or `None` if the
    /// padded input is smaller than the dilated kernel.
    pub fn output_dim(&self, dim: usize) -> Option<usize> {
        (dim + 2 * self.pad).checked_sub(self.reach())
    }

    /// Validates `x` against this layer and returns the output shape.
    pub fn output_shape(&self, x: Shape4) -> Result<Shape4> {
        self.validate()?;
        x.expect_nonempty("conv2d_dilated_forward")?;
        if x.c != self.in_channels() {
            return Err(Error::shape("conv2d_dilated_forward", "channels", self.in_channels(), x.c));
        }
        let h = self
            .output_dim(x.h)
            .filter(|&h| h > 0)
            .ok_or_else(|| Error::shape("conv2d_dilated_forward", "height", self.reach() + 1, x.h + 2 * self.pad))?;
        let w = self
            .output_dim(x.w)
            .filter(|&w| w > 0)
            .ok_or_else(|| Error::shape("conv2d_dilated_forward", "width", self.reach() + 1, x.w + 2 * self.pad))?;
        Ok(Shape4::new(x.n, self.out_channels(), h, w))
    }
}

/// Range of output coordinates whose tap `k` lands inside an input axis of
/// length `in_len`, together with the signed input offset for that tap.
#[inline]
fn tap_window(k: usize, dilation: usize, pad: usize, in_len: usize, out_len: usize) -> (usize, usize, isize) {
    let shift = (dilation * k) as isize - pad as isize;
    let lo = (-shift).max(0) as usize;
    let hi = ((in_len as isize - shift).max(0) as usize).min(out_len);
    (lo, hi.max(lo), shift)
}

/// Geometry shared by the lowering helpers.
struct Lowering {
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
    kernel: usize,
    dilation: usize,
    pad: usize,
}

impl Lowering {
    fn new(x: Shape4, out: Shape4, p: &ConvLayerParams) -> Self {
        Self {
            in_c: x.c,
            in_h: x.h,
            in_w: x.w,
            out_h: out.h,
            out_w: out.w,
            kernel: p.kernel(),
            dilation: p.dilation,
            pad: p.pad,
        }
    }

    fn rows(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Calls `f(row, y, out_x0, out_x1, in_offset)` for every in-bounds run
    /// of one lowered row; row index is `(i * S + ky) * S + kx`.
    #[inline]
    fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
        let k = self.kernel;
        for i in 0..self.in_c {
            for ky in 0..k {
                let (y0, y1, sy) = tap_window(ky, self.dilation, self.pad, self.in_h, self.out_h);
                for kx in 0..k {
                    let (x0, x1, sx) = tap_window(kx, self.dilation, self.pad, self.in_w, self.out_w);
                    let row = (i * k + ky) * k + kx;
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let iy = (y as isize + sy) as usize;
                        let src = i * self.in_h * self.in_w + iy * self.in_w + (x0 as isize + sx) as usize;
                        f(row, y, x0, x1, src);
                    }
                }
            }
        }
    }

    /// Gathers every dilated tap of one sample into a `rows x cols` matrix
    /// (out-of-range taps are zero).
    fn im2col(&self, sample: &[f64], col: &mut [f64]) {
        col.fill(0.0);
        let (cols, ow) = (self.cols(), self.out_w);
        self.for_each_run(|row, y, x0, x1, src| {
            let dst = row * cols + y * ow;
            col[dst + x0..dst + x1].copy_from_slice(&sample[src..src + (x1 - x0)]);
        });
    }

    /// Adjoint of [`Lowering::im2col`]: scatter-adds lowered gradients back
    /// onto the input sample.
    fn col2im_add(&self, col: &[f64], sample: &mut [f64]) {
        let (cols, ow) = (self.cols(), self.out_w);
        self.for_each_run(|row, y, x0, x1, src| {
            let from = row * cols + y * ow;
            for (s, c) in sample[src..src + (x1 - x0)].iter_mut().zip(&col[from + x0..from + x1]) {
                *s += c;
            }
        });
    }
}

/// Forward pass of the dilated convolution.
///
/// Each output element accumulates the bias and then the taps in
/// `(in_channel, ky, kx)` order.
pub fn conv2d_dilated_forward(x: &Tensor4, p: &ConvLayerParams) -> Result<Tensor4> {
    let xs = x.shape();
    let os = p.output_shape(xs)?;
    let low = Lowering::new(xs, os, p);
    let (rows, cols) = (low.rows(), low.cols());
    let mut col = vec![0.0; rows * cols];
    let mut out = Tensor4::zeros(os);
    let sample_len = xs.c * xs.plane();
    let out_len = os.c * os.plane();

    for n in 0..xs.n {
        low.im2col(&x.data()[n * sample_len..(n + 1) * sample_len], &mut col);
        let out_n = &mut out.data_mut()[n * out_len..(n + 1) * out_len];
        for (plane, &b) in out_n.chunks_exact_mut(cols).zip(&p.bias) {
            plane.fill(b);
        }
        gemm_nn(os.c, rows, cols, p.weights.data(), &col, out_n);
    }
    Ok(out)
}

/// Backward pass: gradients of `sum(grad_out * forward(x, p))` with respect
/// to the input, weights and bias.
pub fn conv2d_dilated_backward(grad_out: &Tensor4, x: &Tensor4, p: &ConvLayerParams) -> Result<GradBundle> {
    let xs = x.shape();
    let os = p.output_shape(xs)?;
    os.expect_eq(&grad_out.shape(), "conv2d_dilated_backward")?;
    let low = Lowering::new(xs, os, p);
    let (rows, cols) = (low.rows(), low.cols());
    let mut col = vec![0.0; rows * cols];
    let mut col_t = vec![0.0; rows * cols];
    let mut grad_col = vec![0.0; rows * cols];
    let mut weights_t = vec![0.0; rows * os.c];
    transpose(os.c, rows, p.weights.data(), &mut weights_t);
    let sample_len = xs.c * xs.plane();
    let out_len = os.c * os.plane();

    let mut grad_input = Tensor4::zeros(xs);
    let mut grad_weights = Tensor4::zeros(p.weights.shape());
    let mut grad_bias = vec![0.0; os.c];

    for n in 0..xs.n {
        let g = &grad_out.data()[n * out_len..(n + 1) * out_len];
        for (gb, plane) in grad_bias.iter_mut().zip(g.chunks_exact(cols)) {
            *gb += plane.iter().sum::<f64>();
        }
        low.im2col(&x.data()[n * sample_len..(n + 1) * sample_len], &mut col);
        transpose(rows, cols, &col, &mut col_t);
        // dW (out x rows) += G (out x cols) * col^T (cols x rows)
        gemm_nn(os.c, cols, rows, g, &col_t, grad_weights.data_mut());
        // dcol (rows x cols) = W^T (rows x out) * G (out x cols)
        grad_col.fill(0.0);
        gemm_nn(rows, os.c, cols, &weights_t, g, &mut grad_col);
        low.col2im_add(&grad_col, &mut grad_input.data_mut()[n * sample_len..(n + 1) * sample_len]);
    }

    Ok(GradBundle {
        grad_input,
        grad_weights,
        grad_bias,
    })
}

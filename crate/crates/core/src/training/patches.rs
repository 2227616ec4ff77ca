use crate::error::{Error, Result};
use crate::image::ImageF;

/// Number of sliding-window positions along one axis.
pub fn patches_along(dim: usize, patch_size: usize, stride: usize) -> usize {
    if patch_size > dim || stride == 0 {
        0
    } else {
        (dim - patch_size) / stride + 1
    }
}

/// Square patches at top-left offsets `0, stride, 2*stride, ...` along each
/// axis while the patch fits, in row-major order.
pub fn extract_patches(img: &ImageF, patch_size: usize, stride: usize) -> Result<Vec<ImageF>> {
    if patch_size == 0 || stride == 0 {
        return Err(Error::Argument("patch size and stride must be positive".into()));
    }
    if patch_size > img.height() || patch_size > img.width() {
        return Err(Error::Argument(format!(
            "patch size {patch_size} exceeds {}x{} image",
            img.height(),
            img.width()
        )));
    }
    let rows = patches_along(img.height(), patch_size, stride);
    let cols = patches_along(img.width(), patch_size, stride);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (y0, x0) = (r * stride, c * stride);
            out.push(ImageF::from_fn(patch_size, patch_size, |y, x| img.get(y0 + y, x0 + x)));
        }
    }
    Ok(out)
}

//! Image quality metrics: PSNR, SSIM and the EPD-ROA edge-preservation degree.

use crate::error::{Error, Result};
use crate::image::{ImageF, Region};
use crate::speckle::{enl, EnlDefinition};

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(x: &ImageF, reference: &ImageF, peak: f64) -> Result<f64> {
    x.same_dims(reference, "psnr")?;
    if !(peak > 0.0) {
        return Err(Error::Argument(format!("peak must be positive, got {peak}")));
    }
    let mse = x
        .pixels()
        .iter()
        .zip(reference.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// SSIM window and stabilizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let mut w = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dy, dx) = (y as f64 - c, x as f64 - c);
            w.push((-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mean SSIM with default parameters (11x11 Gaussian, sigma 1.5, peak 1).
pub fn ssim(x: &ImageF, reference: &ImageF) -> Result<f64> {
    ssim_with(x, reference, &SsimParams::default())
}

/// Mean of the local SSIM map over every window position fully inside the image.
pub fn ssim_with(x: &ImageF, reference: &ImageF, p: &SsimParams) -> Result<f64> {
    x.same_dims(reference, "ssim")?;
    if p.window == 0 || x.height() < p.window || x.width() < p.window {
        return Err(Error::Argument(format!(
            "image {}x{} is smaller than the {}x{} SSIM window",
            x.height(),
            x.width(),
            p.window,
            p.window
        )));
    }
    let c1 = (p.k1 * p.peak).powi(2);
    let c2 = (p.k2 * p.peak).powi(2);
    let win = gaussian_window(p.window, p.sigma);
    let k = p.window;
    let rows = x.height() - k + 1;
    let cols = x.width() - k + 1;
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let (mut mu_a, mut mu_b) = (0.0, 0.0);
            for wy in 0..k {
                for wx in 0..k {
                    let w = win[wy * k + wx];
                    mu_a += w * x.get(r + wy, c + wx);
                    mu_b += w * reference.get(r + wy, c + wx);
                }
            }
            let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
            for wy in 0..k {
                for wx in 0..k {
                    let w = win[wy * k + wx];
                    let da = x.get(r + wy, c + wx) - mu_a;
                    let db = reference.get(r + wy, c + wx) - mu_b;
                    var_a += w * da * da;
                    var_b += w * db * db;
                    cov += w * da * db;
                }
            }
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
        }
    }
    Ok(total / (rows * cols) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// Pixel magnitudes below this are raised to it before forming ratios.
pub const EPD_ROA_FLOOR: f64 = 1e-6;

fn ratio_sum(img: &ImageF, dir: Direction) -> f64 {
    let v = |y, x| img.get(y, x).abs().max(EPD_ROA_FLOOR);
    let mut sum = 0.0;
    match dir {
        Direction::Horizontal => {
            for y in 0..img.height() {
                for x in 0..img.width() - 1 {
                    sum += v(y, x) / v(y, x + 1);
                }
            }
        }
        Direction::Vertical => {
            for y in 0..img.height() - 1 {
                for x in 0..img.width() {
                    sum += v(y, x) / v(y + 1, x);
                }
            }
        }
    }
    sum
}

/// Edge-preservation degree based on the ratio of average:
/// `sum |f(i) / f(adj i)| / sum |o(i) / o(adj i)|` over adjacent pairs along
/// `direction`. Values near 1 mean edges survived filtering.
pub fn epd_roa(filtered: &ImageF, original: &ImageF, direction: Direction) -> Result<f64> {
    filtered.same_dims(original, "epd_roa")?;
    let (h, w) = (original.height(), original.width());
    match direction {
        Direction::Horizontal => {
            if w < 2 {
                return Err(Error::DegenerateInput("horizontal EPD-ROA needs width >= 2".into()));
            }
            if let Some(y) = (0..h).find(|&y| (0..w).all(|x| original.get(y, x) == 0.0)) {
                return Err(Error::DegenerateInput(format!("original row {y} is all zero")));
            }
        }
        Direction::Vertical => {
            if h < 2 {
                return Err(Error::DegenerateInput("vertical EPD-ROA needs height >= 2".into()));
            }
            if let Some(x) = (0..w).find(|&x| (0..h).all(|y| original.get(y, x) == 0.0)) {
                return Err(Error::DegenerateInput(format!("original column {x} is all zero")));
            }
        }
    }
    Ok(ratio_sum(filtered, direction) / ratio_sum(original, direction))
}

/// All metrics of one test image against its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub epd_roa_h: f64,
    pub epd_roa_v: f64,
    /// ENL of each requested region of the test image.
    pub enl: Vec<(String, f64)>,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "reference,test,psnr_db,ssim,epd_roa_h,epd_roa_v,epd_roa,enl";

    /// Evaluates `test` against `reference` at `peak`, with ENL over `regions` of `test`.
    pub fn compute(
        test: &ImageF,
        reference: &ImageF,
        peak: f64,
        regions: &[Region],
        enl_definition: EnlDefinition,
    ) -> Result<Self> {
        let params = SsimParams {
            peak,
            ..SsimParams::default()
        };
        let enl = regions
            .iter()
            .map(|r| Ok((r.to_string(), enl(&test.crop(*r)?, enl_definition)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            psnr_db: psnr(test, reference, peak)?,
            ssim: ssim_with(test, reference, &params)?,
            epd_roa_h: epd_roa(test, reference, Direction::Horizontal)?,
            epd_roa_v: epd_roa(test, reference, Direction::Vertical)?,
            enl,
        })
    }

    /// Mean of the two directional EPD-ROA values.
    pub fn epd_roa(&self) -> f64 {
        0.5 * (self.epd_roa_h + self.epd_roa_v)
    }

    /// One CSV row matching [`MetricReport::CSV_HEADER`]. ENL entries are
    /// `label=value` pairs joined by `;` inside a quoted field.
    pub fn csv_row(&self, reference: &str, test: &str) -> String {
        let enl = self
            .enl
            .iter()
            .map(|(l, v)| format!("{l}={}", fmt_num(*v)))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{},{},{},{},{},{},\"{}\"",
            csv_field(reference),
            csv_field(test),
            fmt_num(self.psnr_db),
            fmt_num(self.ssim),
            fmt_num(self.epd_roa_h),
            fmt_num(self.epd_roa_v),
            fmt_num(self.epd_roa()),
            enl
        )
    }

    /// Aligned two-column table for humans.
    pub fn table(&self) -> String {
        let mut rows = vec![
            ("PSNR (dB)".to_string(), fmt_num(self.psnr_db)),
            ("SSIM".to_string(), fmt_num(self.ssim)),
            ("EPD-ROA (H)".to_string(), fmt_num(self.epd_roa_h)),
            ("EPD-ROA (V)".to_string(), fmt_num(self.epd_roa_v)),
            ("EPD-ROA".to_string(), fmt_num(self.epd_roa())),
        ];
        rows.extend(self.enl.iter().map(|(l, v)| (format!("ENL [{l}]"), fmt_num(*v))));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

/// Fixed-precision number, with `inf` for the identical-image PSNR sentinel.
pub fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:.6}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

//! Binary PGM (P5) reading and writing, 8- and 16-bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageF;

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| parse_err(start, format!("{what} is out of range")))
    }
}

/// Decodes a P5 image, mapping samples to `[0, 1]` by dividing by maxval.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageF> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some(m) => {
            return Err(parse_err(
                0,
                format!("unsupported magic {:?}, expected binary PGM \"P5\"", String::from_utf8_lossy(m)),
            ))
        }
        None => return Err(parse_err(0, "file too short for a PGM magic")),
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    if !r.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(parse_err(2, "expected whitespace after magic"));
    }
    let width = r.number("width")?;
    let height = r.number("height")?;
    r.skip_space_and_comments();
    let maxval_at = r.pos;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(maxval_at, format!("zero image dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(maxval_at, format!("unsupported maxval {maxval}")));
    }
    if !r.bytes.get(r.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(parse_err(r.pos, "expected a single whitespace before the raster"));
    }
    let data_start = r.pos + 1;
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bytes_per))
        .ok_or_else(|| parse_err(maxval_at, "image dimensions overflow"))?;
    let raster = &bytes[data_start..];
    if raster.len() < needed {
        return Err(parse_err(
            bytes.len(),
            format!("truncated raster: need {needed} bytes, found {}", raster.len()),
        ));
    }
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let v = if bytes_per == 1 {
            raster[i] as usize
        } else {
            u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as usize
        };
        if v > maxval {
            return Err(parse_err(data_start + i * bytes_per, format!("sample {v} exceeds maxval {maxval}")));
        }
        pixels.push(v as f64 / scale);
    }
    ImageF::new(height, width, pixels)
}

/// Encodes `img` as P5 with the given maxval. Values are clamped to
/// `[0, 1]`, scaled to maxval and rounded half away from zero.
pub fn encode_pgm(img: &ImageF, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::Argument("maxval must be positive".into()));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let scale = maxval as f64;
    for &v in img.pixels() {
        let q = (v.clamp(0.0, 1.0) * scale).round() as u16;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageF> {
    decode_pgm(&fs::read(path)?)
}

/// Writes an 8-bit PGM.
pub fn save_image(img: &ImageF, path: impl AsRef<Path>) -> Result<()> {
    save_image_with_maxval(img, path, 255)
}

pub fn save_image_with_maxval(img: &ImageF, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    fs::write(path, encode_pgm(img, maxval)?)?;
    Ok(())
}

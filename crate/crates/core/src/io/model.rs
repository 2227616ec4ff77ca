//! Binary model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "SDRN"                      magic, 4 bytes
//! version                     u16 (currently 1)
//! layer count                 u16
//! per layer:                  out_ch u32, in_ch u32, kernel u16,
//!                             dilation u16, pad u16, activation u8 (0 none, 1 ReLU)
//! skip count                  u16
//! per skip:                   source u16, dest u16 (1-based layer numbers)
//! per layer:                  weights (out, in, k, k) then bias, as f32
//! CRC-32 (IEEE)               u32 over every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::error::{ModelError, Result};
use crate::network::{Activation, LayerSpec, Network, NetworkSpec, Skip};
use crate::nn::ConvLayerParams;
use crate::tensor::{Shape4, Tensor4};

pub const MAGIC: [u8; 4] = *b"SDRN";
pub const FORMAT_VERSION: u16 = 1;
const LAYER_HEADER_BYTES: usize = 15;

pub fn encode_model(net: &Network) -> Vec<u8> {
    let spec = net.spec();
    let mut out = Vec::with_capacity(14 + LAYER_HEADER_BYTES * spec.layers.len() + 4 * spec.skips.len() + 4 * net.param_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.layers.len() as u16).to_le_bytes());
    for (i, l) in spec.layers.iter().enumerate() {
        out.extend_from_slice(&(l.out_channels as u32).to_le_bytes());
        out.extend_from_slice(&(spec.in_channels(i) as u32).to_le_bytes());
        out.extend_from_slice(&(l.kernel as u16).to_le_bytes());
        out.extend_from_slice(&(l.dilation as u16).to_le_bytes());
        out.extend_from_slice(&(l.pad as u16).to_le_bytes());
        out.push(match l.activation {
            Activation::Identity => 0,
            Activation::Relu => 1,
        });
    }
    out.extend_from_slice(&(spec.skips.len() as u16).to_le_bytes());
    for s in &spec.skips {
        out.extend_from_slice(&(s.source as u16).to_le_bytes());
        out.extend_from_slice(&(s.dest as u16).to_le_bytes());
    }
    for p in net.params() {
        for &v in p.weights.data().iter().chain(&p.bias) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(ModelError::Truncated {
                needed: end,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, ModelError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses and validates a model file. Never returns a partially read network.
pub fn decode_model(bytes: &[u8]) -> Result<Network, ModelError> {
    if bytes.len() < 4 {
        return Err(ModelError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    let min_len = 4 + 2 + 2 + 2 + 4;
    if bytes.len() < min_len {
        return Err(ModelError::Truncated {
            needed: min_len,
            available: bytes.len(),
        });
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelError::CrcMismatch { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let n_layers = r.u16()? as usize;
    if n_layers == 0 {
        return Err(ModelError::ShapeMismatch("model has no layers".into()));
    }
    let mut layers = Vec::with_capacity(n_layers);
    let mut in_channels = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let out_channels = r.u32()? as usize;
        let in_ch = r.u32()? as usize;
        let kernel = r.u16()? as usize;
        let dilation = r.u16()? as usize;
        let pad = r.u16()? as usize;
        let activation = match r.u8()? {
            0 => Activation::Identity,
            1 => Activation::Relu,
            a => return Err(ModelError::ShapeMismatch(format!("layer {} has unknown activation code {a}", i + 1))),
        };
        layers.push(LayerSpec {
            out_channels,
            kernel,
            dilation,
            pad,
            activation,
        });
        in_channels.push(in_ch);
    }
    let n_skips = r.u16()? as usize;
    let mut skips = Vec::with_capacity(n_skips);
    for _ in 0..n_skips {
        let source = r.u16()? as usize;
        let dest = r.u16()? as usize;
        skips.push(Skip { source, dest });
    }
    let spec = NetworkSpec {
        layers,
        skips,
        residual_output: true,
    };
    spec.validate().map_err(|e| ModelError::ShapeMismatch(e.to_string()))?;
    for (i, &stored_in) in in_channels.iter().enumerate() {
        if stored_in != spec.in_channels(i) {
            return Err(ModelError::ShapeMismatch(format!(
                "layer {} declares {stored_in} input channels, topology implies {}",
                i + 1,
                spec.in_channels(i)
            )));
        }
    }

    let floats = spec.param_count();
    let remaining = body.len() - r.pos;
    if remaining != 4 * floats {
        return Err(ModelError::ShapeMismatch(format!(
            "header describes {floats} parameters but payload holds {remaining} bytes"
        )));
    }
    let mut params = Vec::with_capacity(n_layers);
    for (i, l) in spec.layers.iter().enumerate() {
        let shape = Shape4::new(l.out_channels, spec.in_channels(i), l.kernel, l.kernel);
        let weights = (0..shape.len()).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>, _>>()?;
        let bias = (0..l.out_channels).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>, _>>()?;
        params.push(ConvLayerParams {
            weights: Tensor4::from_vec(shape, weights).expect("length computed from shape"),
            bias,
            dilation: l.dilation,
            pad: l.pad,
        });
    }
    Network::from_parts(spec, params).map_err(|e| ModelError::ShapeMismatch(e.to_string()))
}

pub fn save_model(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(net))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Network> {
    Ok(decode_model(&fs::read(path)?)?)
}

/// Number of `f32` parameters stored in an encoded model.
pub fn payload_floats(bytes: &[u8]) -> Result<usize, ModelError> {
    decode_model(bytes).map(|n| n.param_count())
}

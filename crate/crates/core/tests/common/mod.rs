//! Helpers shared by several test targets.

use sardrn::network::{Activation, LayerSpec};
use sardrn::nn::ConvLayerParams;
use sardrn::{Network, NetworkSpec, Shape4, Tensor4};

/// Single-channel chain with all-ones kernels and no skips.
pub fn ones_chain(dilations: &[usize]) -> Network {
    let layers: Vec<LayerSpec> = dilations
        .iter()
        .enumerate()
        .map(|(i, &d)| LayerSpec {
            out_channels: 1,
            kernel: 3,
            dilation: d,
            pad: d,
            activation: if i + 1 == dilations.len() { Activation::Identity } else { Activation::Relu },
        })
        .collect();
    let spec = NetworkSpec {
        layers,
        skips: Vec::new(),
        residual_output: true,
    };
    let params = dilations
        .iter()
        .map(|&d| {
            let mut p = ConvLayerParams::zeros(1, 1, 3, d, d);
            p.weights.data_mut().iter_mut().for_each(|w| *w = 1.0);
            p
        })
        .collect();
    Network::from_parts(spec, params).unwrap()
}

/// Width of the nonzero footprint of the response to a centred impulse.
pub fn impulse_footprint(dilations: &[usize]) -> u64 {
    let reach: usize = dilations.iter().sum();
    let size = 4 * reach + 3;
    let mid = size / 2;
    let mut x = Tensor4::zeros(Shape4::new(1, 1, size, size));
    x[(0, 0, mid, mid)] = 1.0;
    let y = ones_chain(dilations).forward(&x).unwrap();
    let cols: Vec<usize> = (0..size).filter(|&c| y[(0, 0, mid, c)] != 0.0).collect();
    let rows: Vec<usize> = (0..size).filter(|&r| y[(0, 0, r, mid)] != 0.0).collect();
    let w = cols.last().unwrap() - cols.first().unwrap() + 1;
    let h = rows.last().unwrap() - rows.first().unwrap() + 1;
    assert_eq!(w, h);
    w as u64
}

//! The seven-layer dilated residual despeckling network.
//!
//! Data flow for layer `l` (1-based), with `a_0` the speckled input:
//!
//! ```text
//! in_l = a_{l-1} + sum over skips (s, l) of a_s
//! a_l  = act_l(conv_l(in_l))
//! ```
//!
//! A skip `(s, t)` therefore adds the post-activation output of layer `s`
//! to the output of layer `t - 1`, and the sum feeds layer `t`. With the
//! default skips `(1, 3)` and `(4, 7)` both attach points carry the hidden
//! width. The final layer predicts the speckle residual `y - x`; the clean
//! estimate is `y` minus that prediction.

mod receptive_field;

pub use receptive_field::{receptive_field, receptive_field_of_dilations, ReceptiveFieldMode, ReceptiveFieldReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::nn::{conv2d_dilated_backward, conv2d_dilated_forward, relu_backward, relu_forward, ConvLayerParams};
use crate::rng::standard_normal;
use crate::tensor::{Shape4, Tensor4};

/// Dilations of the default network, layer 1 to 7.
pub const SARDRN_DILATIONS: [usize; 7] = [1, 2, 3, 4, 3, 2, 1];
/// Hidden width of the default network.
pub const SARDRN_WIDTH: usize = 64;
/// Default skip connections as `(source, destination)` layer numbers.
pub const SARDRN_SKIPS: [(usize, usize); 2] = [(1, 3), (4, 7)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// No nonlinearity: the output layer, or a linearized network in tests.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub pad: usize,
    pub activation: Activation,
}

/// Additive shortcut between layer outputs, 1-based layer numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Skip {
    pub source: usize,
    pub dest: usize,
}

/// Declarative topology of a despeckling network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub skips: Vec<Skip>,
    /// The network predicts the residual `y - x` rather than `x`.
    pub residual_output: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self::sardrn()
    }
}

impl NetworkSpec {
    /// The reference configuration: six 64-channel ReLU layers with
    /// dilations 1, 2, 3, 4, 3, 2 and a linear 1-channel output layer.
    pub fn sardrn() -> Self {
        Self::sardrn_with_width(SARDRN_WIDTH)
    }

    /// Same topology with a different hidden width.
    pub fn sardrn_with_width(width: usize) -> Self {
        let layers = SARDRN_DILATIONS
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let last = i + 1 == SARDRN_DILATIONS.len();
                LayerSpec {
                    out_channels: if last { 1 } else { width },
                    kernel: 3,
                    dilation: d,
                    pad: d,
                    activation: if last { Activation::Identity } else { Activation::Relu },
                }
            })
            .collect();
        Self {
            layers,
            skips: SARDRN_SKIPS.iter().map(|&(source, dest)| Skip { source, dest }).collect(),
            residual_output: true,
        }
    }

    /// Replaces every layer's dilation (and its size-preserving pad).
    pub fn with_dilations(mut self, dilations: &[usize]) -> Result<Self> {
        if dilations.len() != self.layers.len() {
            return Err(Error::Spec(format!(
                "{} dilations given for {} layers",
                dilations.len(),
                self.layers.len()
            )));
        }
        for (layer, &d) in self.layers.iter_mut().zip(dilations) {
            layer.dilation = d;
            layer.pad = d * (layer.kernel - 1) / 2;
        }
        Ok(self)
    }

    /// Ablation: every layer becomes a plain 3x3 convolution.
    pub fn without_dilation(self) -> Self {
        let ones = vec![1; self.layers.len()];
        self.with_dilations(&ones).expect("length matches")
    }

    /// Ablation: drop all skip connections.
    pub fn without_skips(mut self) -> Self {
        self.skips.clear();
        self
    }

    pub fn with_skips(mut self, skips: &[(usize, usize)]) -> Self {
        self.skips = skips.iter().map(|&(source, dest)| Skip { source, dest }).collect();
        self
    }

    /// Replaces every activation with the identity, making the network
    /// linear in its input when biases vanish. Test-only switch.
    #[doc(hidden)]
    pub fn linearized(mut self) -> Self {
        for l in &mut self.layers {
            l.activation = Activation::Identity;
        }
        self
    }

    pub fn dilations(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.dilation).collect()
    }

    /// Input channel count of layer `index` (0-based).
    pub fn in_channels(&self, index: usize) -> usize {
        if index == 0 {
            1
        } else {
            self.layers[index - 1].out_channels
        }
    }

    /// Smallest spatial size every layer can process.
    pub fn min_spatial(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.dilation * (l.kernel - 1) + 1)
            .max()
            .unwrap_or(1)
    }

    pub fn param_count(&self) -> usize {
        (0..self.layers.len())
            .map(|i| {
                let l = &self.layers[i];
                l.out_channels * self.in_channels(i) * l.kernel * l.kernel + l.out_channels
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Spec("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let n = i + 1;
            if l.out_channels == 0 {
                return Err(Error::Spec(format!("layer {n} has zero output channels")));
            }
            if l.kernel == 0 || l.kernel % 2 == 0 {
                return Err(Error::Spec(format!("layer {n} kernel {} must be odd", l.kernel)));
            }
            if l.dilation == 0 {
                return Err(Error::Spec(format!("layer {n} dilation must be positive")));
            }
            if 2 * l.pad != l.dilation * (l.kernel - 1) {
                return Err(Error::Spec(format!(
                    "layer {n} pad {} does not preserve size for dilation {} and kernel {}",
                    l.pad, l.dilation, l.kernel
                )));
            }
        }
        if self.residual_output && self.layers.last().map(|l| l.out_channels) != Some(1) {
            return Err(Error::Spec("residual output layer must have exactly one channel".into()));
        }
        for s in &self.skips {
            if s.source == 0 || s.source >= s.dest || s.dest > self.layers.len() {
                return Err(Error::Spec(format!(
                    "skip ({}, {}) must satisfy 1 <= source < dest <= {}",
                    s.source,
                    s.dest,
                    self.layers.len()
                )));
            }
            let src = self.layers[s.source - 1].out_channels;
            let attach = self.in_channels(s.dest - 1);
            if src != attach {
                return Err(Error::Spec(format!(
                    "skip ({}, {}) adds {src} channels to a {attach}-channel input of layer {}",
                    s.source, s.dest, s.dest
                )));
            }
        }
        Ok(())
    }
}

/// Instantiated network: a spec plus one parameter set per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: Vec<ConvLayerParams>,
}

/// Per-layer values retained by a recording forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Input of each convolution (after skip sums).
    pub inputs: Vec<Tensor4>,
    /// Convolution outputs before activation.
    pub pre_activations: Vec<Tensor4>,
    /// Post-activation output of every layer; the last is the prediction.
    pub outputs: Vec<Tensor4>,
}

impl ForwardTrace {
    pub fn prediction(&self) -> &Tensor4 {
        self.outputs.last().expect("network has layers")
    }
}

/// Gradients with respect to every layer's parameters and to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub weights: Vec<Tensor4>,
    pub biases: Vec<Vec<f64>>,
    pub input: Tensor4,
}

impl NetworkGrads {
    /// Gradient slices in the order of [`Network::param_groups_mut`].
    pub fn groups(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.data(), b.as_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.groups().concat()
    }
}

/// Builds a network for `spec`, drawing He-normal weights
/// (`std = sqrt(2 / fan_in)`) from `seed`; biases start at zero.
pub fn build_sardrn(spec: NetworkSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = (0..spec.layers.len())
        .map(|i| {
            let l = spec.layers[i];
            let in_ch = spec.in_channels(i);
            let mut p = ConvLayerParams::zeros(l.out_channels, in_ch, l.kernel, l.dilation, l.pad);
            let std = (2.0 / (in_ch * l.kernel * l.kernel) as f64).sqrt();
            for w in p.weights.data_mut() {
                *w = std * standard_normal(&mut rng);
            }
            p
        })
        .collect();
    Ok(Network { spec, params })
}

impl Network {
    /// Assembles a network from explicit parameters, checking them against the spec.
    pub fn from_parts(spec: NetworkSpec, params: Vec<ConvLayerParams>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.layers.len() {
            return Err(Error::Spec(format!(
                "{} parameter sets for {} layers",
                params.len(),
                spec.layers.len()
            )));
        }
        for (i, (l, p)) in spec.layers.iter().zip(&params).enumerate() {
            let expected = Shape4::new(l.out_channels, spec.in_channels(i), l.kernel, l.kernel);
            if p.weights.shape() != expected || p.bias.len() != l.out_channels {
                return Err(Error::Spec(format!(
                    "layer {} weights {} do not match spec {expected}",
                    i + 1,
                    p.weights.shape()
                )));
            }
            if p.dilation != l.dilation || p.pad != l.pad {
                return Err(Error::Spec(format!("layer {} geometry differs from spec", i + 1)));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[ConvLayerParams] {
        &self.params
    }

    pub fn layer_mut(&mut self, index: usize) -> &mut ConvLayerParams {
        &mut self.params[index]
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(ConvLayerParams::param_count).sum()
    }

    /// Mutable parameter slices: weights then bias for each layer in order.
    pub fn param_groups_mut(&mut self) -> Vec<&mut [f64]> {
        self.params
            .iter_mut()
            .flat_map(|p| [p.weights.data_mut(), p.bias.as_mut_slice()])
            .collect()
    }

    /// Human-readable name of parameter group `g` as used by `param_groups_mut`.
    pub fn group_name(g: usize) -> String {
        let kind = if g.is_multiple_of(2) { "weights" } else { "bias" };
        format!("layer {} {kind}", g / 2 + 1)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for p in &self.params {
            v.extend_from_slice(p.weights.data());
            v.extend_from_slice(&p.bias);
        }
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("Network::set_params_flat", "parameter count", self.param_count(), flat.len()));
        }
        let mut rest = flat;
        for g in self.param_groups_mut() {
            let (head, tail) = rest.split_at(g.len());
            g.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn check_input(&self, y: &Tensor4) -> Result<()> {
        let s = y.shape();
        s.expect_nonempty("forward")?;
        if s.c != 1 {
            return Err(Error::shape("forward", "channels", 1, s.c));
        }
        let min = self.spec.min_spatial();
        if s.h < min {
            return Err(Error::shape("forward", "height", min, s.h));
        }
        if s.w < min {
            return Err(Error::shape("forward", "width", min, s.w));
        }
        Ok(())
    }

    fn run(&self, y: &Tensor4, record: bool) -> Result<(Tensor4, Option<ForwardTrace>)> {
        self.check_input(y)?;
        let n_layers = self.params.len();
        let mut outputs: Vec<Tensor4> = Vec::with_capacity(n_layers);
        let mut trace = record.then(|| ForwardTrace {
            inputs: Vec::with_capacity(n_layers),
            pre_activations: Vec::with_capacity(n_layers),
            outputs: Vec::new(),
        });
        for (i, p) in self.params.iter().enumerate() {
            let mut input = if i == 0 { y.clone() } else { outputs[i - 1].clone() };
            for s in self.spec.skips.iter().filter(|s| s.dest == i + 1) {
                input.add_assign(&outputs[s.source - 1])?;
            }
            let z = conv2d_dilated_forward(&input, p)?;
            let a = match self.spec.layers[i].activation {
                Activation::Relu => relu_forward(&z),
                Activation::Identity => z.clone(),
            };
            if let Some(t) = trace.as_mut() {
                t.inputs.push(input);
                t.pre_activations.push(z);
            }
            outputs.push(a);
        }
        let prediction = outputs.last().expect("validated non-empty").clone();
        if let Some(t) = trace.as_mut() {
            t.outputs = outputs;
        }
        Ok((prediction, trace))
    }

    /// Predicted residual for a batch of single-channel images.
    pub fn forward(&self, y: &Tensor4) -> Result<Tensor4> {
        Ok(self.run(y, false)?.0)
    }

    /// Forward pass that keeps every intermediate needed by [`Network::backward`].
    pub fn forward_trace(&self, y: &Tensor4) -> Result<ForwardTrace> {
        Ok(self.run(y, true)?.1.expect("recording requested"))
    }

    /// Backpropagates `grad_output` (gradient of the loss with respect to
    /// the prediction) through the recorded pass.
    pub fn backward(&self, trace: &ForwardTrace, grad_output: &Tensor4) -> Result<NetworkGrads> {
        let n_layers = self.params.len();
        trace.prediction().shape().expect_eq(&grad_output.shape(), "Network::backward")?;
        // grad_outputs[l] accumulates dLoss/d a_l; index 0 is the network input
        let mut grad_outputs: Vec<Option<Tensor4>> = vec![None; n_layers + 1];
        grad_outputs[n_layers] = Some(grad_output.clone());
        let mut weights = vec![Tensor4::zeros(Shape4::new(0, 0, 0, 0)); n_layers];
        let mut biases = vec![Vec::new(); n_layers];

        for i in (0..n_layers).rev() {
            let g_a = grad_outputs[i + 1]
                .take()
                .unwrap_or_else(|| Tensor4::zeros(trace.outputs[i].shape()));
            let g_z = match self.spec.layers[i].activation {
                Activation::Relu => relu_backward(&g_a, &trace.pre_activations[i])?,
                Activation::Identity => g_a,
            };
            let gb = conv2d_dilated_backward(&g_z, &trace.inputs[i], &self.params[i])?;
            weights[i] = gb.grad_weights;
            biases[i] = gb.grad_bias;
            for s in self.spec.skips.iter().filter(|s| s.dest == i + 1) {
                accumulate(&mut grad_outputs[s.source], &gb.grad_input)?;
            }
            accumulate(&mut grad_outputs[i], &gb.grad_input)?;
        }
        let input = grad_outputs[0].take().expect("layer 1 always feeds back");
        Ok(NetworkGrads { weights, biases, input })
    }

    /// Clean estimate `y - forward(y)`; values are left unclamped.
    pub fn despeckle(&self, y: &ImageF) -> Result<ImageF> {
        let residual = self.forward(&y.to_tensor())?;
        let estimate: Vec<f64> = y.pixels().iter().zip(residual.data()).map(|(a, b)| a - b).collect();
        ImageF::new(y.height(), y.width(), estimate)
    }
}

/// Free-function form of [`Network::despeckle`].
pub fn despeckle(net: &Network, y: &ImageF) -> Result<ImageF> {
    net.despeckle(y)
}

fn accumulate(slot: &mut Option<Tensor4>, g: &Tensor4) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(g),
        None => {
            *slot = Some(g.clone());
            Ok(())
        }
    }
}

//! Randomized comparison of analytic gradients against central finite
//! differences, for single convolutions and for a whole (narrow) network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::network::{build_sardrn, NetworkSpec};
use crate::nn::gradcheck::{finite_difference_gradient, max_relative_error};
use crate::nn::{conv2d_dilated_backward, conv2d_dilated_forward, ConvLayerParams};
use crate::tensor::{Shape4, Tensor4};
use crate::training::mse_residual_loss;

/// Step used by every check in the suite.
pub const FD_STEP: f64 = 1e-5;
/// Pass threshold for single convolution layers.
pub const CONV_TOLERANCE: f64 = 1e-5;
/// Pass threshold for the end-to-end network check.
pub const NETWORK_TOLERANCE: f64 = 1e-4;

/// Worst disagreement found for one gradient tensor of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub label: String,
    pub components: usize,
    pub worst_relative_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst_relative_error < self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradcheckReport {
    pub checks: Vec<CheckOutcome>,
}

impl GradcheckReport {
    pub fn worst(&self) -> Option<&CheckOutcome> {
        self.checks
            .iter()
            .max_by(|a, b| a.worst_relative_error.total_cmp(&b.worst_relative_error))
    }

    /// Every check below its own tolerance.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    /// The check furthest above (or closest to) its tolerance.
    pub fn worst_by_margin(&self) -> Option<&CheckOutcome> {
        self.checks.iter().max_by(|a, b| {
            (a.worst_relative_error / a.tolerance).total_cmp(&(b.worst_relative_error / b.tolerance))
        })
    }

    fn push(&mut self, label: String, analytic: &[f64], numeric: &[f64], tolerance: f64) {
        let (e, i) = max_relative_error(analytic, numeric);
        self.checks.push(CheckOutcome {
            label,
            components: analytic.len(),
            worst_relative_error: e,
            worst_index: i,
            tolerance,
        });
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape4) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

/// A random convolution problem: input, layer and upstream gradient.
#[derive(Debug, Clone)]
pub struct ConvInstance {
    pub x: Tensor4,
    pub params: ConvLayerParams,
    pub grad_out: Tensor4,
}

impl ConvInstance {
    /// Shapes up to `2 x 3 x 8 x 8`, dilation 1 to 4, pad up to `d`.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let dilation = rng.gen_range(1..=4);
        Self::random_with_dilation(rng, dilation)
    }

    /// Like [`ConvInstance::random`] with a fixed dilation.
    pub fn random_with_dilation(rng: &mut ChaCha8Rng, dilation: usize) -> Self {
        let reach = 2 * dilation;
        // smallest pad for which an 8x8 input still yields an output
        let min_pad = (reach + 1).saturating_sub(8).div_ceil(2);
        let pad = rng.gen_range(min_pad..=dilation);
        let min_dim = (reach + 1).saturating_sub(2 * pad).max(1);
        let shape = Shape4::new(
            rng.gen_range(1..=2),
            rng.gen_range(1..=3),
            rng.gen_range(min_dim..=8),
            rng.gen_range(min_dim..=8),
        );
        let out_channels = rng.gen_range(1..=3);
        let mut params = ConvLayerParams::zeros(out_channels, shape.c, 3, dilation, pad);
        params.weights = random_tensor(rng, params.weights.shape());
        params.bias = (0..out_channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = random_tensor(rng, shape);
        let out_shape = params.output_shape(shape).expect("instance sized to fit");
        let grad_out = random_tensor(rng, out_shape);
        Self { x, params, grad_out }
    }

    /// The scalar whose gradient the backward pass computes: `sum(G * conv(x))`.
    pub fn objective(&self, x: &Tensor4, p: &ConvLayerParams) -> f64 {
        conv2d_dilated_forward(x, p)
            .and_then(|y| y.dot(&self.grad_out))
            .unwrap_or(f64::NAN)
    }

    pub fn describe(&self) -> String {
        format!(
            "x {} d={} pad={} out_ch={}",
            self.x.shape(),
            self.params.dilation,
            self.params.pad,
            self.params.out_channels()
        )
    }
}

/// Checks one convolution instance, appending three outcomes to `report`.
pub fn check_conv_instance(inst: &ConvInstance, report: &mut GradcheckReport, tag: &str) -> Result<()> {
    let g = conv2d_dilated_backward(&inst.grad_out, &inst.x, &inst.params)?;
    let xs = inst.x.shape();
    let fd_x = finite_difference_gradient(
        |v| inst.objective(&Tensor4::from_vec(xs, v.to_vec()).unwrap(), &inst.params),
        inst.x.data(),
        FD_STEP,
    )?;
    let ws = inst.params.weights.shape();
    let fd_w = finite_difference_gradient(
        |v| {
            let mut p = inst.params.clone();
            p.weights = Tensor4::from_vec(ws, v.to_vec()).unwrap();
            inst.objective(&inst.x, &p)
        },
        inst.params.weights.data(),
        FD_STEP,
    )?;
    let fd_b = finite_difference_gradient(
        |v| {
            let mut p = inst.params.clone();
            p.bias = v.to_vec();
            inst.objective(&inst.x, &p)
        },
        &inst.params.bias,
        FD_STEP,
    )?;
    let d = inst.describe();
    report.push(format!("{tag} grad_input [{d}]"), g.grad_input.data(), &fd_x, CONV_TOLERANCE);
    report.push(format!("{tag} grad_weights [{d}]"), g.grad_weights.data(), &fd_w, CONV_TOLERANCE);
    report.push(format!("{tag} grad_bias [{d}]"), &g.grad_bias, &fd_b, CONV_TOLERANCE);
    Ok(())
}

/// Parameter gradients of a `width`-channel network on a random
/// `1 x 1 x size x size` batch under the residual MSE loss.
pub fn check_network(seed: u64, width: usize, size: usize, report: &mut GradcheckReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6E65_7477);
    let mut net = build_sardrn(NetworkSpec::sardrn_with_width(width), seed)?;
    // nonzero biases so every code path carries signal
    let mut flat = net.params_flat();
    let mut offset = 0;
    for p in net.params() {
        offset += p.weights.data().len();
        for b in &mut flat[offset..offset + p.bias.len()] {
            *b = rng.gen_range(-0.1..0.1);
        }
        offset += p.bias.len();
    }
    net.set_params_flat(&flat)?;

    let shape = Shape4::new(1, 1, size, size);
    let y = Tensor4::from_fn(shape, |_, _, _, _| rng.gen_range(0.0..1.5));
    let target = Tensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-0.5..0.5));

    let trace = net.forward_trace(&y)?;
    let (_, grad_pred) = mse_residual_loss(trace.prediction(), &target)?;
    let analytic = net.backward(&trace, &grad_pred)?.flatten();

    let mut probe = net.clone();
    let numeric = finite_difference_gradient(
        |theta| {
            probe.set_params_flat(theta).expect("same length");
            probe
                .forward(&y)
                .and_then(|p| mse_residual_loss(&p, &target))
                .map(|(l, _)| l)
                .unwrap_or(f64::NAN)
        },
        &flat,
        FD_STEP,
    )?;
    report.push(format!("network width {width} on {shape}"), &analytic, &numeric, NETWORK_TOLERANCE);
    Ok(())
}

/// The full suite: `conv_instances` random convolutions (dilations cycling
/// through 1 to 4) plus one
/// 8-channel network on a 12x12 input.
pub fn run_suite(seed: u64, conv_instances: usize) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradcheckReport::default();
    for i in 0..conv_instances {
        let inst = ConvInstance::random_with_dilation(&mut rng, i % 4 + 1);
        check_conv_instance(&inst, &mut report, &format!("conv #{i}"))?;
    }
    check_network(seed, 8, 12, &mut report)?;
    Ok(report)
}

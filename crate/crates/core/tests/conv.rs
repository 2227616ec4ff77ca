use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardrn::gradcheck_suite::{check_conv_instance, ConvInstance, GradcheckReport};
use sardrn::nn::{conv2d_dilated_backward, conv2d_dilated_forward, ConvLayerParams};
use sardrn::{Shape4, Tensor4};

/// Direct evaluation of the dilated cross-correlation, one output at a time.
fn naive_forward(x: &Tensor4, p: &ConvLayerParams) -> Tensor4 {
    let s = x.shape();
    let k = p.kernel();
    let (d, pad) = (p.dilation as isize, p.pad as isize);
    let reach = (k as isize - 1) * d;
    let ho = (s.h as isize + 2 * pad - reach) as usize;
    let wo = (s.w as isize + 2 * pad - reach) as usize;
    let oc = p.out_channels();
    Tensor4::from_fn(Shape4::new(s.n, oc, ho, wo), |n, o, y, xo| {
        let mut acc = p.bias[o];
        for i in 0..s.c {
            for ky in 0..k {
                for kx in 0..k {
                    let iy = y as isize + ky as isize * d - pad;
                    let ix = xo as isize + kx as isize * d - pad;
                    if iy >= 0 && ix >= 0 && (iy as usize) < s.h && (ix as usize) < s.w {
                        acc += p.weights[(o, i, ky, kx)] * x[(n, i, iy as usize, ix as usize)];
                    }
                }
            }
        }
        acc
    })
}

/// Undilated 3x3 convolution with the same accumulation order.
fn plain_conv3x3(x: &Tensor4, w: &Tensor4, bias: &[f64]) -> Tensor4 {
    let s = x.shape();
    let oc = w.shape().n;
    Tensor4::from_fn(Shape4::new(s.n, oc, s.h, s.w), |n, o, y, xo| {
        let mut acc = bias[o];
        for i in 0..s.c {
            for ky in 0..3 {
                for kx in 0..3 {
                    let (iy, ix) = (y + ky, xo + kx);
                    if iy >= 1 && ix >= 1 && iy - 1 < s.h && ix - 1 < s.w {
                        acc += w[(o, i, ky, kx)] * x[(n, i, iy - 1, ix - 1)];
                    }
                }
            }
        }
        acc
    })
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: Shape4) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

fn random_params(rng: &mut ChaCha8Rng, out_c: usize, in_c: usize, d: usize, pad: usize) -> ConvLayerParams {
    let mut p = ConvLayerParams::zeros(out_c, in_c, 3, d, pad);
    p.weights = random_tensor(rng, p.weights.shape());
    for b in &mut p.bias {
        *b = rng.gen_range(-1.0..1.0);
    }
    p
}

/// Relative difference measured against the larger of the two maxima.
fn rel_max_diff(a: &Tensor4, b: &Tensor4) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = a.max_abs().max(b.max_abs()).max(1e-300);
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

fn conv_case() -> impl Strategy<Value = (u64, usize, usize, usize, usize, usize, usize)> {
    (1usize..=4).prop_flat_map(|d| {
        let min = 2 * d + 1;
        (any::<u64>(), Just(d), 0..=d, 1usize..=2, 1usize..=3, 1usize..=3, min..min + 6)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_direct_evaluation((seed, d, pad, n, c, oc, size) in conv_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, Shape4::new(n, c, size, size + 1));
        let p = random_params(&mut rng, oc, c, d, pad);
        let fast = conv2d_dilated_forward(&x, &p).unwrap();
        let slow = naive_forward(&x, &p);
        prop_assert!(rel_max_diff(&fast, &slow) <= 1e-12);
    }

    #[test]
    fn output_size_follows_the_shape_law((seed, d, pad, _n, c, oc, size) in conv_case()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, Shape4::new(1, c, size, size + 3));
        let p = random_params(&mut rng, oc, c, d, pad);
        let out = conv2d_dilated_forward(&x, &p).unwrap().shape();
        prop_assert_eq!(out.h, size + 2 * pad - 2 * d);
        prop_assert_eq!(out.w, size + 3 + 2 * pad - 2 * d);
        prop_assert_eq!(out.c, oc);
    }

    #[test]
    fn size_is_preserved_when_pad_equals_dilation(seed in any::<u64>(), d in 1usize..=4, size in 9usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, Shape4::new(1, 2, size, size));
        let p = random_params(&mut rng, 2, 2, d, d);
        prop_assert_eq!(conv2d_dilated_forward(&x, &p).unwrap().shape(), x.shape());
    }

    #[test]
    fn forward_is_linear_in_the_input((seed, d, pad, n, c, oc, size) in conv_case(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape4::new(n, c, size, size);
        let x1 = random_tensor(&mut rng, shape);
        let x2 = random_tensor(&mut rng, shape);
        let mut p = random_params(&mut rng, oc, c, d, pad);
        p.bias.iter_mut().for_each(|v| *v = 0.0);
        let mixed = Tensor4::from_vec(shape, x1.data().iter().zip(x2.data()).map(|(u, v)| a * u + b * v).collect()).unwrap();
        let lhs = conv2d_dilated_forward(&mixed, &p).unwrap();
        let f1 = conv2d_dilated_forward(&x1, &p).unwrap();
        let f2 = conv2d_dilated_forward(&x2, &p).unwrap();
        let rhs = Tensor4::from_vec(lhs.shape(), f1.data().iter().zip(f2.data()).map(|(u, v)| a * u + b * v).collect()).unwrap();
        let scale = (a.abs() + b.abs()) * f1.max_abs().max(f2.max_abs());
        let err = lhs.data().iter().zip(rhs.data()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * scale.max(1.0), "err {err}");
    }

    #[test]
    fn dilation_one_is_bitwise_a_plain_convolution(seed in any::<u64>(), c in 1usize..=3, oc in 1usize..=3, size in 3usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, Shape4::new(2, c, size, size));
        let p = random_params(&mut rng, oc, c, 1, 1);
        let dilated = conv2d_dilated_forward(&x, &p).unwrap();
        let plain = plain_conv3x3(&x, &p.weights, &p.bias);
        prop_assert_eq!(dilated.data(), plain.data());
    }

    #[test]
    fn backward_is_the_adjoint_of_forward((seed, d, pad, n, c, oc, size) in conv_case()) {
        // <G, conv(x)> - bias term equals <x, dL/dx> for the linear part.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&mut rng, Shape4::new(n, c, size, size));
        let mut p = random_params(&mut rng, oc, c, d, pad);
        p.bias.iter_mut().for_each(|v| *v = 0.0);
        let y = conv2d_dilated_forward(&x, &p).unwrap();
        let g = random_tensor(&mut rng, y.shape());
        let grads = conv2d_dilated_backward(&g, &x, &p).unwrap();
        let lhs = g.dot(&y).unwrap();
        let rhs = x.dot(&grads.grad_input).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        // and the weight gradient pairs with the weights the same way
        let rhs_w = p.weights.dot(&grads.grad_weights).unwrap();
        prop_assert!((lhs - rhs_w).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn analytic_gradients_match_finite_differences(seed in any::<u64>(), d in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = ConvInstance::random_with_dilation(&mut rng, d);
        let mut report = GradcheckReport::default();
        check_conv_instance(&inst, &mut report, "prop").unwrap();
        let worst = report.worst().unwrap();
        prop_assert!(worst.worst_relative_error < 1e-5, "{} on {}", worst.worst_relative_error, inst.describe());
    }
}

#[test]
fn impulse_response_lands_on_dilated_taps() {
    // A single unit input at the centre produces the flipped kernel spread by d.
    for d in 1..=4 {
        let size = 4 * d + 1;
        let mid = 2 * d;
        let mut x = Tensor4::zeros(Shape4::new(1, 1, size, size));
        x[(0, 0, mid, mid)] = 1.0;
        let mut p = ConvLayerParams::zeros(1, 1, 3, d, d);
        for ky in 0..3 {
            for kx in 0..3 {
                p.weights[(0, 0, ky, kx)] = (1 + ky * 3 + kx) as f64;
            }
        }
        let y = conv2d_dilated_forward(&x, &p).unwrap();
        let mut nonzero = 0;
        for yy in 0..size {
            for xx in 0..size {
                let v = y[(0, 0, yy, xx)];
                if v != 0.0 {
                    nonzero += 1;
                    let ky = (mid + d - yy) / d;
                    let kx = (mid + d - xx) / d;
                    assert_eq!((mid + d - yy) % d, 0);
                    assert_eq!(v, p.weights[(0, 0, ky, kx)]);
                }
            }
        }
        assert_eq!(nonzero, 9, "dilation {d}");
    }
}

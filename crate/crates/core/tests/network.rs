use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sardrn::gradcheck_suite::{check_network, GradcheckReport};
use sardrn::network::receptive_field_of_dilations;
use sardrn::nn::{add_elementwise, conv2d_dilated_forward, relu_forward};
use sardrn::{build_sardrn, NetworkSpec, Shape4, Tensor4};

mod common;
use common::impulse_footprint;

#[test]
fn impulse_footprint_of_the_default_dilations_is_33() {
    assert_eq!(impulse_footprint(&[1, 2, 3, 4, 3, 2, 1]), 33);
}

#[test]
fn undilated_footprint_grows_by_two_per_layer() {
    for depth in 1..=7 {
        assert_eq!(impulse_footprint(&vec![1; depth]), 2 * depth as u64 + 1);
    }
}

#[test]
fn doubling_dilations_reach_the_exponential_footprint() {
    // d = 1, 2, 4, 8 gives 2^(l+1) - 1 = 31 at depth 4
    assert_eq!(impulse_footprint(&[1, 2, 4, 8]), 31);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn formula_agrees_with_impulse_oracle(dilations in prop::collection::vec(1usize..=4, 1..=7)) {
        prop_assert_eq!(receptive_field_of_dilations(&dilations).unwrap(), impulse_footprint(&dilations));
    }
}

fn random_input(rng: &mut ChaCha8Rng, shape: Shape4) -> Tensor4 {
    Tensor4::from_fn(shape, |_, _, _, _| rng.gen_range(0.0..2.0))
}

#[test]
fn linearized_network_is_homogeneous_and_additive() {
    let spec = NetworkSpec::sardrn_with_width(4).linearized();
    let net = build_sardrn(spec, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = Shape4::new(1, 1, 20, 20);
    let a = random_input(&mut rng, shape);
    let b = random_input(&mut rng, shape);
    let fa = net.forward(&a).unwrap();
    let fb = net.forward(&b).unwrap();
    let f2a = net.forward(&a.scale(2.0)).unwrap();
    let fab = net.forward(&add_elementwise(&a, &b).unwrap()).unwrap();
    let scale = fa.max_abs().max(fb.max_abs());
    for i in 0..fa.data().len() {
        assert!((f2a.data()[i] - 2.0 * fa.data()[i]).abs() <= 1e-12 * scale);
        assert!((fab.data()[i] - fa.data()[i] - fb.data()[i]).abs() <= 1e-12 * scale);
    }
}

#[test]
fn forward_wires_skips_into_layers_three_and_seven() {
    let mut net = build_sardrn(NetworkSpec::sardrn_with_width(3), 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for l in 0..7 {
        for b in &mut net.layer_mut(l).bias {
            *b = rng.gen_range(-0.2..0.2);
        }
    }
    let y = random_input(&mut rng, Shape4::new(2, 1, 16, 16));
    let p = net.params();
    let relu_conv = |x: &Tensor4, i: usize| relu_forward(&conv2d_dilated_forward(x, &p[i]).unwrap());
    let a1 = relu_conv(&y, 0);
    let a2 = relu_conv(&a1, 1);
    let a3 = relu_conv(&add_elementwise(&a2, &a1).unwrap(), 2);
    let a4 = relu_conv(&a3, 3);
    let a5 = relu_conv(&a4, 4);
    let a6 = relu_conv(&a5, 5);
    let a7 = conv2d_dilated_forward(&add_elementwise(&a6, &a4).unwrap(), &p[6]).unwrap();
    assert_eq!(net.forward(&y).unwrap(), a7);
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let mut report = GradcheckReport::default();
    for seed in [1, 2] {
        check_network(seed, 4, 10, &mut report).unwrap();
    }
    assert!(report.passed(), "{:?}", report.worst());
}

#[test]
fn input_gradient_matches_finite_differences() {
    let net = build_sardrn(NetworkSpec::sardrn_with_width(3), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shape = Shape4::new(1, 1, 9, 9);
    let y = random_input(&mut rng, shape);
    let g = Tensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0));
    let trace = net.forward_trace(&y).unwrap();
    let analytic = net.backward(&trace, &g).unwrap().input;
    let numeric = sardrn::nn::finite_difference_gradient(
        |v| {
            let t = Tensor4::from_vec(shape, v.to_vec()).unwrap();
            net.forward(&t).unwrap().dot(&g).unwrap()
        },
        y.data(),
        1e-5,
    )
    .unwrap();
    let (err, _) = sardrn::nn::max_relative_error(analytic.data(), &numeric);
    assert!(err < 1e-5, "{err}");
}

#[test]
fn ablations_keep_parameter_counts() {
    let full = NetworkSpec::sardrn();
    assert_eq!(full.param_count(), 185_857);
    assert_eq!(full.clone().without_dilation().param_count(), 185_857);
    assert_eq!(full.without_skips().param_count(), 185_857);
}

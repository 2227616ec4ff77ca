//! Trains a narrow network on procedural scenes and reports held-out PSNR.
//!
//! ```text
//! cargo run --release -p sardrn --example toy_train -- \
//!     [width] [iterations] [looks] [full|plain|dilated|skips] [lr] [patch] [stride] [redraw|-] [zero-last|-] [bc]
//! ```

use std::time::Instant;

use sardrn::metrics::{psnr, ssim};
use sardrn::speckle::apply_speckle_stream;
use sardrn::synthetic::procedural_dataset;
use sardrn::training::{train_from, TrainConfig};
use sardrn::{build_sardrn, NetworkSpec, SpeckleConfig};

fn main() -> sardrn::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let width: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(16);
    let iterations: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let looks: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let variant = args.get(3).map(String::as_str).unwrap_or("full");
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let patch: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(32);
    let stride: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(8);
    let redraw = args.get(7).is_some_and(|s| s == "redraw");
    let zero_last = args.get(8).is_some_and(|s| s == "zero-last");
    let bias_correction = args.get(9).is_some_and(|s| s == "bc");

    let train_set = procedural_dataset(16, 64, 64, 1000);
    let held_out = procedural_dataset(4, 64, 64, 9000);
    let cfg = TrainConfig {
        looks,
        patch_size: patch,
        stride,
        batch_size: 32,
        epochs: usize::MAX,
        lr0: lr,
        decay_interval_epochs: 60,
        max_iterations: Some(iterations),
        validation_fraction: 0.0,
        seed: 7,
        redraw_noise: redraw,
        adam_bias_correction: bias_correction,
        ..TrainConfig::default()
    };
    let mut spec = NetworkSpec::sardrn_with_width(width);
    match variant {
        "plain" => spec = spec.without_dilation().without_skips(),
        "dilated" => spec = spec.without_skips(),
        "skips" => spec = spec.without_dilation(),
        _ => {}
    }
    let mut net = build_sardrn(spec, cfg.seed)?;
    if zero_last {
        let last = net.layer_mut(6);
        last.weights.data_mut().iter_mut().for_each(|w| *w = 0.0);
    }
    let start = Instant::now();
    let mut window = 0.0;
    let report = train_from(net, &train_set, &cfg, |r| {
        window += r.loss;
        if r.iteration == 0 {
            eprintln!("initial loss {:.5}", r.loss);
        }
        if (r.iteration + 1) % 100 == 0 {
            eprintln!("iter {:>5} mean loss {:.5}", r.iteration + 1, window / 100.0);
            window = 0.0;
        }
    })?;
    let secs = start.elapsed().as_secs_f64();

    let speckle = SpeckleConfig::new(looks, 4242)?;
    let (mut p_in, mut p_out, mut s_in, mut s_out) = (0.0, 0.0, 0.0, 0.0);
    for (j, clean) in held_out.iter().enumerate() {
        let y = apply_speckle_stream(clean, &speckle, j as u64)?;
        let x_hat = report.network.despeckle(&y)?;
        p_in += psnr(&y, clean, 1.0)?;
        p_out += psnr(&x_hat, clean, 1.0)?;
        s_in += ssim(&y, clean)?;
        s_out += ssim(&x_hat, clean)?;
    }
    let big = procedural_dataset(4, 128, 128, 9000);
    let (mut b_in, mut b_out) = (0.0, 0.0);
    for (j, clean) in big.iter().enumerate() {
        let y = apply_speckle_stream(clean, &speckle, j as u64)?;
        b_in += psnr(&y, clean, 1.0)?;
        b_out += psnr(&report.network.despeckle(&y)?, clean, 1.0)?;
    }
    eprintln!("128x128 held-out PSNR {:.2} -> {:.2} dB", b_in / 4.0, b_out / 4.0);
    let k = held_out.len() as f64;
    println!(
        "{variant} width {width} patch {patch} stride {stride} redraw {redraw} zero_last {zero_last} bc {bias_correction} lr {lr} iters {iterations}: {secs:.1}s ({:.3}s/iter), PSNR {:.2} -> {:.2} dB, SSIM {:.3} -> {:.3}",
        secs / iterations as f64,
        p_in / k,
        p_out / k,
        s_in / k,
        s_out / k
    );
    Ok(())
}

use std::path::Path;
use std::process::{Command, Output};

use sardrn::io::{save_image, save_model};
use sardrn::synthetic::procedural_image;
use sardrn::{build_sardrn, ImageF, NetworkSpec};

fn sardrn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sardrn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn rf_prints_33_for_the_default_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let o = sardrn(&["rf", "--dilations", "1,2,3,4,3,2,1"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let config = text.lines().find(|l| l.starts_with("config")).unwrap();
    assert_eq!(config.split_whitespace().last(), Some("33"));
    assert!(text.contains("common           15"));
}

#[test]
fn evaluate_identical_images_reports_the_sentinels() {
    let dir = tempfile::tempdir().unwrap();
    save_image(&procedural_image(32, 32, 1), dir.path().join("a.pgm")).unwrap();
    let o = sardrn(&["evaluate", "--ref", "a.pgm", "--test", "a.pgm", "--region", "0,0,8,8"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    assert!(table.contains("PSNR (dB)"));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("reference,test,psnr_db,ssim,epd_roa_h,epd_roa_v,epd_roa,enl"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..7], ["a.pgm", "a.pgm", "inf", "1.000000", "1.000000", "1.000000", "1.000000"]);
}

#[test]
fn simulate_is_byte_reproducible_and_reports_enl() {
    let dir = tempfile::tempdir().unwrap();
    save_image(&ImageF::filled(64, 64, 0.5), dir.path().join("flat.pgm")).unwrap();
    let args = |out: &'static str| {
        vec!["simulate", "--in", "flat.pgm", "--looks", "4", "--seed", "9", "--out", out, "--region", "0,0,64,64"]
    };
    let a = sardrn(&args("a.pgm"), dir.path());
    let b = sardrn(&args("b.pgm"), dir.path());
    assert!(a.status.success() && b.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("a.pgm")).unwrap(),
        std::fs::read(dir.path().join("b.pgm")).unwrap()
    );
    let line = stdout(&a);
    assert!(line.starts_with("enl 0,0,64,64 "), "{line}");
    let value: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    // 8-bit quantization biases the estimate slightly; only check it is in range
    assert!((2.5..6.0).contains(&value), "{value}");
}

#[test]
fn missing_file_and_unknown_flag_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = sardrn(&["evaluate", "--ref", "nope.pgm", "--test", "nope.pgm"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.pgm"));
    assert_eq!(sardrn(&["rf", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(sardrn(&["train", "--config", "missing.cfg"], dir.path()).status.code(), Some(2));
}

#[test]
fn despeckle_applies_a_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = build_sardrn(NetworkSpec::sardrn_with_width(2), 1).unwrap();
    // zero output layer: the estimate equals the input
    let last = net.layer_mut(6);
    last.weights.data_mut().iter_mut().for_each(|w| *w = 0.0);
    save_model(&net, dir.path().join("m.sdrn")).unwrap();
    let img = procedural_image(40, 40, 3);
    save_image(&img, dir.path().join("y.pgm")).unwrap();
    let o = sardrn(&["despeckle", "--model", "m.sdrn", "--in", "y.pgm", "--out", "x.pgm"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("x.pgm")).unwrap(),
        std::fs::read(dir.path().join("y.pgm")).unwrap()
    );
}

#[test]
fn gradcheck_passes_and_names_the_worst_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = sardrn(&["gradcheck", "--seed", "3", "--instances", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("worst:"));
}

#[test]
fn train_writes_model_and_logs_then_plots() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for i in 0..3 {
        save_image(&procedural_image(24, 24, i), data.join(format!("img{i}.pgm"))).unwrap();
    }
    std::fs::write(
        dir.path().join("exp.cfg"),
        "dataset_dir = data\noutput_dir = out\nwidth = 2\npatch_size = 12\nstride = 6\n\
         batch_size = 4\nepochs = 2\nlr0 = 0.001\nvalidation_fraction = 0.34\n",
    )
    .unwrap();
    let o = sardrn(&["train", "--config", "exp.cfg"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in ["model.sdrn", "loss.csv", "validation.csv", "train.log"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let loss = std::fs::read_to_string(out.join("loss.csv")).unwrap();
    // 2 training images x 9 patches = 18 pairs, 4 batches per epoch
    assert_eq!(loss.lines().count(), 1 + 8);
    assert_eq!(std::fs::read_to_string(out.join("validation.csv")).unwrap().lines().count(), 3);

    let p = sardrn(&["plot", "--csv", "out/loss.csv", "--out", "loss.svg"], dir.path());
    assert!(p.status.success());
    assert!(std::fs::read_to_string(dir.path().join("loss.svg")).unwrap().contains("<svg"));
}

#[test]
fn diverging_training_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    save_image(&procedural_image(24, 24, 5), data.join("a.pgm")).unwrap();
    std::fs::write(
        dir.path().join("exp.cfg"),
        "dataset_dir = data\noutput_dir = out\nwidth = 2\npatch_size = 12\nstride = 4\n\
         batch_size = 4\nepochs = 50\nlr0 = 1e300\nvalidation_fraction = 0\n",
    )
    .unwrap();
    let o = sardrn(&["train", "--config", "exp.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iteration"));
}

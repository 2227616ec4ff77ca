use proptest::prelude::*;
use sardrn::io::config::ExperimentConfig;
use sardrn::io::logs::{append_metric_row, loss_csv, read_csv_columns};
use sardrn::io::model::payload_floats;
use sardrn::io::plot::svg_line_chart;
use sardrn::io::{decode_model, decode_pgm, encode_model, encode_pgm, load_image, load_model, save_image, save_model};
use sardrn::training::IterationRecord;
use sardrn::{build_sardrn, Error, ImageF, MetricReport, ModelError, NetworkSpec, Shape4, Tensor4};

fn image_strategy() -> impl Strategy<Value = ImageF> {
    (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
        prop::collection::vec(0.0f64..=1.0, h * w).prop_map(move |px| ImageF::new(h, w, px).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_round_trip_is_within_half_a_level(img in image_strategy(), wide in any::<bool>()) {
        let maxval: u16 = if wide { 65535 } else { 255 };
        let back = decode_pgm(&encode_pgm(&img, maxval).unwrap()).unwrap();
        prop_assert_eq!((back.height(), back.width()), (img.height(), img.width()));
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            prop_assert!((a - b).abs() <= 0.5 / maxval as f64 + 1e-12);
        }
        // a quantized image survives a second trip bit for bit
        prop_assert_eq!(decode_pgm(&encode_pgm(&back, maxval).unwrap()).unwrap(), back);
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_pgm(&bytes);
        let _ = decode_model(&bytes);
    }

    #[test]
    fn truncated_pgm_is_a_parse_error(img in image_strategy(), cut in 1usize..8) {
        let bytes = encode_pgm(&img, 255).unwrap();
        let cut = cut.min(bytes.len());
        let short = &bytes[..bytes.len() - cut];
        prop_assert!(
            matches!(decode_pgm(short), Err(Error::Parse { .. })),
            "expected a parse error"
        );
    }
}

#[test]
fn pgm_header_is_plain_p5() {
    let img = ImageF::new(2, 3, vec![0.0, 0.5, 1.0, 1.0, 0.25, 0.0]).unwrap();
    let bytes = encode_pgm(&img, 255).unwrap();
    assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
    assert_eq!(&bytes[11..], &[0, 128, 255, 255, 64, 0]);
}

fn small_model() -> sardrn::Network {
    build_sardrn(NetworkSpec::sardrn_with_width(2), 3).unwrap()
}

#[test]
fn every_single_byte_corruption_is_rejected() {
    let bytes = encode_model(&small_model());
    for i in 0..bytes.len() {
        for flip in [0x01u8, 0x80, 0xFF] {
            let mut bad = bytes.clone();
            bad[i] ^= flip;
            assert!(decode_model(&bad).is_err(), "flip {flip:#x} at byte {i} accepted");
        }
    }
}

#[test]
fn every_truncation_is_rejected() {
    let bytes = encode_model(&small_model());
    for len in 0..bytes.len() {
        assert!(decode_model(&bytes[..len]).is_err(), "length {len} accepted");
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(decode_model(&longer).is_err());
}

#[test]
fn typed_model_errors() {
    let bytes = encode_model(&small_model());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert_eq!(decode_model(&magic).unwrap_err(), ModelError::BadMagic(*b"XDRN"));

    let mut version = bytes[..bytes.len() - 4].to_vec();
    version[4] = 9;
    let crc = crc32(&version);
    version.extend_from_slice(&crc.to_le_bytes());
    assert_eq!(decode_model(&version).unwrap_err(), ModelError::UnsupportedVersion(9));

    let mut payload = bytes.clone();
    let last = payload.len() - 5;
    payload[last] ^= 0x10;
    assert!(matches!(decode_model(&payload), Err(ModelError::CrcMismatch { .. })));
}

/// Bitwise CRC-32 (IEEE, reflected), independent of the library's implementation.
fn crc32(data: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in data {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

#[test]
fn stored_checksum_matches_reference_crc() {
    let bytes = encode_model(&small_model());
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    assert_eq!(u32::from_le_bytes(tail.try_into().unwrap()), crc32(body));
}

#[test]
fn saved_model_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sdrn");
    let net = build_sardrn(NetworkSpec::sardrn_with_width(8), 17).unwrap();
    save_model(&net, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded.spec(), net.spec());
    let y = Tensor4::from_fn(Shape4::new(1, 1, 24, 24), |_, _, r, c| 0.5 + 0.4 * ((r * 3 + c) as f64).sin());
    let a = net.forward(&y).unwrap();
    let b = loaded.forward(&y).unwrap();
    let diff = a.data().iter().zip(b.data()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-6 * a.max_abs(), "{diff}");
    // f32 storage is idempotent
    assert_eq!(encode_model(&loaded), std::fs::read(&path).unwrap());
    assert_eq!(payload_floats(&encode_model(&loaded)).unwrap(), net.param_count());
}

#[test]
fn skip_table_survives_the_round_trip() {
    let spec = NetworkSpec::sardrn_with_width(2).with_skips(&[(2, 5)]);
    let net = build_sardrn(spec.clone(), 1).unwrap();
    let back = decode_model(&encode_model(&net)).unwrap();
    assert_eq!(back.spec(), &spec);
}

#[test]
fn images_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.pgm");
    let img = ImageF::from_fn(5, 4, |r, c| ((r + c) * 17) as f64 / 255.0);
    save_image(&img, &path).unwrap();
    let back = load_image(&path).unwrap();
    for (a, b) in img.pixels().iter().zip(back.pixels()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(matches!(load_image(dir.path().join("missing.pgm")), Err(Error::Io(_))));
}

#[test]
fn config_files_parse_and_resolve_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("imgs")).unwrap();
    let path = dir.path().join("exp.cfg");
    std::fs::write(
        &path,
        "# toy run\nlooks = 4\nbatch_size = 8\ndataset_dir = imgs\nwidth = 4\nskips = none\ndilated = false\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.train.looks, 4.0);
    assert_eq!(cfg.train.batch_size, 8);
    assert_eq!(cfg.dataset_dir, dir.path().join("imgs"));
    let spec = cfg.network_spec().unwrap();
    assert!(spec.skips.is_empty());
    assert_eq!(spec.dilations(), vec![1; 7]);

    assert!(matches!(ExperimentConfig::parse("lookz = 2\n"), Err(Error::Config(_))));
    assert!(ExperimentConfig::parse("looks = 0.5\n").is_err());
}

#[test]
fn csv_logs_round_trip_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<IterationRecord> = (0..5)
        .map(|i| IterationRecord {
            iteration: i,
            epoch: 0,
            lr: 0.01,
            loss: 1.0 / (i + 1) as f64,
        })
        .collect();
    let path = dir.path().join("loss.csv");
    std::fs::write(&path, loss_csv(&records)).unwrap();
    let pts = read_csv_columns(&path, "iteration", "loss").unwrap();
    assert_eq!(pts.len(), 5);
    assert_eq!(pts[4], (4.0, 0.2));
    let svg = svg_line_chart(&pts, "loss", "iteration", "loss");
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let metrics = dir.path().join("metrics.csv");
    let x = ImageF::from_fn(16, 16, |r, c| 0.1 + 0.01 * (r + c) as f64);
    let report = MetricReport::compute(&x, &x, 1.0, &[], sardrn::EnlDefinition::Standard).unwrap();
    append_metric_row(&metrics, &report, "a.pgm", "b.pgm").unwrap();
    append_metric_row(&metrics, &report, "a.pgm", "c.pgm").unwrap();
    let text = std::fs::read_to_string(&metrics).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().next().unwrap(), MetricReport::CSV_HEADER);
}

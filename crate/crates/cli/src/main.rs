//! `sardrn` command-line tool.
//!
//! Exit codes: 0 on success, 2 for usage errors and unreadable or invalid
//! inputs, 3 for numeric failures (training divergence, failed gradient
//! check).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sardrn::gradcheck_suite::run_suite;
use sardrn::io::config::ExperimentConfig;
use sardrn::io::logs::{append_metric_row, load_dataset, log_line, loss_csv, read_csv_columns, validation_csv};
use sardrn::io::plot::svg_line_chart;
use sardrn::io::{load_image, load_model, save_image, save_model};
use sardrn::training::{train_from, IterationRecord};
use sardrn::{apply_speckle, build_sardrn, enl, EnlDefinition, Error, MetricReport, ReceptiveFieldReport, Region};
use sardrn::{metrics::fmt_num, SpeckleConfig};

#[derive(Parser)]
#[command(name = "sardrn", version, about = "SAR image despeckling with a dilated residual network")]
struct Cli {
    /// Accepted for compatibility; every command is deterministic.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply a clean image by Gamma speckle.
    Simulate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        looks: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Print the ENL of this `x,y,w,h` region of the output.
        #[arg(long)]
        region: Option<Region>,
        #[arg(long, default_value = "standard")]
        enl_def: EnlDefinition,
    },
    /// Train a network from an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Apply a trained model to a speckled image.
    Despeckle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a test image against a reference.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Homogeneous `x,y,w,h` region for ENL; repeatable.
        #[arg(long)]
        region: Vec<Region>,
        /// CSV file the metric row is appended to.
        #[arg(long, default_value = "metrics.csv")]
        csv: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
        #[arg(long, default_value = "standard")]
        enl_def: EnlDefinition,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
    /// Receptive fields of a dilation schedule.
    Rf {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,3,2,1")]
        dilations: Vec<usize>,
    },
    /// Render two CSV columns as an SVG line chart.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "iteration")]
        x: String,
        #[arg(long, default_value = "loss")]
        y: String,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Input(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } | Error::NonFinite(_) => Failure::Numeric(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn with_path<T>(path: &Path, r: sardrn::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        n => n,
    })
}

fn simulate(
    input: &Path,
    looks: f64,
    seed: u64,
    out: &Path,
    region: Option<Region>,
    enl_def: EnlDefinition,
) -> CmdResult {
    let clean = with_path(input, load_image(input))?;
    let cfg = SpeckleConfig::new(looks, seed)?;
    let speckled = apply_speckle(&clean, &cfg)?;
    with_path(out, save_image(&speckled, out))?;
    if let Some(r) = region {
        let value = enl(&speckled.crop(r)?, enl_def)?;
        println!("enl {r} {}", fmt_num(value));
    }
    Ok(())
}

fn train(config: &Path) -> CmdResult {
    let cfg = with_path(config, ExperimentConfig::load(config))?;
    let dataset = with_path(&cfg.dataset_dir, load_dataset(&cfg.dataset_dir))?;
    if dataset.is_empty() {
        return Err(Failure::Input(format!("no .pgm images in {}", cfg.dataset_dir.display())));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let spec = cfg.network_spec()?;
    let net = build_sardrn(spec, cfg.train.seed)?;
    eprintln!(
        "training on {} images, {} parameters, output in {}",
        dataset.len(),
        net.param_count(),
        cfg.output_dir.display()
    );

    let mut log = BufWriter::new(File::create(cfg.output_dir.join("train.log"))?);
    let mut seen: Vec<IterationRecord> = Vec::new();
    let result = train_from(net, &dataset, &cfg.train, |r| {
        // a failed log write must not abort training; it resurfaces on flush
        let _ = writeln!(log, "{}", log_line(r));
        if r.iteration % 100 == 0 {
            eprintln!("{}", log_line(r));
        }
        seen.push(*r);
    });
    let losses = match &result {
        Ok(report) => &report.losses,
        Err(_) => &seen,
    };
    fs::write(cfg.output_dir.join("loss.csv"), loss_csv(losses))?;
    match result {
        Ok(report) => {
            writeln!(log, "finished after {} iterations", report.losses.len())?;
            log.flush()?;
            fs::write(cfg.output_dir.join("validation.csv"), validation_csv(&report.validation))?;
            save_model(&report.network, cfg.output_dir.join("model.sdrn"))?;
            if let Some(v) = report.validation.last() {
                eprintln!("final validation: PSNR {} dB, SSIM {}", fmt_num(v.psnr_db), fmt_num(v.ssim));
            }
            Ok(())
        }
        Err(e) => {
            writeln!(log, "{e}")?;
            log.flush()?;
            Err(e.into())
        }
    }
}

fn despeckle(model: &Path, input: &Path, out: &Path) -> CmdResult {
    let net = with_path(model, load_model(model))?;
    let y = with_path(input, load_image(input))?;
    let estimate = net.despeckle(&y)?;
    with_path(out, save_image(&estimate, out))?;
    Ok(())
}

fn evaluate(
    reference: &Path,
    test: &Path,
    regions: &[Region],
    csv: &Path,
    peak: f64,
    enl_def: EnlDefinition,
) -> CmdResult {
    let x = with_path(reference, load_image(reference))?;
    let t = with_path(test, load_image(test))?;
    let report = MetricReport::compute(&t, &x, peak, regions, enl_def)?;
    print!("{}", report.table());
    with_path(
        csv,
        append_metric_row(csv, &report, &reference.display().to_string(), &test.display().to_string()),
    )?;
    Ok(())
}

fn gradcheck(seed: u64, instances: usize) -> CmdResult {
    let report = run_suite(seed, instances)?;
    for c in &report.checks {
        println!(
            "{:<4} {:<60} {:>9.3e} (tolerance {:.0e})",
            if c.passed() { "ok" } else { "FAIL" },
            c.label,
            c.worst_relative_error,
            c.tolerance
        );
    }
    let worst = report.worst_by_margin().expect("suite is never empty");
    let summary = format!(
        "worst: {} component {} relative error {:.3e}",
        worst.label, worst.worst_index, worst.worst_relative_error
    );
    println!("{summary}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("gradient check failed; {summary}")))
    }
}

fn rf(dilations: &[usize]) -> CmdResult {
    print!("{}", ReceptiveFieldReport::for_dilations(dilations)?);
    Ok(())
}

fn plot(csv: &Path, x: &str, y: &str, out: &Path) -> CmdResult {
    let points = with_path(csv, read_csv_columns(csv, x, y))?;
    let title = format!("{y} vs {x}");
    fs::write(out, svg_line_chart(&points, &title, x, y))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            input,
            looks,
            seed,
            out,
            region,
            enl_def,
        } => simulate(&input, looks, seed, &out, region, enl_def),
        Command::Train { config } => train(&config),
        Command::Despeckle { model, input, out } => despeckle(&model, &input, &out),
        Command::Evaluate {
            reference,
            test,
            region,
            csv,
            peak,
            enl_def,
        } => evaluate(&reference, &test, &region, &csv, peak, enl_def),
        Command::Gradcheck { seed, instances } => gradcheck(seed, instances),
        Command::Rf { dilations } => rf(&dilations),
        Command::Plot { csv, x, y, out } => plot(&csv, &x, &y, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

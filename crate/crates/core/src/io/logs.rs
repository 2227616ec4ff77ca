//! CSV and plain-text training logs, metric rows and dataset directories.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::ImageF;
use crate::io::pgm::load_image;
use crate::metrics::{fmt_num, MetricReport};
use crate::training::{IterationRecord, ValidationRecord};

pub const LOSS_CSV_HEADER: &str = "iteration,epoch,lr,loss";
pub const VALIDATION_CSV_HEADER: &str = "epoch,psnr_db,ssim";

pub fn loss_csv(records: &[IterationRecord]) -> String {
    let mut s = format!("{LOSS_CSV_HEADER}\n");
    for r in records {
        s.push_str(&format!("{},{},{:e},{:e}\n", r.iteration, r.epoch, r.lr, r.loss));
    }
    s
}

pub fn validation_csv(records: &[ValidationRecord]) -> String {
    let mut s = format!("{VALIDATION_CSV_HEADER}\n");
    for r in records {
        s.push_str(&format!("{},{},{}\n", r.epoch, fmt_num(r.psnr_db), fmt_num(r.ssim)));
    }
    s
}

/// One line of the human-readable training log.
pub fn log_line(r: &IterationRecord) -> String {
    format!("iter {:>7}  epoch {:>4}  lr {:.3e}  loss {:.6e}", r.iteration, r.epoch, r.lr, r.loss)
}

/// Appends a metric row, writing the header first if the file is new or empty.
pub fn append_metric_row(path: impl AsRef<Path>, report: &MetricReport, reference: &str, test: &str) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{}", MetricReport::CSV_HEADER)?;
    }
    writeln!(f, "{}", report.csv_row(reference, test))?;
    Ok(())
}

/// Reads two numeric columns of a CSV file by header name.
pub fn read_csv_columns(path: impl AsRef<Path>, x_col: &str, y_col: &str) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Argument(format!("column {name:?} not in header {header:?}")))
    };
    let (xi, yi) = (find(x_col)?, find(y_col)?);
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            let get = |c: usize| {
                cells
                    .get(c)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Argument(format!("row {}: bad value in column {c}", i + 2)))
            };
            Ok((get(xi)?, get(yi)?))
        })
        .collect()
}

/// All `.pgm` files of a directory, sorted by file name.
pub fn list_pgm_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<ImageF>> {
    list_pgm_files(dir)?.iter().map(load_image).collect()
}

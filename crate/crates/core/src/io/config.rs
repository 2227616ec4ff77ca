//! Flat `key = value` experiment configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, SARDRN_WIDTH};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Hidden width of the network.
    pub width: usize,
    /// Per-layer dilation override.
    pub dilations: Option<Vec<usize>>,
    /// Skip-list override as `(source, dest)` pairs.
    pub skips: Option<Vec<(usize, usize)>>,
    /// Ablation switch: `false` forces every dilation to 1.
    pub dilated: bool,
    /// Ablation switch: `false` removes every skip connection.
    pub skip_connections: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            dataset_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            width: SARDRN_WIDTH,
            dilations: None,
            skips: None,
            dilated: true,
            skip_connections: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("line {line}: {key} = {v:?}: {e}")))
}

fn parse_list(key: &str, v: &str, line: usize) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_value(key, s.trim(), line)).collect()
}

fn parse_skips(v: &str, line: usize) -> Result<Vec<(usize, usize)>> {
    if v.trim().is_empty() || v.trim() == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|pair| {
            let (a, b) = pair
                .trim()
                .split_once('-')
                .ok_or_else(|| Error::Config(format!("line {line}: skip {pair:?} is not source-dest")))?;
            Ok((parse_value("skips", a.trim(), line)?, parse_value("skips", b.trim(), line)?))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
            let (key, v) = (key.trim(), value.trim());
            let t = &mut cfg.train;
            match key {
                "looks" => t.looks = parse_value(key, v, line)?,
                "patch_size" => t.patch_size = parse_value(key, v, line)?,
                "stride" => t.stride = parse_value(key, v, line)?,
                "batch_size" => t.batch_size = parse_value(key, v, line)?,
                "epochs" => t.epochs = parse_value(key, v, line)?,
                "lr0" => t.lr0 = parse_value(key, v, line)?,
                "beta1" => t.beta1 = parse_value(key, v, line)?,
                "beta2" => t.beta2 = parse_value(key, v, line)?,
                "epsilon" => t.epsilon = parse_value(key, v, line)?,
                "lr_decay" => t.lr_decay = parse_value(key, v, line)?,
                "decay_interval_epochs" => t.decay_interval_epochs = parse_value(key, v, line)?,
                "seed" => t.seed = parse_value(key, v, line)?,
                "adam_bias_correction" => t.adam_bias_correction = parse_value(key, v, line)?,
                "max_iterations" => t.max_iterations = Some(parse_value(key, v, line)?),
                "redraw_noise" => t.redraw_noise = parse_value(key, v, line)?,
                "validation_fraction" => t.validation_fraction = parse_value(key, v, line)?,
                "dataset_dir" => cfg.dataset_dir = PathBuf::from(v),
                "output_dir" => cfg.output_dir = PathBuf::from(v),
                "width" => cfg.width = parse_value(key, v, line)?,
                "dilations" => cfg.dilations = Some(parse_list(key, v, line)?),
                "skips" => cfg.skips = Some(parse_skips(v, line)?),
                "dilated" => cfg.dilated = parse_value(key, v, line)?,
                "skip_connections" => cfg.skip_connections = parse_value(key, v, line)?,
                _ => return Err(Error::Config(format!("line {line}: unknown key {key:?}"))),
            }
        }
        cfg.train.validate()?;
        cfg.network_spec()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    /// The dataset directory must exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset_dir, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if !cfg.dataset_dir.is_dir() {
            return Err(Error::Config(format!(
                "dataset directory {} does not exist",
                cfg.dataset_dir.display()
            )));
        }
        Ok(cfg)
    }

    /// Network topology after applying overrides and ablation switches.
    pub fn network_spec(&self) -> Result<NetworkSpec> {
        if self.width == 0 {
            return Err(Error::Config("width must be positive".into()));
        }
        let mut spec = NetworkSpec::sardrn_with_width(self.width);
        if let Some(d) = &self.dilations {
            spec = spec.with_dilations(d).map_err(|e| Error::Config(e.to_string()))?;
        }
        if !self.dilated {
            spec = spec.without_dilation();
        }
        if let Some(s) = &self.skips {
            spec = spec.with_skips(s);
        }
        if !self.skip_connections {
            spec = spec.without_skips();
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! master_seed = 42
//! output_dir = "out"
//! threads = 4
//! k = 2
//!
//! [kernel]
//! family = "gaussian"
//! bandwidth = 0.5
//!
//! [data]
//! generator = "two_blobs"
//! n = 40
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use kkmeans::kernel::KernelSpec;
use serde::Deserialize;

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "KKMEANS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    pub threads: Option<usize>,
    pub k: Option<usize>,
    pub kernel: Option<KernelSpec>,
    pub data: Option<DataSource>,
    #[serde(default)]
    pub method: MethodParams,
    #[serde(default)]
    pub nystrom: NystromParams,
    #[serde(default)]
    pub lab: LabParams,
    pub sweep: Option<SweepParams>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub points: Option<Vec<Vec<f64>>>,
    pub csv: Option<PathBuf>,
    pub generator: Option<String>,
    pub n: Option<usize>,
    pub spread: Option<f64>,
    pub blobs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodParams {
    pub name: String,
    pub restarts: usize,
    pub rounds: Option<usize>,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            name: "lloyd".into(),
            restarts: 10,
            rounds: None,
            max_iter: kkmeans::clustering::DEFAULT_MAX_ITER,
            rel_tol: kkmeans::clustering::DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NystromParams {
    pub mode: String,
    /// Fixed landmark count; overrides `mode`.
    pub m: Option<usize>,
    pub c_scale: f64,
    pub delta: f64,
    pub jitter: f64,
}

impl Default for NystromParams {
    fn default() -> Self {
        Self {
            mode: "general".into(),
            m: None,
            c_scale: kkmeans::nystrom::DEFAULT_C_SCALE,
            delta: kkmeans::nystrom::DEFAULT_DELTA,
            jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabParams {
    pub trials: usize,
    /// `(k, n)` cells.
    pub grid: Vec<(usize, usize)>,
}

impl Default for LabParams {
    fn default() -> Self {
        Self {
            trials: kkmeans::rademacher::DEFAULT_TRIALS,
            grid: vec![(2, 4), (2, 8), (4, 8)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub n_values: Vec<usize>,
    pub k_values: Vec<usize>,
    pub reps: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_blobs")]
    pub blobs: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default = "default_benchmark_seed")]
    pub benchmark_seed: u64,
    #[serde(default = "default_restarts")]
    pub erm_restarts: usize,
    #[serde(default = "default_restarts")]
    pub nystrom_restarts: usize,
}

fn default_methods() -> Vec<String> {
    kkmeans::risk::Method::ALL
        .iter()
        .map(|m| m.name().to_string())
        .collect()
}

fn default_blobs() -> usize {
    2
}

fn default_spread() -> f64 {
    kkmeans::risk::BENCHMARK_BLOB_SPREAD
}

fn default_benchmark_seed() -> u64 {
    7
}

fn default_restarts() -> usize {
    kkmeans::risk::ERM_RESTARTS
}

impl ExperimentConfig {
    /// Parses and validates; relative data paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(csv) = cfg.data.as_mut().and_then(|d| d.csv.as_mut()) {
            if csv.is_relative() {
                *csv = base.join(&*csv);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(d) = &self.data {
            let given = [d.points.is_some(), d.csv.is_some(), d.generator.is_some()]
                .iter()
                .filter(|&&b| b)
                .count();
            if given != 1 {
                return Err(CliError::Config(
                    "[data] needs exactly one of points, csv, generator".into(),
                ));
            }
            if let Some(csv) = &d.csv {
                if !csv.is_file() {
                    return Err(CliError::Config(format!("data file not found: {}", csv.display())));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.n_values.is_empty() || s.k_values.is_empty() || s.methods.is_empty() {
                return Err(CliError::Config("[sweep] grids must be nonempty".into()));
            }
            if s.reps == 0 {
                return Err(CliError::Config("[sweep] reps must be >= 1".into()));
            }
        }
        if self.lab.grid.is_empty() {
            return Err(CliError::Config("[lab] grid must be nonempty".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be >= 1".into()));
        }
        Ok(())
    }
}

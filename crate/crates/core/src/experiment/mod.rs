//! Named experiments driven by a TOML config, with CSV and JSON artifacts.
//!
//! ```no_run
//! use lsv_evl::experiment::{run_experiment, ExperimentConfig, ExperimentKind};
//!
//! let config = ExperimentConfig::for_kind(ExperimentKind::Calibrate);
//! let report = run_experiment(&config).unwrap();
//! assert!(report.pass);
//! ```

mod config;
mod output;
mod pipelines;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    ensure_valid, validate_config, Diagnostic, ExperimentConfig, ExperimentKind, RecurrenceConfig, ScheduleConfig,
    Severity,
};
pub use output::{write_artifacts, write_results_csv};

use crate::error::{Error, Result};

/// One measured quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub quantity: String,
    pub n: Option<usize>,
    pub tau: Option<f64>,
    /// Secondary coordinate: a time index, a radius, a gap length.
    pub x: Option<f64>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub target: Option<f64>,
    pub pass: Option<bool>,
}

/// A pass/fail verdict and where its target comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub source: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub wall_seconds: f64,
    pub samples: u64,
    pub samples_per_second: f64,
    pub workers: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// `<kind>-<config digest>`.
    pub id: String,
    pub kind: ExperimentKind,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<Diagnostic>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<ResultRow>,
    /// Extra CSV files as `(file name, contents)`.
    #[serde(skip)]
    pub artifacts: Vec<(String, String)>,
    #[serde(skip)]
    pub metrics: Metrics,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Runs the experiment without touching the file system beyond the cache.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let diagnostics = ensure_valid(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    let start = Instant::now();
    let outcome = pool.install(|| pipelines::run(config))?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let pass = outcome.checks.iter().all(|c| c.pass);
    Ok(ExperimentReport {
        id: format!("{}-{}", config.kind, config.digest()?),
        kind: config.kind,
        pass,
        checks: outcome.checks,
        diagnostics,
        notes: outcome.notes,
        rows: outcome.rows,
        artifacts: outcome.artifacts,
        metrics: Metrics {
            wall_seconds,
            samples: outcome.samples,
            samples_per_second: outcome.samples as f64 / wall_seconds.max(1e-9),
            workers: pool.current_num_threads(),
        },
        output_dir: None,
    })
}

/// Runs the experiment and writes its artifacts under
/// `<out>/<kind>-<digest>/`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = execute(config)?;
    let dir = config.out.join(&report.id);
    write_artifacts(&report, config, &dir)?;
    report.output_dir = Some(dir);
    Ok(report)
}

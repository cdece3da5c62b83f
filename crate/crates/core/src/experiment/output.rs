use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ExperimentConfig, ExperimentReport, ResultRow};
use crate::error::Result;

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `experiment,quantity,n,tau,x,estimate,se,target,pass`; empty fields for
/// values that do not apply.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["experiment", "quantity", "n", "tau", "x", "estimate", "se", "target", "pass"])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.quantity.clone(),
            opt(r.n),
            opt(r.tau),
            opt(r.x),
            r.estimate.to_string(),
            opt(r.se),
            opt(r.target),
            opt(r.pass),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `config.toml`, `results.csv`, `summary.json`, `metrics.json` and
/// the experiment's extra CSV files into `dir`.
///
/// Everything except `metrics.json` depends only on the config.
pub fn write_artifacts(report: &ExperimentReport, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let snapshot = ExperimentConfig {
        workers: None,
        ..config.clone()
    };
    fs::write(dir.join("config.toml"), snapshot.to_toml()?)?;

    let mut csv = Vec::new();
    write_results_csv(&report.rows, &mut csv)?;
    fs::write(dir.join("results.csv"), csv)?;

    let summary = serde_json::json!({
        "report": report,
        "config": snapshot.resolved(),
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&report.metrics)? + "\n",
    )?;
    for (name, contents) in &report.artifacts {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

//! Validates and runs an experiment described in TOML, writing its
//! artifacts into a temporary directory.

use lsv_evl::experiment::{run_experiment, validate_config, ExperimentConfig};

const CONFIG: &str = r#"
kind = "calibrate"
seed = 42
n = [200]
taus = [0.5, 1.0]
samples = 20000

[schedule]
mode = "periodic"
alphas = [0.05, 0.1]

[mesh]
cells = 512
grading = "geometric"
ratio = 0.97
min_width = 1e-8
"#;

fn main() -> lsv_evl::Result<()> {
    let mut config = ExperimentConfig::from_toml(CONFIG)?;
    config.out = std::env::temp_dir().join("lsv-evl-example");
    config.cache_dir = Some(config.out.join("cache"));

    for d in validate_config(&config) {
        println!("{d}");
    }
    let report = run_experiment(&config)?;
    for c in &report.checks {
        println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.source);
    }
    println!("artifacts in {}", report.output_dir.expect("written").display());
    Ok(())
}

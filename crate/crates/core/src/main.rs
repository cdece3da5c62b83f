use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsv_evl::experiment::{run_experiment, validate_config, ExperimentConfig, ExperimentKind};
use lsv_evl::mesh::MeshSpec;

#[derive(Parser)]
#[command(name = "lsv-evl", version, about = "Extreme value experiments for sequential LSV maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate P_n against exp(-tau) along an n-ladder.
    Evl(Common),
    /// Calibrate exceedance radii and check them by simulation.
    Calibrate(Common),
    /// Within-block pair sums along an n-ladder.
    Dprime(Common),
    /// Mixing gap at two separations.
    D0(Common),
    /// L1 distance between two pushed densities.
    Decay(Common),
    /// Measures of fast-returning sets.
    Recurrence(Common),
    /// A single sequential orbit.
    Orbit(Common),
    /// Print config diagnostics without running anything.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Number of base mesh cells.
    #[arg(long)]
    mesh: Option<usize>,
    /// Skip the on-disk matrix and ladder cache.
    #[arg(long)]
    no_cache: bool,
}

impl Common {
    fn load(&self, kind: Option<ExperimentKind>) -> lsv_evl::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(kind) = kind {
            config.kind = kind;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if self.workers.is_some() {
            config.workers = self.workers;
        }
        if let Some(cells) = self.mesh {
            config.mesh = Some(MeshSpec {
                cells,
                ..config.mesh_spec()
            });
        }
        if self.no_cache {
            config.cache_dir = None;
        } else if config.cache_dir.is_none() {
            config.cache_dir = Some(config.out.join("cache"));
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> lsv_evl::Result<bool> {
    let (kind, common) = match &cli.command {
        Command::Evl(c) => (ExperimentKind::Evl, c),
        Command::Calibrate(c) => (ExperimentKind::Calibrate, c),
        Command::Dprime(c) => (ExperimentKind::Dprime, c),
        Command::D0(c) => (ExperimentKind::D0, c),
        Command::Decay(c) => (ExperimentKind::Decay, c),
        Command::Recurrence(c) => (ExperimentKind::Recurrence, c),
        Command::Orbit(c) => (ExperimentKind::Orbit, c),
        Command::Validate(c) => {
            let config = c.load(None)?;
            let diagnostics = validate_config(&config);
            for d in &diagnostics {
                println!("{d}");
            }
            if diagnostics.is_empty() {
                println!("ok: no diagnostics");
            }
            if diagnostics.iter().any(|d| d.is_error()) {
                return Err(lsv_evl::Error::Config("config has hard errors".into()));
            }
            return Ok(true);
        }
    };
    let config = common.load(Some(kind))?;
    let report = run_experiment(&config)?;
    for d in &report.diagnostics {
        eprintln!("{d}");
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = &report.output_dir {
        println!("wrote {}", dir.display());
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{ParameterSchedule, ScheduleMode};
use crate::mesh::{Grading, MeshSpec};
use crate::montecarlo::{exponent_ledger, Exponents};
use crate::thresholds::{Observable, ObservableForm};
use crate::transfer::{PushMethod, DEFAULT_CONE_A};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Evl,
    Calibrate,
    Dprime,
    D0,
    Decay,
    Recurrence,
    Orbit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Evl,
        ExperimentKind::Calibrate,
        ExperimentKind::Dprime,
        ExperimentKind::D0,
        ExperimentKind::Decay,
        ExperimentKind::Recurrence,
        ExperimentKind::Orbit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Evl => "evl",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Dprime => "dprime",
            ExperimentKind::D0 => "d0",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Recurrence => "recurrence",
            ExperimentKind::Orbit => "orbit",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Exponent schedule as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    #[serde(flatten)]
    pub mode: ScheduleMode,
    #[serde(default = "default_alpha_star")]
    pub alpha_star: f64,
    /// Seed of the exponent stream for `iid-uniform`.
    #[serde(default = "default_schedule_seed")]
    pub seed: u64,
}

fn default_alpha_star() -> f64 {
    1.0 / 7.0
}

fn default_schedule_seed() -> u64 {
    7
}

impl ScheduleConfig {
    pub fn constant(alpha: f64) -> Self {
        ScheduleConfig {
            mode: ScheduleMode::Constant { alpha },
            alpha_star: default_alpha_star(),
            seed: default_schedule_seed(),
        }
    }

    pub fn iid_uniform(lo: f64, hi: f64) -> Self {
        ScheduleConfig {
            mode: ScheduleMode::IidUniform { lo, hi },
            alpha_star: default_alpha_star(),
            seed: default_schedule_seed(),
        }
    }

    pub fn build(&self) -> Result<ParameterSchedule> {
        ParameterSchedule::new(self.mode.clone(), self.alpha_star, self.seed)
    }

    fn listed_alphas(&self) -> Vec<f64> {
        match &self.mode {
            ScheduleMode::Constant { alpha } => vec![*alpha],
            ScheduleMode::Periodic { alphas } | ScheduleMode::ExplicitList { alphas } => alphas.clone(),
            ScheduleMode::IidUniform { lo, hi } => vec![*lo, *hi],
        }
    }
}

/// Settings of the recurrence experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurrenceConfig {
    pub beta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub gamma: f64,
    pub local_check: bool,
    /// Grid strata for `E_n(eps)`.
    pub resolution: usize,
    /// `eps = 2^-k` for these `k`.
    pub eps_exponents: Vec<i32>,
    /// Grid cells for `E_j` and the local estimate.
    pub ej_resolution: usize,
    /// `j = 2^k` for these `k`.
    pub j_exponents: Vec<u32>,
    pub local_j: Vec<usize>,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        RecurrenceConfig {
            beta: 0.3,
            kappa: 0.2,
            xi: 0.05,
            gamma: 3.0,
            local_check: true,
            resolution: 1 << 14,
            eps_exponents: (4..=14).collect(),
            ej_resolution: 1 << 18,
            j_exponents: (5..=12).collect(),
            local_j: vec![8, 16, 32],
        }
    }
}

/// A full experiment description. Fields left out of a config file take
/// the defaults below; `None` fields resolve per experiment kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Seed of the Monte Carlo streams.
    pub seed: u64,
    pub out: PathBuf,
    /// Directory of the matrix and ladder cache; `None` disables it.
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub schedule: Option<ScheduleConfig>,
    pub observable: Observable,
    pub taus: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub samples: Option<u64>,
    pub mesh: Option<MeshSpec>,
    pub method: PushMethod,
    pub cone_a: f64,
    pub exponents: Exponents,
    pub recurrence: RecurrenceConfig,
    /// Allowed `|P_n - e^-tau|` for `evl`.
    pub evl_tolerance: f64,
    /// Exceedance times checked by `calibrate`.
    pub calibrate_indices: usize,
    /// `t = n^e` for the two gaps compared by `d0`.
    pub d0_gap_exponents: [f64; 2],
    /// Left end of the flat part of the second `decay` input.
    pub decay_step: f64,
    /// Starting point of `orbit`.
    pub orbit_start: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::default(),
            seed: 11,
            out: PathBuf::from("out"),
            cache_dir: None,
            workers: None,
            schedule: None,
            observable: Observable {
                zeta: std::f64::consts::FRAC_1_SQRT_2,
                form: ObservableForm::Log,
            },
            taus: None,
            n: None,
            samples: None,
            mesh: None,
            method: PushMethod::Auto,
            cone_a: DEFAULT_CONE_A,
            exponents: Exponents::default(),
            recurrence: RecurrenceConfig::default(),
            evl_tolerance: 0.05,
            calibrate_indices: 20,
            d0_gap_exponents: [0.4, 0.8],
            decay_step: 0.5,
            orbit_start: std::f64::consts::FRAC_1_SQRT_2,
        }
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Every field, defaults resolved, as TOML.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.resolved())?)
    }

    /// Copy with every per-kind default filled in.
    pub fn resolved(&self) -> ExperimentConfig {
        ExperimentConfig {
            schedule: Some(self.schedule_config()),
            taus: Some(self.taus()),
            n: Some(self.n_values()),
            samples: Some(self.samples()),
            mesh: Some(self.mesh_spec()),
            ..self.clone()
        }
    }

    pub fn schedule_config(&self) -> ScheduleConfig {
        self.schedule.clone().unwrap_or_else(|| match self.kind {
            ExperimentKind::Evl => ScheduleConfig::iid_uniform(0.01, 0.14),
            _ => ScheduleConfig::constant(0.1),
        })
    }

    pub fn taus(&self) -> Vec<f64> {
        self.taus.clone().unwrap_or_else(|| match self.kind {
            ExperimentKind::Evl => vec![0.5, 1.0, 2.0],
            _ => vec![1.0],
        })
    }

    pub fn n_values(&self) -> Vec<usize> {
        self.n.clone().unwrap_or_else(|| match self.kind {
            ExperimentKind::Evl | ExperimentKind::Dprime => vec![250, 500, 1000, 2000],
            ExperimentKind::Calibrate => vec![500],
            ExperimentKind::D0 => vec![1000],
            ExperimentKind::Decay => (6..=12).map(|k| 1usize << k).collect(),
            ExperimentKind::Recurrence => vec![1, 5, 20],
            ExperimentKind::Orbit => vec![200],
        })
    }

    pub fn samples(&self) -> u64 {
        self.samples.unwrap_or(match self.kind {
            ExperimentKind::Orbit | ExperimentKind::Decay | ExperimentKind::Recurrence => 0,
            _ => 100_000,
        })
    }

    /// `decay` resolves the density tail far below the other experiments.
    pub fn mesh_spec(&self) -> MeshSpec {
        self.mesh.clone().unwrap_or_else(|| match self.kind {
            ExperimentKind::Decay => MeshSpec {
                grading: Grading::Geometric {
                    ratio: 0.97,
                    min_width: 1e-40,
                },
                ..MeshSpec::default()
            },
            _ => MeshSpec::default(),
        })
    }

    /// Short digest of the resolved config without output and worker
    /// settings; names the output directory.
    pub fn digest(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let canonical = ExperimentConfig {
            out: PathBuf::new(),
            cache_dir: None,
            workers: None,
            ..self.resolved()
        };
        let text = toml::to_string(&canonical)?;
        let hash = Sha256::digest(text.as_bytes());
        Ok(hash[..6].iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &str, message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code: code.into(),
            message,
        }
    }

    fn warning(code: &str, message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code: code.into(),
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}[{}]: {}", self.code, self.message)
    }
}

/// True when `x` is `k / 2^m` for some `m <= 52`.
fn is_dyadic(x: f64) -> bool {
    let scaled = x * (1u64 << 52) as f64;
    scaled.fract() == 0.0
}

/// Hard errors for exponents at or above the cap and other unusable values;
/// warnings for violated exponent inequalities and dyadic reference points.
///
/// The inequalities are evaluated at the largest exponent the schedule can
/// produce.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let sc = config.schedule_config();
    if !(sc.alpha_star > 0.0 && sc.alpha_star < 1.0) {
        out.push(Diagnostic::error(
            "alpha-star",
            format!("alpha_star = {} outside (0, 1)", sc.alpha_star),
        ));
    }
    for a in sc.listed_alphas() {
        if !(a >= 0.0) || a >= sc.alpha_star {
            out.push(Diagnostic::error(
                "alpha-cap",
                format!("alpha = {a} is not in [0, alpha_star = {})", sc.alpha_star),
            ));
        }
    }
    if let ScheduleMode::IidUniform { lo, hi } = sc.mode {
        if !(lo < hi) {
            out.push(Diagnostic::error("alpha-range", format!("iid range [{lo}, {hi}] is empty")));
        }
    }
    if let Err(e) = sc.build() {
        if !out.iter().any(Diagnostic::is_error) {
            out.push(Diagnostic::error("schedule", e.to_string()));
        }
    }

    let zeta = config.observable.zeta;
    if let Err(e) = Observable::new(zeta, config.observable.form) {
        out.push(Diagnostic::error("observable", e.to_string()));
    } else if is_dyadic(zeta) {
        out.push(Diagnostic::warning(
            "zeta-dyadic",
            format!("zeta = {zeta} is dyadic; its orbit under the right branch is eventually fixed"),
        ));
    }
    if config.taus().iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        out.push(Diagnostic::error("tau", "every tau must be finite and nonnegative".into()));
    }
    if config.n_values().is_empty() || config.n_values().contains(&0) {
        out.push(Diagnostic::error("n", "n values must be positive".into()));
    }
    if config.workers == Some(0) {
        out.push(Diagnostic::error("workers", "worker count must be positive".into()));
    }
    if let Err(e) = config.mesh_spec().build() {
        out.push(Diagnostic::error("mesh", e.to_string()));
    }

    let alpha = sc.build().map(|s| s.alpha_max()).unwrap_or(sc.alpha_star);
    for check in exponent_ledger(alpha, &config.exponents) {
        if !check.satisfied {
            out.push(Diagnostic::warning(
                check.name,
                format!(
                    "violates \"{}\" at alpha = {alpha} (lhs {:.6}, rhs {:.6})",
                    check.statement, check.lhs, check.rhs
                ),
            ));
        }
    }
    out
}

/// Fails with [`Error::Config`] listing every hard error.
pub fn ensure_valid(config: &ExperimentConfig) -> Result<Vec<Diagnostic>> {
    let diagnostics = validate_config(config);
    let errors: Vec<String> = diagnostics.iter().filter(|d| d.is_error()).map(|d| d.to_string()).collect();
    if errors.is_empty() {
        Ok(diagnostics)
    } else {
        Err(Error::Config(errors.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_toml_takes_defaults() {
        let c = ExperimentConfig::from_toml("kind = \"calibrate\"").unwrap();
        assert_eq!(c, ExperimentConfig::for_kind(ExperimentKind::Calibrate));
        assert_eq!(c.n_values(), vec![500]);
        assert!(validate_config(&c).is_empty());
    }

    #[test]
    fn resolved_config_round_trips() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::for_kind(kind);
            let text = c.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, c.resolved(), "{kind}");
            assert_eq!(back.digest().unwrap(), c.digest().unwrap());
        }
    }

    #[test]
    fn schedule_section_parses() {
        let c = ExperimentConfig::from_toml(
            "kind = \"evl\"\n[schedule]\nmode = \"periodic\"\nalphas = [0.05, 0.1]\n[observable]\nzeta = 0.3\nform = \"power-pole\"\na_obs = 2.0\n",
        )
        .unwrap();
        assert_eq!(c.schedule_config().mode, ScheduleMode::Periodic { alphas: vec![0.05, 0.1] });
        assert_eq!(c.observable.form, ObservableForm::PowerPole { a_obs: 2.0 });
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(ExperimentConfig::from_toml("kind = \"evl\"\nsamplez = 3").is_err());
    }

    #[test]
    fn exponent_at_cap_is_a_hard_error() {
        let c = ExperimentConfig {
            schedule: Some(ScheduleConfig::constant(0.2)),
            ..ExperimentConfig::for_kind(ExperimentKind::Calibrate)
        };
        let d = validate_config(&c);
        assert!(d.iter().any(|x| x.is_error() && x.code == "alpha-cap"));
        assert!(ensure_valid(&c).is_err());
    }

    #[test]
    fn kappa_above_beta_warns() {
        let c = ExperimentConfig {
            exponents: Exponents {
                beta: 0.5,
                kappa: 0.85,
                ..Exponents::default()
            },
            ..ExperimentConfig::for_kind(ExperimentKind::Calibrate)
        };
        let d = validate_config(&c);
        let w = d.iter().find(|x| x.code == "kappa-below-beta").unwrap();
        assert_eq!(w.severity, Severity::Warning);
        assert!(w.message.contains("0<κ<β"));
        assert!(ensure_valid(&c).is_ok());
    }

    #[test]
    fn dyadic_zeta_warns() {
        let mut c = ExperimentConfig::for_kind(ExperimentKind::Calibrate);
        c.observable.zeta = 0.375;
        assert!(validate_config(&c).iter().any(|d| d.code == "zeta-dyadic"));
    }
}

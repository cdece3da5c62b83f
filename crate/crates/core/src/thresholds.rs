//! Observables `phi(x) = g(|x - zeta|)` and time-dependent exceedance levels
//! calibrated so that each `X_i = phi o T_i` exceeds its level with
//! probability `tau / n`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{ParameterSchedule, Point};
use crate::mesh::{Density, Mesh};
use crate::transfer::{push_density, ConeParams, PushMethod};

/// Decreasing profile `g` of an observable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum ObservableForm {
    /// `g(d) = -ln d`.
    Log,
    /// `g(d) = d^(-1/a_obs)`.
    PowerPole { a_obs: f64 },
    /// `g(d) = cap - d^(1/a_obs)`.
    PowerCap { a_obs: f64, cap: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub zeta: f64,
    #[serde(flatten)]
    pub form: ObservableForm,
}

impl Observable {
    pub fn new(zeta: f64, form: ObservableForm) -> Result<Self> {
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::InvalidArgument(format!("zeta {zeta} outside (0, 1]")));
        }
        match form {
            ObservableForm::PowerPole { a_obs } | ObservableForm::PowerCap { a_obs, .. } if !(a_obs > 0.0) => {
                Err(Error::InvalidArgument(format!("shape parameter {a_obs} must be positive")))
            }
            _ => Ok(Observable { zeta, form }),
        }
    }

    pub fn log(zeta: f64) -> Result<Self> {
        Observable::new(zeta, ObservableForm::Log)
    }

    /// `g(d)`; `+inf` at `d = 0` for the unbounded forms.
    pub fn g(&self, d: f64) -> f64 {
        match self.form {
            ObservableForm::Log => -d.ln(),
            ObservableForm::PowerPole { a_obs } => d.powf(-1.0 / a_obs),
            ObservableForm::PowerCap { a_obs, cap } => cap - d.powf(1.0 / a_obs),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.g((x - self.zeta).abs())
    }
}

/// `phi(x)` for a validated point.
pub fn observable_eval(obs: &Observable, x: Point) -> f64 {
    obs.eval(x.get())
}

/// Radius `delta` with `int_{|x - zeta| < delta} density dm = tau / n`.
///
/// The window is clipped to `[0, 1]`; bisection stops at relative width
/// `1e-14`.
pub fn calibrate_delta(density: &Density, zeta: f64, tau: f64, n: usize) -> Result<f64> {
    if !(tau >= 0.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("need tau >= 0 and n >= 1, got {tau}, {n}")));
    }
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidArgument(format!("zeta {zeta} outside [0, 1]")));
    }
    let target = tau / n as f64;
    if target > 1.0 {
        return Err(Error::InvalidArgument(format!("tau / n = {target} exceeds 1")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let mass = |d: f64| density.interval_mass((zeta - d).max(0.0), (zeta + d).min(1.0));
    let mut hi = zeta.max(1.0 - zeta);
    let available = mass(hi);
    if available < target {
        return Err(Error::Infeasible { target, available });
    }
    let mut lo = 0.0;
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrated radii and levels for one `(tau, n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub tau: f64,
    pub n: usize,
    pub observable: Observable,
    pub deltas: Vec<f64>,
    pub levels: Vec<f64>,
    /// `m(X_i > u_{n,i})` under the density used for calibration.
    pub masses: Vec<f64>,
    pub fbar_max: f64,
    pub fstar_n: f64,
    /// `[tau / (2 C' n), tau / (2 c n)]`, when cone constants were supplied.
    pub window: Option<(f64, f64)>,
    pub in_window: Vec<bool>,
}

impl ThresholdSchedule {
    /// Calibrates against `ladder[i] = Pi_i(1)` for `i < n`.
    pub fn from_ladder(ladder: &[Density], obs: &Observable, tau: f64, n: usize, cone: Option<&ConeParams>) -> Result<Self> {
        if ladder.len() < n {
            return Err(Error::InvalidArgument(format!(
                "density ladder has {} entries, {n} needed",
                ladder.len()
            )));
        }
        let zeta = obs.zeta;
        let deltas = ladder[..n]
            .par_iter()
            .map(|d| calibrate_delta(d, zeta, tau, n))
            .collect::<Result<Vec<f64>>>()?;
        let masses: Vec<f64> = ladder[..n]
            .iter()
            .zip(&deltas)
            .map(|(d, &r)| d.interval_mass((zeta - r).max(0.0), (zeta + r).min(1.0)))
            .collect();
        let levels = deltas.iter().map(|&d| obs.g(d)).collect();
        let window = cone.map(|p| {
            let c_prime = p.a * zeta.powf(-p.alpha);
            (tau / (2.0 * c_prime * n as f64), tau / (2.0 * p.c_lower * n as f64))
        });
        let in_window = match window {
            Some((lo, hi)) => deltas.iter().map(|&d| lo <= d && d <= hi).collect(),
            None => Vec::new(),
        };
        Ok(ThresholdSchedule {
            tau,
            n,
            observable: *obs,
            fbar_max: masses.iter().cloned().fold(0.0, f64::max),
            fstar_n: masses.iter().sum(),
            deltas,
            levels,
            masses,
            window,
            in_window,
        })
    }

    /// `X_i > u_{n,i}`, tested as `|x - zeta| < delta_{n,i}`.
    #[inline]
    pub fn exceeds(&self, i: usize, x: f64) -> bool {
        (x - self.observable.zeta).abs() < self.deltas[i]
    }

    pub fn all_in_window(&self) -> bool {
        self.window.is_some() && self.in_window.iter().all(|&b| b)
    }

    /// Writes `i,delta,level,mass[,measured]` rows.
    pub fn write_csv<W: Write>(&self, measured: Option<&[Option<f64>]>, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "delta", "level", "mass", "measured_exceedance"])?;
        for i in 0..self.n {
            let m = measured
                .and_then(|m| m.get(i).copied().flatten())
                .map(|v| format!("{v:e}"))
                .unwrap_or_default();
            w.write_record([
                i.to_string(),
                format!("{:e}", self.deltas[i]),
                format!("{:e}", self.levels[i]),
                format!("{:e}", self.masses[i]),
                m,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(Pi_0(1), ..., Pi_{n-1}(1))` on `mesh`.
pub fn density_ladder(schedule: &ParameterSchedule, mesh: &Arc<Mesh>, n: usize, method: PushMethod) -> Result<Vec<Density>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    push_density(schedule, &Density::uniform(mesh.clone()), n - 1, method)
}

/// Pushes the unit density and calibrates every level for `(tau, n)`.
pub fn build_threshold_schedule(
    schedule: &ParameterSchedule,
    obs: &Observable,
    tau: f64,
    n: usize,
    mesh: &Arc<Mesh>,
    cone: Option<&ConeParams>,
) -> Result<ThresholdSchedule> {
    let ladder = density_ladder(schedule, mesh, n, PushMethod::Auto)?;
    ThresholdSchedule::from_ladder(&ladder, obs, tau, n, cone)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CellFunction, MeshSpec};

    #[test]
    fn observable_forms() {
        let log = Observable::log(0.5).unwrap();
        assert_eq!(log.eval(0.5), f64::INFINITY);
        assert!((log.g((-1f64).exp()) - 1.0).abs() < 1e-15);
        let cap = Observable::new(0.5, ObservableForm::PowerCap { a_obs: 1.0, cap: 1.0 }).unwrap();
        assert_eq!(cap.eval(0.75), 0.75);
        let pole = Observable::new(0.5, ObservableForm::PowerPole { a_obs: 2.0 }).unwrap();
        assert!((pole.g(0.25) - 2.0).abs() < 1e-15);
        assert!(Observable::log(0.0).is_err());
        assert!(Observable::new(0.5, ObservableForm::PowerPole { a_obs: 0.0 }).is_err());
    }

    #[test]
    fn uniform_density_radius() {
        let d = Density::uniform(MeshSpec::default().build().unwrap());
        let r = calibrate_delta(&d, 1.0 / 2f64.sqrt(), 1.0, 100).unwrap();
        assert!((r - 0.005).abs() <= 1e-12);
        assert_eq!(calibrate_delta(&d, 0.3, 0.0, 100).unwrap(), 0.0);
    }

    #[test]
    fn step_density_radius() {
        let mesh = Mesh::uniform(2).unwrap();
        let d = Density::new(CellFunction::new(mesh, vec![2.0, 0.0]).unwrap()).unwrap();
        let r = calibrate_delta(&d, 0.25, 1.0, 100).unwrap();
        assert!((r - 1.0 / 400.0).abs() <= 1e-15);
    }

    #[test]
    fn clipped_window_accounts_one_side() {
        let d = Density::uniform(Mesh::uniform(8).unwrap());
        // only [0, delta) is available when zeta = 0
        let r = calibrate_delta(&d, 0.0, 1.0, 10).unwrap();
        assert!((r - 0.1).abs() < 1e-14);
    }

    #[test]
    fn infeasible_target() {
        let mesh = Mesh::uniform(2).unwrap();
        let d = Density::new(CellFunction::new(mesh, vec![0.1, 0.1]).unwrap()).unwrap();
        assert!(matches!(calibrate_delta(&d, 0.5, 1.0, 2), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn zero_tau_schedule() {
        let mesh = MeshSpec::default().build().unwrap();
        let s = ParameterSchedule::constant(0.1).unwrap();
        let ts = build_threshold_schedule(&s, &Observable::log(0.7).unwrap(), 0.0, 20, &mesh, None).unwrap();
        assert_eq!(ts.fstar_n, 0.0);
        assert!(ts.levels.iter().all(|&u| u == f64::INFINITY));
        assert!(!ts.exceeds(3, 0.7));
    }

    #[test]
    fn schedule_sums_to_tau() {
        let mesh = MeshSpec::default().build().unwrap();
        let s = ParameterSchedule::constant(0.1).unwrap();
        let ts = build_threshold_schedule(&s, &Observable::log(0.7).unwrap(), 1.0, 50, &mesh, None).unwrap();
        assert!((ts.fstar_n - 1.0).abs() < 1e-12);
        assert!((ts.fbar_max - 0.02).abs() < 1e-13);
        let mut buf = Vec::new();
        ts.write_csv(None, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 51);
    }
}

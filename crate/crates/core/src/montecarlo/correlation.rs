//! Correlations `int phi o T_i psi o T_{i+t} dm - int phi o T_i dm int psi o T_{i+t} dm`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fold_samples;
use crate::error::{Error, Result};
use crate::maps::ParameterSchedule;
use crate::mesh::{gauss8, CellFunction, Mesh};
use crate::rng::RngSpec;
use crate::stats::EstimateWithCi;
use crate::transfer::{PushMethod, Pusher};

/// A bounded observable that can be integrated over mesh cells.
pub trait TestFunction: Sync {
    fn eval(&self, x: f64) -> f64;

    /// `int_a^b f dm`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        gauss8(&|x| self.eval(x), a, b)
    }

    fn sup_norm(&self) -> f64;

    fn constant_value(&self) -> Option<f64> {
        None
    }
}

/// Indicator of the open interval `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub lo: f64,
    pub hi: f64,
}

impl Indicator {
    pub fn ball(center: f64, radius: f64) -> Self {
        Indicator {
            lo: center - radius,
            hi: center + radius,
        }
    }
}

impl TestFunction for Indicator {
    fn eval(&self, x: f64) -> f64 {
        if x > self.lo && x < self.hi {
            1.0
        } else {
            0.0
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        (b.min(self.hi) - a.max(self.lo)).max(0.0)
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantFn(pub f64);

impl TestFunction for ConstantFn {
    fn eval(&self, _: f64) -> f64 {
        self.0
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        self.0 * (b - a)
    }

    fn sup_norm(&self) -> f64 {
        self.0.abs()
    }

    fn constant_value(&self) -> Option<f64> {
        Some(self.0)
    }
}

/// A smooth closure with a known bound on `|f|`.
pub struct SmoothFn<F> {
    pub f: F,
    pub sup: f64,
}

impl<F: Fn(f64) -> f64 + Sync> TestFunction for SmoothFn<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn sup_norm(&self) -> f64 {
        self.sup
    }
}

fn cell_integrals(mesh: &Mesh, f: &dyn TestFunction) -> Vec<f64> {
    (0..mesh.len())
        .map(|k| f.integral(mesh.left(k), mesh.left(k + 1)))
        .collect()
}

/// Correlation by transfer operators: `int psi P_{i+t} ... P_{i+1}(Pi_i(1) phi~) dm`
/// with `phi~` centered against `Pi_i(1)`.
pub fn correlation_dc(
    schedule: &ParameterSchedule,
    phi: &dyn TestFunction,
    psi: &dyn TestFunction,
    i: usize,
    t: usize,
    mesh: &Arc<Mesh>,
    method: PushMethod,
) -> Result<f64> {
    if phi.constant_value().is_some() || psi.constant_value().is_some() {
        return Ok(0.0);
    }
    let mut base = Pusher::new(schedule, CellFunction::constant(mesh.clone(), 1.0), method);
    while base.step() < i {
        base.advance()?;
    }
    let rho = base.current().values().to_vec();
    let phi_cells = cell_integrals(mesh, phi);
    let mean: f64 = rho.iter().zip(&phi_cells).map(|(r, p)| r * p).sum();
    let start: Vec<f64> = (0..mesh.len())
        .map(|k| rho[k] * (phi_cells[k] / mesh.width(k) - mean))
        .collect();
    let mut pusher = Pusher::new(schedule, CellFunction::new(mesh.clone(), start)?, method)
        .with_cache(base.into_cache())
        .starting_at(i);
    while pusher.step() < i + t {
        pusher.advance()?;
    }
    Ok(pusher.current().pair_with_cell_integrals(&cell_integrals(mesh, psi)))
}

/// Sample covariance of `phi(x_i)` and `psi(x_{i+t})` over Lebesgue initial points.
pub fn correlation_dc_mc(
    schedule: &ParameterSchedule,
    phi: &dyn TestFunction,
    psi: &dyn TestFunction,
    i: usize,
    t: usize,
    rng: &RngSpec,
    samples: u64,
) -> Result<EstimateWithCi> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let maps = schedule.maps(i + t)?;
    // sums of a, b, ab, a^2, b^2, a^2 b, a b^2, a^2 b^2
    let s = fold_samples(
        samples,
        || [0.0f64; 8],
        |mut acc, smp| {
            let mut x = rng.initial_point(smp);
            for map in &maps[..i] {
                x = map.apply(x);
            }
            let a = phi.eval(x);
            for map in &maps[i..] {
                x = map.apply(x);
            }
            let b = psi.eval(x);
            let terms = [a, b, a * b, a * a, b * b, a * a * b, a * b * b, a * a * b * b];
            acc.iter_mut().zip(terms).for_each(|(s, v)| *s += v);
            acc
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    let nf = samples as f64;
    let m: Vec<f64> = s.iter().map(|v| v / nf).collect();
    let (ma, mb) = (m[0], m[1]);
    let cov = m[2] - ma * mb;
    let fourth = m[7] - 2.0 * mb * m[5] - 2.0 * ma * m[6] + mb * mb * m[3] + ma * ma * m[4]
        + 4.0 * ma * mb * m[2]
        - 3.0 * ma * ma * mb * mb;
    let se = ((fourth - cov * cov).max(0.0) / nf).sqrt();
    Ok(EstimateWithCi::normal(cov, se, samples))
}

/// Collar width `n^-(1+eta)`.
pub fn dc_delta(n: usize, eta: f64) -> f64 {
    (n as f64).powf(-(1.0 + eta))
}

/// `(2 delta + C* t^(1 - 1/a) (ln t)^(1/a) / delta) ||psi||_inf` with a fitted `C*`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcBound {
    pub c_star: f64,
    pub alpha_star: f64,
}

impl DcBound {
    fn rate(&self, t: usize) -> f64 {
        let t = t as f64;
        t.powf(1.0 - 1.0 / self.alpha_star) * t.ln().powf(1.0 / self.alpha_star)
    }

    /// Smallest `C*` for which every sample `(delta, t, |DC| / ||psi||)` with
    /// `t >= 2` satisfies the bound.
    pub fn fit(points: &[(f64, usize, f64)], alpha_star: f64) -> Result<Self> {
        let mut bound = DcBound {
            c_star: 0.0,
            alpha_star,
        };
        let mut used = 0;
        for &(delta, t, dc) in points {
            if t < 2 {
                continue;
            }
            used += 1;
            let excess = (dc.abs() - 2.0 * delta).max(0.0);
            bound.c_star = bound.c_star.max(excess * delta / bound.rate(t));
        }
        if used == 0 {
            return Err(Error::InvalidArgument("fit needs a sample with t >= 2".into()));
        }
        Ok(bound)
    }

    pub fn bound(&self, delta: f64, t: usize, sup_psi: f64) -> f64 {
        (2.0 * delta + self.c_star * self.rate(t) / delta) * sup_psi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;

    #[test]
    fn constant_phi_gives_zero() {
        let s = ParameterSchedule::constant(0.1).unwrap();
        let mesh = MeshSpec::default().build().unwrap();
        let psi = Indicator::ball(0.7, 0.01);
        assert_eq!(correlation_dc(&s, &ConstantFn(3.0), &psi, 2, 3, &mesh, PushMethod::Auto).unwrap(), 0.0);
    }

    #[test]
    fn variance_is_nonnegative() {
        let s = ParameterSchedule::constant(0.1).unwrap();
        let mesh = MeshSpec::default().build().unwrap();
        let phi = Indicator::ball(0.7, 0.05);
        let v = correlation_dc(&s, &phi, &phi, 4, 0, &mesh, PushMethod::Auto).unwrap();
        assert!(v > 0.0);
        // variance under Lebesgue is p (1 - p) for a mesh-aligned interval
        let aligned = Indicator { lo: 0.625, hi: 0.75 };
        let v0 = correlation_dc(&s, &aligned, &aligned, 0, 0, &mesh, PushMethod::Auto).unwrap();
        assert!((v0 - 0.125 * 0.875).abs() < 1e-12);
    }

    #[test]
    fn mesh_and_monte_carlo_agree() {
        let s = ParameterSchedule::constant(0.1).unwrap();
        let mesh = MeshSpec::default().build().unwrap();
        let phi = Indicator { lo: 0.2, hi: 0.5 };
        let psi = SmoothFn { f: |x: f64| (5.0 * x).sin(), sup: 1.0 };
        let exact = correlation_dc(&s, &phi, &psi, 2, 1, &mesh, PushMethod::Auto).unwrap();
        let mc = correlation_dc_mc(&s, &phi, &psi, 2, 1, &RngSpec::new(4), 200_000).unwrap();
        assert!((mc.value - exact).abs() <= 4.0 * mc.standard_error + 1e-3, "{exact} {mc:?}");
    }

    #[test]
    fn fitted_bound_covers_its_data() {
        let pts = [(1e-3, 2, 0.05), (1e-3, 3, 0.01), (1e-4, 4, 0.001)];
        let b = DcBound::fit(&pts, 1.0 / 7.0).unwrap();
        for &(d, t, dc) in &pts {
            assert!(dc <= b.bound(d, t, 1.0) * (1.0 + 1e-12));
        }
        assert!(DcBound::fit(&[(1e-3, 1, 0.1)], 0.1).is_err());
    }
}

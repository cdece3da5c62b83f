//! The LSV family of intermittent interval maps
//!
//! ```text
//! T_a(x) = x (1 + 2^a x^a)   for x in [0, 1/2)
//! T_a(x) = 2x - 1            for x in [1/2, 1]
//! ```
//!
//! and sequential compositions `T_n o ... o T_1` driven by a
//! [`ParameterSchedule`]. Every map has a neutral fixed point at 0 and two
//! full increasing branches.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSpec;

/// Default supremum of the exponents in a schedule.
pub const DEFAULT_ALPHA_STAR: f64 = 1.0 / 7.0;

/// Stream id reserved for schedule generation, disjoint from sample streams.
const SCHEDULE_STREAM: u64 = u64::MAX;

const LEFT_INVERSE_MAX_ITER: usize = 200;
const LEFT_INVERSE_ABS_TOL: f64 = 1e-13;

/// A point of the phase space `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Point(f64);

impl Point {
    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Point(x))
        } else {
            Err(Error::Domain(format!("point {x} outside [0, 1]")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Point {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        Point::new(x)
    }
}

impl From<Point> for f64 {
    fn from(p: Point) -> f64 {
        p.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("exponent {alpha} outside (0, 1)")))
    }
}

/// A single LSV map with its constant `2^alpha` precomputed.
///
/// The methods on this type are unchecked; use the free functions for
/// validated evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsvMap {
    alpha: f64,
    two_pow_alpha: f64,
}

impl LsvMap {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(LsvMap {
            alpha,
            two_pow_alpha: 2f64.powf(alpha),
        })
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x < 0.5 {
            x * (1.0 + self.two_pow_alpha * x.powf(self.alpha))
        } else {
            2.0 * x - 1.0
        }
    }

    /// `T(x) - x`, evaluated without cancellation on the left branch.
    #[inline]
    pub fn displacement(&self, x: f64) -> f64 {
        if x < 0.5 {
            self.two_pow_alpha * x * x.powf(self.alpha)
        } else {
            x - 1.0
        }
    }

    /// Derivative; `x = 1/2` belongs to the right branch.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        if x < 0.5 {
            1.0 + self.two_pow_alpha * (1.0 + self.alpha) * x.powf(self.alpha)
        } else {
            2.0
        }
    }

    /// The unique `x` in `[0, 1/2]` with `x (1 + 2^a x^a) = y`.
    ///
    /// Newton from `y/2` safeguarded by the bracket `[0, 1/2]`; falls back
    /// to bisection if Newton has not met the tolerance after 200 steps.
    pub fn left_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 0.5;
        }
        let f = |x: f64| x * (1.0 + self.two_pow_alpha * x.powf(self.alpha)) - y;
        let tol = LEFT_INVERSE_ABS_TOL.min(8.0 * f64::EPSILON * y);
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        let mut x = 0.5 * y;
        for _ in 0..LEFT_INVERSE_MAX_ITER {
            let fx = f(x);
            if fx.abs() <= tol {
                return x;
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = fx / self.derivative(x);
            let next = x - step;
            if step.abs() <= 2.0 * f64::EPSILON * x {
                return next.clamp(lo, hi);
            }
            x = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        while hi - lo > 2.0 * f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[inline]
    pub fn right_inverse(&self, y: f64) -> f64 {
        0.5 * (y + 1.0)
    }
}

/// Evaluates `T_alpha(x)`.
pub fn lsv_apply(alpha: f64, x: Point) -> Result<Point> {
    let map = LsvMap::new(alpha)?;
    Ok(Point(map.apply(x.get()).clamp(0.0, 1.0)))
}

/// Evaluates `T_alpha'(x)`; the value at exactly `1/2` is 2.
pub fn lsv_derivative(alpha: f64, x: Point) -> Result<f64> {
    Ok(LsvMap::new(alpha)?.derivative(x.get()))
}

/// Inverse of the left branch, onto `[0, 1/2]`.
pub fn lsv_left_inverse(alpha: f64, y: Point) -> Result<Point> {
    let x = LsvMap::new(alpha)?.left_inverse(y.get());
    if !(0.0..=0.5).contains(&x) || !x.is_finite() {
        return Err(Error::Internal(format!("left inverse of {} diverged", y.get())));
    }
    Ok(Point(x))
}

/// How the exponent sequence of a schedule is generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ScheduleMode {
    Constant { alpha: f64 },
    Periodic { alphas: Vec<f64> },
    IidUniform { lo: f64, hi: f64 },
    ExplicitList { alphas: Vec<f64> },
}

/// The exponents `(alpha_i)` of a sequential system together with their cap.
///
/// Index `k` (0-based) is the exponent of the `(k+1)`-th map applied, so
/// `T_n o ... o T_1` uses indices `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSchedule {
    mode: ScheduleMode,
    alpha_star: f64,
    seed: u64,
}

impl ParameterSchedule {
    pub fn new(mode: ScheduleMode, alpha_star: f64, seed: u64) -> Result<Self> {
        if !(alpha_star > 0.0 && alpha_star < 1.0) {
            return Err(Error::Schedule(format!(
                "alpha_star {alpha_star} outside (0, 1)"
            )));
        }
        let in_range = |a: f64| a > 0.0 && a <= alpha_star;
        match &mode {
            ScheduleMode::Constant { alpha } => {
                if !in_range(*alpha) {
                    return Err(Error::Schedule(format!(
                        "alpha {alpha} outside (0, {alpha_star}]"
                    )));
                }
            }
            ScheduleMode::Periodic { alphas } | ScheduleMode::ExplicitList { alphas } => {
                if alphas.is_empty() {
                    return Err(Error::Schedule("empty exponent list".into()));
                }
                if let Some(a) = alphas.iter().find(|a| !in_range(**a)) {
                    return Err(Error::Schedule(format!(
                        "alpha {a} outside (0, {alpha_star}]"
                    )));
                }
            }
            ScheduleMode::IidUniform { lo, hi } => {
                if !(*lo > 0.0 && lo < hi && *hi <= alpha_star) {
                    return Err(Error::Schedule(format!(
                        "iid range ({lo}, {hi}) not inside (0, {alpha_star}]"
                    )));
                }
            }
        }
        Ok(ParameterSchedule {
            mode,
            alpha_star,
            seed,
        })
    }

    pub fn constant(alpha: f64) -> Result<Self> {
        Self::new(ScheduleMode::Constant { alpha }, DEFAULT_ALPHA_STAR, 0)
    }

    pub fn periodic(alphas: Vec<f64>) -> Result<Self> {
        Self::new(ScheduleMode::Periodic { alphas }, DEFAULT_ALPHA_STAR, 0)
    }

    pub fn explicit(alphas: Vec<f64>) -> Result<Self> {
        Self::new(ScheduleMode::ExplicitList { alphas }, DEFAULT_ALPHA_STAR, 0)
    }

    pub fn iid_uniform(lo: f64, hi: f64, seed: u64) -> Result<Self> {
        Self::new(ScheduleMode::IidUniform { lo, hi }, DEFAULT_ALPHA_STAR, seed)
    }

    /// Replaces the cap, revalidating the sequence against it.
    pub fn with_alpha_star(self, alpha_star: f64) -> Result<Self> {
        Self::new(self.mode, alpha_star, self.seed)
    }

    pub fn mode(&self) -> &ScheduleMode {
        &self.mode
    }

    pub fn alpha_star(&self) -> f64 {
        self.alpha_star
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Upper bound on every exponent the schedule can produce.
    pub fn alpha_max(&self) -> f64 {
        match &self.mode {
            ScheduleMode::Constant { alpha } => *alpha,
            ScheduleMode::Periodic { alphas } | ScheduleMode::ExplicitList { alphas } => {
                alphas.iter().cloned().fold(0.0, f64::max)
            }
            ScheduleMode::IidUniform { hi, .. } => *hi,
        }
    }

    /// True when every step uses the same exponent.
    pub fn is_constant(&self) -> bool {
        match &self.mode {
            ScheduleMode::Constant { .. } => true,
            ScheduleMode::Periodic { alphas } | ScheduleMode::ExplicitList { alphas } => {
                alphas.windows(2).all(|w| w[0] == w[1])
            }
            ScheduleMode::IidUniform { .. } => false,
        }
    }

    /// Exponent of the `(k+1)`-th map.
    pub fn alpha(&self, k: usize) -> Result<f64> {
        match &self.mode {
            ScheduleMode::Constant { alpha } => Ok(*alpha),
            ScheduleMode::Periodic { alphas } => Ok(alphas[k % alphas.len()]),
            ScheduleMode::ExplicitList { alphas } => alphas.get(k).copied().ok_or_else(|| {
                Error::Schedule(format!(
                    "explicit schedule has {} entries, step {} requested",
                    alphas.len(),
                    k + 1
                ))
            }),
            ScheduleMode::IidUniform { lo, hi } => {
                // random access into the counter-based stream: word 2k
                let mut rng = RngSpec::new(self.seed).stream(SCHEDULE_STREAM);
                rng.set_word_pos(2 * k as u128);
                let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                Ok(lo + (hi - lo) * u)
            }
        }
    }

    /// The first `n` exponents.
    pub fn alphas(&self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|k| self.alpha(k)).collect()
    }

    /// The first `n` maps, ready for fast evaluation.
    pub fn maps(&self, n: usize) -> Result<Vec<LsvMap>> {
        self.alphas(n)?.into_iter().map(LsvMap::new).collect()
    }
}

/// `(x0, T_1(x0), T_2(T_1(x0)), ...)` up to `n` applications.
pub fn sequential_orbit(schedule: &ParameterSchedule, x0: Point, n: usize) -> Result<Vec<Point>> {
    let maps = schedule.maps(n)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0.get();
    out.push(x0);
    for map in &maps {
        x = map.apply(x).clamp(0.0, 1.0);
        out.push(Point(x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Point {
        Point::new(x).unwrap()
    }

    #[test]
    fn fixed_point_and_right_branch() {
        for &a in &[0.01, 0.1, 1.0 / 7.0, 0.9] {
            assert_eq!(lsv_apply(a, p(0.0)).unwrap().get(), 0.0);
            assert_eq!(lsv_apply(a, p(0.75)).unwrap().get(), 0.5);
            assert_eq!(lsv_apply(a, p(1.0)).unwrap().get(), 1.0);
            assert_eq!(lsv_apply(a, p(0.5)).unwrap().get(), 0.0);
            assert_eq!(lsv_derivative(a, p(0.0)).unwrap(), 1.0);
            assert_eq!(lsv_derivative(a, p(0.75)).unwrap(), 2.0);
            assert_eq!(lsv_derivative(a, p(0.5)).unwrap(), 2.0);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(Point::new(-0.1).is_err());
        assert!(Point::new(1.5).is_err());
        assert!(lsv_apply(0.0, p(0.3)).is_err());
        assert!(lsv_apply(1.0, p(0.3)).is_err());
        assert!(lsv_derivative(-0.5, p(0.3)).is_err());
    }

    #[test]
    fn left_inverse_endpoints() {
        for &a in &[0.05, 0.1, 1.0 / 7.0] {
            assert_eq!(lsv_left_inverse(a, p(0.0)).unwrap().get(), 0.0);
            assert_eq!(lsv_left_inverse(a, p(1.0)).unwrap().get(), 0.5);
        }
    }

    #[test]
    fn left_inverse_keeps_relative_precision_near_zero() {
        let map = LsvMap::new(0.1).unwrap();
        for &y in &[1e-8, 1e-12, 1e-20, 3e-300] {
            let x = map.left_inverse(y);
            assert!(((map.apply(x) - y) / y).abs() < 1e-14, "y = {y}");
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(ParameterSchedule::constant(0.2).is_err());
        assert!(ParameterSchedule::constant(1.0 / 7.0).is_ok());
        assert!(ParameterSchedule::periodic(vec![]).is_err());
        assert!(ParameterSchedule::explicit(vec![0.1, 0.5]).is_err());
        assert!(ParameterSchedule::iid_uniform(0.01, 0.2, 1).is_err());
        assert!(ParameterSchedule::iid_uniform(0.1, 0.05, 1).is_err());
        assert!(ParameterSchedule::constant(0.3)
            .and_then(|s| s.with_alpha_star(0.5))
            .is_err());
        assert!(ParameterSchedule::new(ScheduleMode::Constant { alpha: 0.3 }, 0.5, 0).is_ok());
    }

    #[test]
    fn explicit_schedule_is_finite() {
        let s = ParameterSchedule::explicit(vec![0.1, 0.12]).unwrap();
        assert_eq!(s.alphas(2).unwrap(), vec![0.1, 0.12]);
        assert!(s.alpha(2).is_err());
        let per = ParameterSchedule::periodic(vec![0.1, 0.12]).unwrap();
        assert_eq!(per.alphas(5).unwrap(), vec![0.1, 0.12, 0.1, 0.12, 0.1]);
    }

    #[test]
    fn iid_schedule_is_reproducible_and_in_range() {
        let a = ParameterSchedule::iid_uniform(0.01, 0.14, 42).unwrap();
        let b = ParameterSchedule::iid_uniform(0.01, 0.14, 42).unwrap();
        let c = ParameterSchedule::iid_uniform(0.01, 0.14, 43).unwrap();
        let xa = a.alphas(500).unwrap();
        assert_eq!(xa, b.alphas(500).unwrap());
        assert_ne!(xa, c.alphas(500).unwrap());
        assert!(xa.iter().all(|&x| x > 0.01 && x < 0.14));
        // random access agrees with sequential generation
        assert_eq!(a.alpha(321).unwrap(), xa[321]);
        let mean = xa.iter().sum::<f64>() / xa.len() as f64;
        assert!((mean - 0.075).abs() < 0.005);
    }

    #[test]
    fn orbit_of_zero_stays_at_zero() {
        let s = ParameterSchedule::iid_uniform(0.01, 0.14, 7).unwrap();
        let orbit = sequential_orbit(&s, p(0.0), 10).unwrap();
        assert_eq!(orbit.len(), 11);
        assert!(orbit.iter().all(|x| x.get() == 0.0));
    }

    #[test]
    fn orbit_uses_schedule_order() {
        let s = ParameterSchedule::explicit(vec![0.05, 0.14]).unwrap();
        let orbit = sequential_orbit(&s, p(0.3), 2).unwrap();
        let x1 = LsvMap::new(0.05).unwrap().apply(0.3);
        let x2 = LsvMap::new(0.14).unwrap().apply(x1);
        assert_eq!(orbit[1].get(), x1);
        assert_eq!(orbit[2].get(), x2);
    }
}

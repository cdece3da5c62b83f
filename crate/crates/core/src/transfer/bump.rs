use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Collar profile of a [`BumpFunction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpProfile {
    /// `exp(-1 / (1 - s^2))`: equals `1/e` at the inner edge of the collar.
    #[default]
    Printed,
    /// `exp(1 - 1 / (1 - s^2))`: the continuous mollifier.
    Smooth,
}

/// Approximation of the indicator of `(a_n, b_n)` that vanishes outside
/// `(a_n - delta, b_n + delta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub a_n: f64,
    pub b_n: f64,
    pub delta: f64,
    pub profile: BumpProfile,
}

impl BumpFunction {
    pub fn new(a_n: f64, b_n: f64, delta: f64) -> Result<Self> {
        Self::with_profile(a_n, b_n, delta, BumpProfile::Printed)
    }

    pub fn with_profile(a_n: f64, b_n: f64, delta: f64, profile: BumpProfile) -> Result<Self> {
        if !(a_n < b_n) || !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bump needs a_n < b_n and delta > 0, got ({a_n}, {b_n}, {delta})"
            )));
        }
        if a_n - delta < 0.0 || b_n + delta > 1.0 {
            return Err(Error::Domain(format!(
                "collar ({}, {}) leaves [0, 1]",
                a_n - delta,
                b_n + delta
            )));
        }
        Ok(BumpFunction {
            a_n,
            b_n,
            delta,
            profile,
        })
    }

    fn collar(&self, s: f64) -> f64 {
        let e = -1.0 / (1.0 - s * s);
        match self.profile {
            BumpProfile::Printed => e.exp(),
            BumpProfile::Smooth => (1.0 + e).exp(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x > self.a_n && x < self.b_n {
            1.0
        } else if x > self.a_n - self.delta && x <= self.a_n {
            self.collar((x - self.a_n) / self.delta)
        } else if x >= self.b_n && x < self.b_n + self.delta {
            self.collar((x - self.b_n) / self.delta)
        } else {
            0.0
        }
    }

    /// Measure of the set where the bump exceeds the indicator of `(a_n, b_n)`.
    pub fn collar_measure(&self) -> f64 {
        2.0 * self.delta
    }

    /// Sup of `|chi'|`; attained where `1 - s^2 = 1 - 1/sqrt(3)`.
    pub fn derivative_bound(&self) -> f64 {
        let u = 1.0 - 1.0 / 3f64.sqrt();
        let base = 2.0 * 3f64.powf(-0.25) * (-1.0 / u).exp() / (u * u) / self.delta;
        match self.profile {
            BumpProfile::Printed => base,
            BumpProfile::Smooth => base * std::f64::consts::E,
        }
    }
}

/// `chi(x)` for a validated bump.
pub fn bump_chi(bump: &BumpFunction, x: crate::maps::Point) -> f64 {
    bump.eval(x.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_inside_and_outside() {
        let b = BumpFunction::new(0.4, 0.5, 0.05).unwrap();
        assert_eq!(b.eval(0.45), 1.0);
        assert_eq!(b.eval(0.34), 0.0);
        assert_eq!(b.eval(0.56), 0.0);
        assert!((b.eval(0.5) - (-1f64).exp()).abs() < 1e-16);
        let s = BumpFunction::with_profile(0.4, 0.5, 0.05, BumpProfile::Smooth).unwrap();
        assert_eq!(s.eval(0.5), 1.0);
    }

    #[test]
    fn collar_must_fit() {
        assert!(BumpFunction::new(0.01, 0.2, 0.05).is_err());
        assert!(BumpFunction::new(0.5, 0.4, 0.05).is_err());
    }

    #[test]
    fn derivative_bound_dominates_differences() {
        for profile in [BumpProfile::Printed, BumpProfile::Smooth] {
            let b = BumpFunction::with_profile(0.3, 0.6, 0.01, profile).unwrap();
            let bound = b.derivative_bound();
            let h = 1e-7;
            let mut max_slope: f64 = 0.0;
            let mut x = 0.6 + h;
            while x < 0.61 - h {
                max_slope = max_slope.max(((b.eval(x + h) - b.eval(x)) / h).abs());
                x += 1e-6;
            }
            assert!(max_slope <= bound * (1.0 + 1e-4));
            assert!(max_slope >= bound * 0.99);
        }
    }
}

//! Estimates with confidence intervals and small regression helpers.

use serde::{Deserialize, Serialize};

/// z-quantile of the two-sided 95% normal interval.
pub const Z95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    #[default]
    Normal,
    /// Clopper-Pearson, for proportions with few successes.
    ExactBinomial,
}

/// A point estimate with its standard error and a 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCi {
    pub value: f64,
    pub standard_error: f64,
    pub sample_count: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EstimateWithCi {
    /// Normal-approximation interval around `value`.
    pub fn normal(value: f64, standard_error: f64, sample_count: u64) -> Self {
        let se = standard_error.max(0.0);
        EstimateWithCi {
            value,
            standard_error: se,
            sample_count,
            ci_low: value - Z95 * se,
            ci_high: value + Z95 * se,
        }
    }

    /// Proportion `successes / trials`.
    pub fn proportion(successes: u64, trials: u64, method: CiMethod) -> Self {
        if trials == 0 {
            return EstimateWithCi::normal(0.0, 0.0, 0);
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        match method {
            CiMethod::Normal => EstimateWithCi::normal(p, se, trials),
            CiMethod::ExactBinomial => {
                let (lo, hi) = clopper_pearson(successes, trials, 0.05);
                EstimateWithCi {
                    value: p,
                    standard_error: se,
                    sample_count: trials,
                    ci_low: lo.min(p),
                    ci_high: hi.max(p),
                }
            }
        }
    }

    /// Mean of per-sample values given their sum and sum of squares.
    pub fn from_moments(sum: f64, sum_sq: f64, count: u64) -> Self {
        if count == 0 {
            return EstimateWithCi::normal(0.0, 0.0, 0);
        }
        let n = count as f64;
        let mean = sum / n;
        let var = if count > 1 {
            ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        EstimateWithCi::normal(mean, (var / n).sqrt(), count)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    /// `|value - target| <= k * se`.
    pub fn within_se(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.standard_error
    }
}

/// Standard error of a difference of two independent estimates.
pub fn combined_se(a: &EstimateWithCi, b: &EstimateWithCi) -> f64 {
    a.standard_error.hypot(b.standard_error)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

// Lanczos approximation, g = 7, n = 9.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `P(X <= k)` for `X ~ Binomial(n, p)` by direct summation.
fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=k.min(n))
        .map(|i| (ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq).exp())
        .sum::<f64>()
        .min(1.0)
}

fn clopper_pearson(x: u64, n: u64, level: f64) -> (f64, f64) {
    let half = level / 2.0;
    let solve = |pred: &dyn Fn(f64) -> bool| {
        // pred is true on [0, root) and false on (root, 1]
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if pred(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if x == 0 {
        0.0
    } else {
        solve(&|p| 1.0 - binomial_cdf(x - 1, n, p) < half)
    };
    let upper = if x == n {
        1.0
    } else {
        solve(&|p| binomial_cdf(x, n, p) > half)
    };
    (lower, upper)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn proportion_interval_contains_value() {
        let e = EstimateWithCi::proportion(368, 1000, CiMethod::Normal);
        assert_relative_eq!(e.value, 0.368);
        assert!(e.contains(0.368));
        assert!(e.standard_error > 0.0);
        let zero = EstimateWithCi::proportion(0, 1000, CiMethod::Normal);
        assert_eq!(zero.standard_error, 0.0);
    }

    #[test]
    fn clopper_pearson_known_values() {
        // 0 of 10: upper = 1 - 0.025^(1/10)
        let e = EstimateWithCi::proportion(0, 10, CiMethod::ExactBinomial);
        assert_relative_eq!(e.ci_high, 1.0 - 0.025f64.powf(0.1), epsilon = 1e-9);
        assert_eq!(e.ci_low, 0.0);
        // 5 of 10: symmetric interval [0.187086, 0.812914]
        let e = EstimateWithCi::proportion(5, 10, CiMethod::ExactBinomial);
        assert_relative_eq!(e.ci_low, 0.187086, epsilon = 1e-5);
        assert_relative_eq!(e.ci_high, 0.812914, epsilon = 1e-5);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(11.0), 3628800f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (s, c) = linear_fit(&x, &y);
        assert_relative_eq!(s, -2.0, epsilon = 1e-12);
        assert_relative_eq!(c, 3.0, epsilon = 1e-12);
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.0 * v.powf(-1.5)).collect();
        assert_relative_eq!(log_log_slope(&x, &y), -1.5, epsilon = 1e-12);
    }

    #[test]
    fn moments_estimate() {
        let data = [1.0, 2.0, 3.0, 4.0];
        let s: f64 = data.iter().sum();
        let s2: f64 = data.iter().map(|v| v * v).sum();
        let e = EstimateWithCi::from_moments(s, s2, 4);
        assert_relative_eq!(e.value, 2.5);
        assert_relative_eq!(e.standard_error, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-12);
    }
}

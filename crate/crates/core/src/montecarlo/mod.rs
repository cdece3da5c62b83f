//! Monte Carlo estimators over Lebesgue-distributed initial points.
//!
//! Samples are processed in fixed-size chunks whose partial results are
//! combined in chunk order, so every estimate is bit-for-bit independent of
//! the number of worker threads.

mod blocks;
mod clustering;
mod correlation;
mod ledger;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{LsvMap, ParameterSchedule};
use crate::rng::RngSpec;
use crate::stats::{CiMethod, EstimateWithCi};
use crate::thresholds::ThresholdSchedule;

pub use blocks::{build_blocks, default_block_count, default_gap, BlockStructure};
pub use clustering::{d0_mixing_gap, dprime_sum, DprimeEstimate, MixingGap};
pub use correlation::{
    correlation_dc, correlation_dc_mc, dc_delta, ConstantFn, DcBound, Indicator, SmoothFn, TestFunction,
};
pub use ledger::{exponent_ledger, Exponents, LedgerCheck};

const CHUNK: u64 = 2048;

/// Folds `per_sample(s)` over `s < samples` in fixed chunks, combining chunk
/// results in order.
pub(crate) fn fold_samples<T, I, S, C>(samples: u64, identity: I, per_sample: S, combine: C) -> T
where
    T: Send,
    I: Fn() -> T + Sync,
    S: Fn(T, u64) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(samples);
            (c * CHUNK..end).fold(identity(), &per_sample)
        })
        .collect();
    partial.into_iter().fold(identity(), combine)
}

fn check_schedule_len(ts: &ThresholdSchedule, needed: usize) -> Result<()> {
    if needed > ts.n {
        return Err(Error::InvalidArgument(format!(
            "index {needed} beyond threshold horizon {}",
            ts.n
        )));
    }
    Ok(())
}

/// Whether [`estimate_pn_with`] stops an orbit at its first exceedance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EarlyExit {
    #[default]
    Enabled,
    Disabled,
}

/// `P_n = m(X_0 <= u_{n,0}, ..., X_{n-1} <= u_{n,n-1})`.
pub fn estimate_pn(schedule: &ParameterSchedule, ts: &ThresholdSchedule, rng: &RngSpec, samples: u64) -> Result<EstimateWithCi> {
    estimate_pn_with(schedule, ts, rng, samples, EarlyExit::Enabled)
}

pub fn estimate_pn_with(
    schedule: &ParameterSchedule,
    ts: &ThresholdSchedule,
    rng: &RngSpec,
    samples: u64,
    early_exit: EarlyExit,
) -> Result<EstimateWithCi> {
    let n = ts.n;
    let maps = schedule.maps(n)?;
    let survived = |s: u64| -> bool {
        let mut x = rng.initial_point(s);
        let mut hit = false;
        for (i, map) in maps.iter().enumerate() {
            if ts.exceeds(i, x) {
                hit = true;
                if early_exit == EarlyExit::Enabled {
                    break;
                }
            }
            x = map.apply(x);
        }
        !hit
    };
    let count = fold_samples(samples, || 0u64, |acc, s| acc + survived(s) as u64, |a, b| a + b);
    Ok(EstimateWithCi::proportion(count, samples, CiMethod::Normal))
}

/// `m(X_i > u_{n,i})` by direct simulation.
pub fn estimate_exceedance(
    schedule: &ParameterSchedule,
    ts: &ThresholdSchedule,
    i: usize,
    rng: &RngSpec,
    samples: u64,
) -> Result<EstimateWithCi> {
    Ok(estimate_exceedances(schedule, ts, &[i], rng, samples)?.remove(0))
}

/// Exceedance frequencies at several times, sharing one orbit per sample.
pub fn estimate_exceedances(
    schedule: &ParameterSchedule,
    ts: &ThresholdSchedule,
    indices: &[usize],
    rng: &RngSpec,
    samples: u64,
) -> Result<Vec<EstimateWithCi>> {
    let horizon = indices.iter().max().map_or(0, |&i| i + 1);
    check_schedule_len(ts, horizon)?;
    let maps: Vec<LsvMap> = schedule.maps(horizon)?;
    let mut wanted = vec![None; horizon];
    for (slot, &i) in indices.iter().enumerate() {
        wanted[i] = Some(slot);
    }
    let k = indices.len();
    let counts = fold_samples(
        samples,
        || vec![0u64; k],
        |mut acc, s| {
            let mut x = rng.initial_point(s);
            for i in 0..horizon {
                if let Some(slot) = wanted[i] {
                    if ts.exceeds(i, x) {
                        acc[slot] += 1;
                    }
                }
                x = maps[i].apply(x);
            }
            acc
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
    );
    // indices may repeat; every slot of a repeated index shares the last count
    Ok(indices
        .iter()
        .map(|&i| {
            let c = counts[wanted[i].expect("registered")];
            EstimateWithCi::proportion(c, samples, CiMethod::Normal)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;
    use crate::thresholds::{build_threshold_schedule, Observable};

    fn setup(tau: f64, n: usize) -> (ParameterSchedule, ThresholdSchedule) {
        let s = ParameterSchedule::constant(0.1).unwrap();
        let mesh = MeshSpec::default().build().unwrap();
        let obs = Observable::log(1.0 / 2f64.sqrt()).unwrap();
        let ts = build_threshold_schedule(&s, &obs, tau, n, &mesh, None).unwrap();
        (s, ts)
    }

    #[test]
    fn chunked_fold_is_ordered() {
        let v = fold_samples(5000, Vec::new, |mut a, s| {
            a.push(s);
            a
        }, |mut a, b| {
            a.extend(b);
            a
        });
        assert_eq!(v, (0..5000).collect::<Vec<_>>());
    }

    #[test]
    fn zero_tau_never_exceeds() {
        let (s, ts) = setup(0.0, 50);
        let e = estimate_pn(&s, &ts, &RngSpec::new(1), 1000).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.standard_error, 0.0);
        assert_eq!(estimate_exceedance(&s, &ts, 10, &RngSpec::new(1), 1000).unwrap().value, 0.0);
    }

    #[test]
    fn single_step_matches_one_minus_tau() {
        let (s, ts) = setup(0.5, 1);
        let e = estimate_pn(&s, &ts, &RngSpec::new(3), 20_000).unwrap();
        assert!(e.within_se(0.5, 3.0), "{e:?}");
    }

    #[test]
    fn early_exit_does_not_change_result() {
        let (s, ts) = setup(1.0, 100);
        let rng = RngSpec::new(9);
        let a = estimate_pn_with(&s, &ts, &rng, 3000, EarlyExit::Enabled).unwrap();
        let b = estimate_pn_with(&s, &ts, &rng, 3000, EarlyExit::Disabled).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn index_beyond_horizon_is_rejected() {
        let (s, ts) = setup(1.0, 10);
        assert!(estimate_exceedance(&s, &ts, 10, &RngSpec::new(1), 10).is_err());
    }
}

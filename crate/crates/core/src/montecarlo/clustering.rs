//! Within-block joint exceedances and the mixing gap between one exceedance
//! and a later run of non-exceedances.

use serde::{Deserialize, Serialize};

use super::{check_schedule_len, fold_samples, BlockStructure};
use crate::error::{Error, Result};
use crate::maps::ParameterSchedule;
use crate::rng::RngSpec;
use crate::stats::EstimateWithCi;
use crate::thresholds::ThresholdSchedule;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DprimeEstimate {
    pub total: EstimateWithCi,
    /// Mean number of exceedance pairs inside each block.
    pub per_block: Vec<f64>,
}

/// Sum over blocks of `P(X_a > u_a, X_b > u_b)` over pairs `a < b` in the
/// same block.
///
/// Each sample contributes `sum_b C(e_b, 2)` where `e_b` counts its
/// exceedances in block `b`; the mean over samples is the triple sum.
pub fn dprime_sum(
    schedule: &ParameterSchedule,
    ts: &ThresholdSchedule,
    blocks: &BlockStructure,
    rng: &RngSpec,
    samples: u64,
) -> Result<DprimeEstimate> {
    let n = ts.n;
    if blocks.n() != n {
        return Err(Error::InvalidArgument(format!(
            "blocks cover {} times, thresholds {n}",
            blocks.n()
        )));
    }
    let maps = schedule.maps(n)?;
    let block_of = blocks.block_of();
    let k = blocks.k_n;

    #[derive(Clone)]
    struct Acc {
        sum: u64,
        sum_sq: u128,
        per_block: Vec<u64>,
    }
    let identity = || Acc {
        sum: 0,
        sum_sq: 0,
        per_block: vec![0; k],
    };
    let acc = fold_samples(
        samples,
        identity,
        |mut acc, s| {
            let mut counts = vec![0u64; k];
            let mut x = rng.initial_point(s);
            for (i, map) in maps.iter().enumerate() {
                if ts.exceeds(i, x) {
                    counts[block_of[i]] += 1;
                }
                x = map.apply(x);
            }
            let mut pairs = 0u64;
            for (b, &e) in counts.iter().enumerate() {
                let p = e * e.saturating_sub(1) / 2;
                acc.per_block[b] += p;
                pairs += p;
            }
            acc.sum += pairs;
            acc.sum_sq += (pairs as u128) * (pairs as u128);
            acc
        },
        |mut a, b| {
            a.sum += b.sum;
            a.sum_sq += b.sum_sq;
            a.per_block.iter_mut().zip(b.per_block).for_each(|(x, y)| *x += y);
            a
        },
    );
    let total = EstimateWithCi::from_moments(acc.sum as f64, acc.sum_sq as f64, samples);
    Ok(DprimeEstimate {
        total,
        per_block: acc
            .per_block
            .iter()
            .map(|&c| c as f64 / samples.max(1) as f64)
            .collect(),
    })
}

/// Joint counts behind a mixing-gap estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingGap {
    pub gap: EstimateWithCi,
    pub n_a: u64,
    pub n_w: u64,
    pub n_aw: u64,
}

/// `|P(A_i and W) - P(A_i) P(W)|` with `A_i = {X_i > u_{n,i}}` and `W` the
/// event of no exceedance at times `i+t .. i+t+ell-1`.
///
/// The standard error is the delta-method error of the sample covariance,
/// computed from the four cell counts of `(A, W)`.
pub fn d0_mixing_gap(
    schedule: &ParameterSchedule,
    ts: &ThresholdSchedule,
    i: usize,
    t: usize,
    ell: usize,
    rng: &RngSpec,
    samples: u64,
) -> Result<MixingGap> {
    let end = i + t + ell;
    check_schedule_len(ts, end)?;
    check_schedule_len(ts, i + 1)?;
    let maps = schedule.maps(end.max(i + 1))?;
    let start_w = i + t;
    let (n_a, n_w, n_aw) = fold_samples(
        samples,
        || (0u64, 0u64, 0u64),
        |(na, nw, naw), s| {
            let mut x = rng.initial_point(s);
            let mut a = false;
            let mut w = true;
            for (step, map) in maps.iter().enumerate() {
                if step == i {
                    a = ts.exceeds(i, x);
                }
                if step >= start_w && step < end && ts.exceeds(step, x) {
                    w = false;
                    break;
                }
                x = map.apply(x);
            }
            (na + a as u64, nw + w as u64, naw + (a && w) as u64)
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
    );
    let big_n = samples.max(1) as f64;
    let (pa, pw, paw) = (n_a as f64 / big_n, n_w as f64 / big_n, n_aw as f64 / big_n);
    let cov = paw - pa * pw;
    // influence values of the four cells (A, W) = (1,1), (1,0), (0,1), (0,0)
    let z = [1.0 - pa - pw, -pw, -pa, 0.0];
    let p = [paw, pa - paw, pw - paw, 1.0 - pa - pw + paw];
    let mean: f64 = z.iter().zip(&p).map(|(z, p)| z * p).sum();
    let second: f64 = z.iter().zip(&p).map(|(z, p)| z * z * p).sum();
    let se = ((second - mean * mean).max(0.0) / big_n).sqrt();
    Ok(MixingGap {
        gap: EstimateWithCi::normal(cov.abs(), se, samples),
        n_a,
        n_w,
        n_aw,
    })
}

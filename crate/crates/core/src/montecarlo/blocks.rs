use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thresholds::ThresholdSchedule;

const REACH_TOL: f64 = 1e-9;

/// Partition of `0..n` into consecutive blocks of comparable exceedance mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStructure {
    pub k_n: usize,
    pub lengths: Vec<usize>,
    /// `prefix[b]` is the first index of block `b`; `prefix[k_n] = n`.
    pub prefix: Vec<usize>,
    pub t_star: usize,
    pub block_masses: Vec<f64>,
}

impl BlockStructure {
    pub fn n(&self) -> usize {
        *self.prefix.last().unwrap_or(&0)
    }

    /// Block index of every time `0..n`.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n());
        for (b, &len) in self.lengths.iter().enumerate() {
            out.extend(std::iter::repeat_n(b, len));
        }
        out
    }

    /// `k_n * t_star * fbar_max`.
    pub fn gap_product(&self, fbar_max: f64) -> f64 {
        self.k_n as f64 * self.t_star as f64 * fbar_max
    }
}

/// `round(n^(1 - beta))`, at least 1.
pub fn default_block_count(n: usize, beta: f64) -> usize {
    ((n as f64).powf(1.0 - beta).round() as usize).clamp(1, n.max(1))
}

/// `round(n^kappa)`.
pub fn default_gap(n: usize, kappa: f64) -> usize {
    (n as f64).powf(kappa).round() as usize
}

/// Cuts `0..n` where the running exceedance mass first reaches `b tau / k_n`,
/// `b = 1..k_n-1`, so every block carries `tau / k_n` up to one term. With
/// `tau = 0` the blocks have equal lengths.
pub fn build_blocks(ts: &ThresholdSchedule, k_n: usize, t_star: usize) -> Result<BlockStructure> {
    let n = ts.n;
    if k_n == 0 || k_n > n {
        return Err(Error::BlockCount { k: k_n, n });
    }
    let masses = &ts.masses;
    let total: f64 = masses.iter().sum();
    let mut prefix = Vec::with_capacity(k_n + 1);
    prefix.push(0);
    if total > 0.0 {
        let mut running = 0.0;
        let mut next_block = 1;
        for (i, &m) in masses.iter().enumerate() {
            if next_block == k_n {
                break;
            }
            running += m;
            let target = next_block as f64 * total / k_n as f64;
            let remaining_blocks = k_n - next_block;
            let must_cut = n - (i + 1) == remaining_blocks;
            if running >= target * (1.0 - REACH_TOL) || must_cut {
                prefix.push(i + 1);
                next_block += 1;
            }
        }
    } else {
        prefix.extend((1..k_n).map(|b| b * n / k_n));
    }
    prefix.push(n);
    let lengths: Vec<usize> = prefix.windows(2).map(|w| w[1] - w[0]).collect();
    let block_masses = prefix
        .windows(2)
        .map(|w| masses[w[0]..w[1]].iter().sum())
        .collect();
    Ok(BlockStructure {
        k_n,
        lengths,
        prefix,
        t_star,
        block_masses,
    })
}

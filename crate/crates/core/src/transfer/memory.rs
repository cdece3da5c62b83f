use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{cone_check, ConeParams, PushMethod, Pusher, DEFAULT_CONE_A};
use crate::error::{Error, Result};
use crate::maps::ParameterSchedule;
use crate::mesh::{Density, Mesh};
use crate::stats::linear_fit;

const RESCALE_BELOW: f64 = 1e-200;

/// L1 distances between two pushed densities along a ladder of times.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossOfMemory {
    pub ladder: Vec<usize>,
    /// `||Pi_n f - Pi_n g||_1`; may underflow to 0 where `ln_distances` does not.
    pub distances: Vec<f64>,
    pub ln_distances: Vec<f64>,
    pub cone_warnings: Vec<String>,
}

impl LossOfMemory {
    /// True when each distance is strictly below the previous one.
    pub fn strictly_decreasing(&self) -> bool {
        self.ln_distances.windows(2).all(|w| w[1] < w[0])
    }
}

/// Pushes `f - g` through the schedule and records its L1 norm at the ladder
/// times.
///
/// The operators conserve mass, so roundoff in `int (f - g)` would otherwise
/// set a floor under the distance; after every step the net mass of the
/// difference is removed along `Pi_n f`. The difference is renormalized when
/// it gets tiny, with the scale carried in log space.
pub fn loss_of_memory_distance(
    schedule: &ParameterSchedule,
    f: &Density,
    g: &Density,
    n_ladder: &[usize],
    method: PushMethod,
) -> Result<LossOfMemory> {
    let (mf, mg) = (f.total_mass(), g.total_mass());
    if (mf - mg).abs() > 1e-10 * mf.abs().max(mg.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::UnequalMass { left: mf, right: mg });
    }
    let cone = ConeParams::new(DEFAULT_CONE_A, schedule.alpha_star())?;
    let mut cone_warnings = Vec::new();
    for (name, d) in [("f", f), ("g", g)] {
        let report = cone_check(d.as_cells(), &cone);
        if !report.member {
            cone_warnings.push(format!("{name} fails the cone check: {report:?}"));
        }
    }

    let mut ladder = n_ladder.to_vec();
    ladder.sort_unstable();
    ladder.dedup();
    let diff = f.as_cells().sub(g.as_cells())?;
    let mut ln_scale = 0.0_f64;
    let mut pusher = Pusher::new(schedule, diff, method);
    let mut anchor = Pusher::new(schedule, f.as_cells().clone(), method);
    let mut ln_distances = Vec::with_capacity(ladder.len());
    for &n in &ladder {
        while pusher.step() < n {
            pusher.advance()?;
            anchor.advance()?;
            let drift = if mf > 0.0 { pusher.current().integral() / mf } else { 0.0 };
            let h = pusher.current().sub(&anchor.current().scaled(drift))?;
            let norm = h.l1_norm();
            pusher.replace(h);
            if norm > 0.0 && norm < RESCALE_BELOW {
                ln_scale += norm.ln();
                pusher.rescale(1.0 / norm);
            }
        }
        ln_distances.push(pusher.current().l1_norm().ln() + ln_scale);
    }
    Ok(LossOfMemory {
        distances: ln_distances.iter().map(|l| l.exp()).collect(),
        ladder,
        ln_distances,
        cone_warnings,
    })
}

/// Slope of `ln d_n - (1/alpha) ln ln n` against `ln n`.
pub fn memory_decay_slope(ladder: &[usize], ln_distances: &[f64], alpha: f64) -> Result<f64> {
    if ladder.len() != ln_distances.len() || ladder.len() < 2 || ladder.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "slope fit needs at least two times, all >= 2".into(),
        ));
    }
    let x: Vec<f64> = ladder.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = ladder
        .iter()
        .zip(ln_distances)
        .map(|(&n, l)| l - (n as f64).ln().ln() / alpha)
        .collect();
    Ok(linear_fit(&x, &y).0)
}

/// Unit-mass cone member equal to a constant on `[0, s]` and decaying like
/// `x^-(1+alpha)` beyond; stands in for the normalized indicator of `[0, s]`.
pub fn cone_step_surrogate(mesh: &Arc<Mesh>, s: f64, alpha: f64) -> Result<Density> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidArgument(format!("step end {s} outside (0, 1]")));
    }
    let profile = move |x: f64| if x <= s { 1.0 } else { (s / x).powf(1.0 + alpha) };
    Ok(Density::from_fn(mesh.clone(), &profile)?.normalized())
}

//! Measures of fast-returning sets.
//!
//! * `E_n(eps) = { x : |T_n(x) - x| <= eps }` for the composed map `T_n`,
//! * `E_j = union over 1 <= i <= floor(j^(kappa (1 + xi))) of E_i(2 / j)`,
//! * the part of `E_{j^gamma}` inside the ball of radius `j^-gamma` at `zeta`.
//!
//! All measures come from deterministic grids. Displacements `T_i(x) - x`
//! are accumulated as compensated sums of per-step increments, which keeps
//! them accurate near the neutral fixed point.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{LsvMap, ParameterSchedule};

const ROOT_TOL: f64 = 1e-13;
// Newton steps below this are final
const STEP_TOL: f64 = 1e-14;
// relative accuracy of the displacement at a located crossing
const VALUE_TOL: f64 = 1e-12;

/// Exponents for the recurrence sets and the local estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceParams {
    pub beta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub gamma: f64,
    /// `1/(1 + alpha*) - kappa (1 + xi)`.
    pub varsigma: f64,
}

impl RecurrenceParams {
    /// Validates the exponents; `local_check` adds the conditions needed by
    /// the local estimate.
    pub fn new(beta: f64, kappa: f64, xi: f64, gamma: f64, alpha_star: f64, local_check: bool) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(beta > 0.0 && beta < 1.0) {
            return bad(format!("beta {beta} outside (0, 1)"));
        }
        if !(kappa > 0.0 && kappa < beta) {
            return bad(format!("kappa {kappa} outside (0, beta)"));
        }
        if !(xi > 0.0 && xi < 1.0) {
            return bad(format!("xi {xi} outside (0, 1)"));
        }
        if kappa * (1.0 + xi) >= beta {
            return bad(format!("kappa (1 + xi) = {} not below beta", kappa * (1.0 + xi)));
        }
        let varsigma = 1.0 / (1.0 + alpha_star) - kappa * (1.0 + xi);
        if local_check {
            if varsigma <= beta {
                return bad(format!("varsigma {varsigma} not above beta {beta}"));
            }
            if gamma * (varsigma - beta) <= 1.0 {
                return bad(format!("gamma (varsigma - beta) = {} not above 1", gamma * (varsigma - beta)));
            }
        }
        Ok(RecurrenceParams {
            beta,
            kappa,
            xi,
            gamma,
            varsigma,
        })
    }

    /// `beta = 0.3, kappa = 0.2, xi = 0.05, gamma = 3`, with the local checks.
    pub fn standard(alpha_star: f64) -> Result<Self> {
        RecurrenceParams::new(0.3, 0.2, 0.05, 3.0, alpha_star, true)
    }

    /// `floor(j^(kappa (1 + xi)))`.
    pub fn horizon(&self, j: f64) -> usize {
        j.powf(self.kappa * (1.0 + self.xi)).floor() as usize
    }
}

/// A measured value with an a priori bound on its grid error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub value: f64,
    pub grid_error: f64,
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Branch code and displacement `T_n(x) - x` of one point.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Sample {
    code: u64,
    displacement: f64,
}

fn trace(maps: &[LsvMap], x0: f64) -> Sample {
    let mut x = x0;
    let mut d = CompensatedSum::default();
    let mut code = 0u64;
    for (i, map) in maps.iter().enumerate() {
        let right = x >= 0.5;
        if i < 64 {
            code |= (right as u64) << i;
        } else {
            code = code.rotate_left(5) ^ (right as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64;
        }
        let step = map.displacement(x);
        d.add(step);
        x = (x + step).clamp(0.0, 1.0);
    }
    Sample {
        code,
        displacement: d.value(),
    }
}

/// Displacement `T_n(x) - x` and its derivative `T_n'(x) - 1`.
fn displacement_with_slope(maps: &[LsvMap], x0: f64) -> (f64, f64) {
    let mut x = x0;
    let mut d = CompensatedSum::default();
    let mut slope = 1.0_f64;
    for map in maps {
        slope *= map.derivative(x);
        let step = map.displacement(x);
        d.add(step);
        x = (x + step).clamp(0.0, 1.0);
    }
    (d.value(), slope - 1.0)
}

/// Point in `[a, b]` where the nondecreasing displacement crosses `c`, by
/// Newton's method safeguarded with bisection; `d(a) < c <= d(b)` is assumed.
fn crossing(maps: &[LsvMap], c: f64, a: f64, b: f64, guess: f64, value_tol: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let mut x = if guess > a && guess < b { guess } else { 0.5 * (a + b) };
    for _ in 0..200 {
        let (d, slope) = displacement_with_slope(maps, x);
        let f = d - c;
        if f.abs() <= value_tol {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= ROOT_TOL {
            break;
        }
        let step = f / slope;
        let next = x - step;
        if step.abs() <= STEP_TOL && next >= lo && next <= hi {
            return next;
        }
        x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    0.5 * (lo + hi)
}

fn secant_guess(a: f64, b: f64, da: f64, db: f64, c: f64) -> f64 {
    if db > da {
        a + (c - da) / (db - da) * (b - a)
    } else {
        0.5 * (a + b)
    }
}

/// Piece of `[0, 1]` on which `T_n` is a single branch composition, so the
/// displacement is continuous and nondecreasing; or a leftover sliver of
/// width below the root tolerance around a branch change.
#[derive(Clone, Copy, Debug)]
enum Piece {
    Smooth {
        a: f64,
        b: f64,
        da: f64,
        db: f64,
        code: u64,
        // fixed point of T_n in the piece and the slope of the displacement there
        anchor: Option<(f64, f64)>,
    },
    Sliver { a: f64, b: f64, d_mid: f64 },
}

/// Grid strata of `[0, 1]` split at every branch change of `T_n`; built
/// once and reused across `eps`.
pub struct EnGrid {
    maps: Vec<LsvMap>,
    pieces: Vec<Piece>,
}

impl EnGrid {
    /// Samples `T_n` at `k / resolution` and bisects every stratum whose
    /// endpoints have different branch codes down to width `1e-13`.
    pub fn build(schedule: &ParameterSchedule, n: usize, resolution: usize) -> Result<Self> {
        if resolution < 2 || !resolution.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {resolution} must be even and at least 2"
            )));
        }
        let maps = schedule.maps(n)?;
        let points: Vec<f64> = (0..=resolution).map(|k| k as f64 / resolution as f64).collect();
        let samples: Vec<Sample> = points.par_iter().map(|&x| trace(&maps, x)).collect();
        let per_stratum: Vec<Vec<Piece>> = (0..resolution)
            .into_par_iter()
            .map(|k| {
                let mut out = Vec::new();
                split(&maps, points[k], points[k + 1], samples[k], samples[k + 1], &mut out);
                out
            })
            .collect();
        let mut pieces = Vec::new();
        for piece in per_stratum.into_iter().flatten() {
            push_merged(&mut pieces, piece);
        }
        pieces.par_iter_mut().for_each(|piece| {
            if let Piece::Smooth { a, b, da, db, anchor, .. } = piece {
                if *da < 0.0 && *db > 0.0 {
                    let x = crossing(&maps, 0.0, *a, *b, secant_guess(*a, *b, *da, *db, 0.0), f64::MIN_POSITIVE);
                    let (_, slope) = displacement_with_slope(&maps, x);
                    *anchor = Some((x, slope));
                }
            }
        });
        Ok(EnGrid { maps, pieces })
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }

    /// Number of single-branch pieces and slivers.
    pub fn piece_count(&self) -> usize {
        self.pieces.len()
    }

    /// `m(E_n(eps))`; the grid error is the total width of the slivers.
    pub fn measure(&self, eps: f64) -> GridMeasure {
        let (l, r, err) = self.measure_parts(eps);
        GridMeasure {
            value: l + r,
            grid_error: err,
        }
    }

    /// `(m(E_n(eps) ∩ [0, 1/2)), m(E_n(eps) ∩ [1/2, 1]))`.
    pub fn measure_split(&self, eps: f64) -> (f64, f64) {
        let (l, r, _) = self.measure_parts(eps);
        (l, r)
    }

    fn measure_parts(&self, eps: f64) -> (f64, f64, f64) {
        if eps >= 1.0 {
            return (0.5, 0.5, 0.0);
        }
        if !(eps >= 0.0) {
            return (0.0, 0.0, 0.0);
        }
        let maps = &self.maps;
        let parts: Vec<(f64, f64, f64)> = self
            .pieces
            .par_iter()
            .map(|piece| match *piece {
                Piece::Smooth { a, b, da, db, anchor, .. } => {
                    if db < -eps || da > eps {
                        return (a, 0.0, 0.0);
                    }
                    let tol = VALUE_TOL * eps;
                    let guess = |c: f64| match anchor {
                        Some((x, slope)) if slope > 0.0 => x + c / slope,
                        _ => secant_guess(a, b, da, db, c),
                    };
                    let lo = if da >= -eps { a } else { crossing(maps, -eps, a, b, guess(-eps), tol) };
                    let hi = if db <= eps { b } else { crossing(maps, eps, lo, b, guess(eps), tol) };
                    (a, (hi - lo).max(0.0), 0.0)
                }
                Piece::Sliver { a, b, d_mid } => (a, if d_mid.abs() <= eps { b - a } else { 0.0 }, b - a),
            })
            .collect();
        let mut left = 0.0;
        let mut right = 0.0;
        let mut err = 0.0;
        for (a, m, e) in parts {
            if a < 0.5 {
                left += m;
            } else {
                right += m;
            }
            err += e;
        }
        (left, right, err)
    }
}

/// Appends `piece`, fusing it with the previous piece when both lie in the
/// same cylinder.
fn push_merged(out: &mut Vec<Piece>, piece: Piece) {
    if let (Some(Piece::Smooth { b, db, code, .. }), Piece::Smooth { a: a2, b: b2, db: db2, code: c2, .. }) =
        (out.last_mut(), piece)
    {
        if *code == c2 && *b == a2 {
            *b = b2;
            *db = db2;
            return;
        }
    }
    out.push(piece);
}

fn split(maps: &[LsvMap], a: f64, b: f64, sa: Sample, sb: Sample, out: &mut Vec<Piece>) {
    if sa.code == sb.code {
        let piece = Piece::Smooth {
            a,
            b,
            da: sa.displacement,
            db: sb.displacement,
            code: sa.code,
            anchor: None,
        };
        push_merged(out, piece);
        return;
    }
    let mid = 0.5 * (a + b);
    if b - a <= ROOT_TOL || mid <= a || mid >= b {
        out.push(Piece::Sliver {
            a,
            b,
            d_mid: trace(maps, mid).displacement,
        });
        return;
    }
    if maps.len() <= 64 {
        let step = (sa.code ^ sb.code).trailing_zeros() as usize;
        if sa.code >> step & 1 == 0 {
            if let Some((lo, hi)) = branch_change(&maps[..step], a, b) {
                let (slo, shi) = (trace(maps, lo), trace(maps, hi));
                if lo > a {
                    split(maps, a, lo, sa, slo, out);
                }
                out.push(Piece::Sliver {
                    a: lo,
                    b: hi,
                    d_mid: trace(maps, 0.5 * (lo + hi)).displacement,
                });
                if hi < b {
                    split(maps, hi, b, shi, sb, out);
                }
                return;
            }
        }
    }
    let sm = trace(maps, mid);
    split(maps, a, mid, sa, sm, out);
    split(maps, mid, b, sm, sb, out);
}

/// Image of `x0` under `maps` and the derivative of that composition.
fn forward_with_slope(maps: &[LsvMap], x0: f64) -> (f64, f64) {
    let mut x = x0;
    let mut slope = 1.0_f64;
    for map in maps {
        slope *= map.derivative(x);
        x = (x + map.displacement(x)).clamp(0.0, 1.0);
    }
    (x, slope)
}

/// Bracket of width at most `ROOT_TOL` around the point of `[a, b]` where the
/// composition `prefix` crosses `1/2`; `a` must map below and `b` at or above.
fn branch_change(prefix: &[LsvMap], a: f64, b: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (a, b);
    let mut x = 0.5 * (a + b);
    let squeeze = 0.25 * ROOT_TOL;
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL {
            return Some((lo, hi));
        }
        let (y, slope) = forward_with_slope(prefix, x);
        if y < 0.5 {
            lo = x;
        } else {
            hi = x;
        }
        let next = x - (y - 0.5) / slope;
        x = if (next - x).abs() <= squeeze {
            // probe just past the root on the side that has not closed in yet
            if y < 0.5 { next + squeeze } else { next - squeeze }
        } else {
            next
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
    }
    None
}

/// `m(E_n(eps))` on a grid of `resolution` strata.
pub fn measure_en_eps(schedule: &ParameterSchedule, n: usize, eps: f64, resolution: usize) -> Result<GridMeasure> {
    Ok(EnGrid::build(schedule, n, resolution)?.measure(eps))
}

/// `min_{1 <= i <= horizon} |T_i(x) - x|`.
fn min_return(maps: &[LsvMap], x0: f64) -> f64 {
    let mut x = x0;
    let mut d = CompensatedSum::default();
    let mut best = f64::INFINITY;
    for map in maps {
        let step = map.displacement(x);
        d.add(step);
        x = (x + step).clamp(0.0, 1.0);
        best = best.min(d.value().abs());
    }
    best
}

fn count_fast_returns(maps: &[LsvMap], radius: f64, lo: f64, hi: f64, resolution: usize) -> (usize, usize) {
    let h = (hi - lo) / resolution as f64;
    let flags: Vec<bool> = (0..resolution)
        .into_par_iter()
        .map(|k| min_return(maps, lo + (k as f64 + 0.5) * h) <= radius)
        .collect();
    let count = flags.iter().filter(|&&f| f).count();
    let changes = flags.windows(2).filter(|w| w[0] != w[1]).count();
    (count, changes)
}

/// `m(E_j)` by a midpoint grid with `resolution` cells. Each change of
/// membership between neighbouring cells adds one cell to the error bound.
pub fn measure_ej(schedule: &ParameterSchedule, j: usize, params: &RecurrenceParams, resolution: usize) -> Result<GridMeasure> {
    measure_ej_with_horizon(schedule, j, params.horizon(j as f64), resolution)
}

/// `m(E_j)` with an explicit time horizon.
pub fn measure_ej_with_horizon(schedule: &ParameterSchedule, j: usize, horizon: usize, resolution: usize) -> Result<GridMeasure> {
    if j < 2 || resolution == 0 {
        return Err(Error::InvalidArgument(format!("need j >= 2 and a positive resolution, got {j}")));
    }
    if horizon == 0 {
        return Ok(GridMeasure {
            value: 0.0,
            grid_error: 0.0,
        });
    }
    let maps = schedule.maps(horizon)?;
    let (count, changes) = count_fast_returns(&maps, 2.0 / j as f64, 0.0, 1.0, resolution);
    Ok(GridMeasure {
        value: count as f64 / resolution as f64,
        grid_error: (changes + 1) as f64 / resolution as f64,
    })
}

/// One row of the local recurrence estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalRecurrence {
    pub j: usize,
    pub radius: f64,
    pub measured: f64,
    /// `2 j^(-gamma (1 + beta))`.
    pub bound: f64,
    pub pass: bool,
}

/// Measure of `E_{j^gamma}` inside the ball of radius `j^-gamma` around `zeta`,
/// sampled at `resolution` midpoints of the ball.
pub fn local_recurrence_at(
    schedule: &ParameterSchedule,
    zeta: f64,
    j: usize,
    params: &RecurrenceParams,
    resolution: usize,
) -> Result<LocalRecurrence> {
    if j < 2 || resolution == 0 {
        return Err(Error::InvalidArgument(format!("need j >= 2 and a positive resolution, got {j}")));
    }
    let big_j = (j as f64).powf(params.gamma);
    let radius = 1.0 / big_j;
    let lo = (zeta - radius).max(0.0);
    let hi = (zeta + radius).min(1.0);
    let horizon = params.horizon(big_j);
    let measured = if horizon == 0 || hi <= lo {
        0.0
    } else {
        let maps = schedule.maps(horizon)?;
        let (count, _) = count_fast_returns(&maps, 2.0 / big_j, lo, hi, resolution);
        count as f64 / resolution as f64 * (hi - lo)
    };
    let bound = 2.0 * (j as f64).powf(-params.gamma * (1.0 + params.beta));
    Ok(LocalRecurrence {
        j,
        radius,
        measured,
        bound,
        pass: measured <= bound,
    })
}

/// Row of a recurrence CSV: `x` is `j` or `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceRow {
    pub quantity: String,
    pub x: f64,
    pub measured: f64,
    pub bound: Option<f64>,
    pub pass: Option<bool>,
}

pub fn write_recurrence_csv<W: Write>(rows: &[RecurrenceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["quantity", "x", "measured", "bound", "pass"])?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            format!("{:e}", r.x),
            format!("{:e}", r.measured),
            r.bound.map(|b| format!("{b:e}")).unwrap_or_default(),
            r.pass.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(a: f64) -> ParameterSchedule {
        ParameterSchedule::constant(a).unwrap()
    }

    #[test]
    fn single_step_closed_forms() {
        let a = 0.1;
        let grid = EnGrid::build(&constant(a), 1, 1 << 12).unwrap();
        for &eps in &[0.3, 1e-2, 1e-4, 1e-7] {
            let (l, r) = grid.measure_split(eps);
            assert!((r - eps).abs() <= 1e-8, "{eps}: right {r}");
            let expected = (eps / 2f64.powf(a)).powf(1.0 / (1.0 + a));
            assert!((l - expected).abs() <= 1e-8, "{eps}: left {l} vs {expected}");
        }
    }

    #[test]
    fn vacuous_radius() {
        let grid = EnGrid::build(&constant(0.1), 5, 256).unwrap();
        assert_eq!(grid.measure(1.0).value, 1.0);
        assert_eq!(grid.measure(2.0).value, 1.0);
    }

    #[test]
    fn monotone_in_eps() {
        let grid = EnGrid::build(&constant(0.1), 5, 1 << 12).unwrap();
        let mut prev = 0.0;
        for k in (2..16).rev() {
            let m = grid.measure(2f64.powi(-k)).value;
            assert!(m >= prev - 1e-12);
            prev = m;
        }
    }

    #[test]
    fn compensated_displacement_near_zero() {
        let maps = constant(0.1).maps(30).unwrap();
        let x = 1e-12;
        let s = trace(&maps, x);
        let mut y = x;
        for m in &maps {
            y = m.apply(y);
        }
        assert!((s.displacement - (y - x)).abs() <= 1e-12 * (y - x));
        assert!(s.displacement > 0.0);
    }

    #[test]
    fn empty_horizon() {
        let p = RecurrenceParams::new(0.3, 0.2, 0.05, 3.0, 1.0 / 7.0, false).unwrap();
        // 2^0.21 < 2 so the horizon is 1; j = 1 is rejected
        assert_eq!(p.horizon(2.0), 1);
        let m = measure_ej_with_horizon(&constant(0.1), 4, 0, 100).unwrap();
        assert_eq!(m.value, 0.0);
        assert!(measure_ej(&constant(0.1), 1, &p, 100).is_err());
    }

    #[test]
    fn union_contains_first_set() {
        let s = constant(0.1);
        let p = RecurrenceParams::standard(1.0 / 7.0).unwrap();
        let j = 64;
        let ej = measure_ej(&s, j, &p, 1 << 16).unwrap();
        let e1 = measure_en_eps(&s, 1, 2.0 / j as f64, 1 << 16).unwrap();
        assert!(ej.value + ej.grid_error >= e1.value);
    }

    #[test]
    fn params_validation() {
        assert!(RecurrenceParams::new(0.5, 0.6, 0.05, 3.0, 1.0 / 7.0, false).is_err());
        assert!(RecurrenceParams::new(0.5, 0.48, 0.05, 3.0, 1.0 / 7.0, false).is_err());
        assert!(RecurrenceParams::new(0.9, 0.85, 0.05, 3.0, 1.0 / 7.0, false).is_ok());
        assert!(RecurrenceParams::new(0.9, 0.85, 0.05, 3.0, 1.0 / 7.0, true).is_err());
        assert!(RecurrenceParams::new(0.6, 0.2, 0.05, 3.0, 1.0 / 7.0, true).is_err());
        let p = RecurrenceParams::standard(1.0 / 7.0).unwrap();
        assert!((p.varsigma - (0.875 - 0.21)).abs() < 1e-12);
    }

    #[test]
    fn local_measure_is_bounded_by_ball() {
        let s = constant(0.1);
        let p = RecurrenceParams::standard(1.0 / 7.0).unwrap();
        let r = local_recurrence_at(&s, 1.0 / 2f64.sqrt(), 8, &p, 4096).unwrap();
        assert!(r.measured <= 2.0 * r.radius);
        assert!((r.bound - 2.0 * 8f64.powf(-3.9)).abs() < 1e-15);
    }
}

use std::sync::Arc;

use super::{Check, ExperimentConfig, ExperimentKind, ResultRow};
use crate::cache::DiskCache;
use crate::error::{Error, Result};
use crate::maps::{sequential_orbit, ParameterSchedule, Point};
use crate::mesh::{Density, Mesh};
use crate::montecarlo::{
    build_blocks, d0_mixing_gap, default_block_count, default_gap, dprime_sum, estimate_exceedances, estimate_pn,
};
use crate::recurrence::{
    local_recurrence_at, measure_ej, write_recurrence_csv, EnGrid, RecurrenceParams, RecurrenceRow,
};
use crate::rng::RngSpec;
use crate::stats::{combined_se, log_log_slope, EstimateWithCi};
use crate::thresholds::{density_ladder, Observable, ThresholdSchedule};
use crate::transfer::{cone_step_surrogate, loss_of_memory_distance, memory_decay_slope, ConeParams};

#[derive(Default)]
pub(super) struct Outcome {
    pub rows: Vec<ResultRow>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub artifacts: Vec<(String, String)>,
    pub samples: u64,
}

impl Outcome {
    fn check(&mut self, name: impl Into<String>, source: &str, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            source: source.into(),
            pass,
            detail,
        });
    }
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    kind: &'static str,
    schedule: ParameterSchedule,
    mesh: Arc<Mesh>,
    observable: Observable,
    rng: RngSpec,
    cache: Option<DiskCache>,
}

impl Context<'_> {
    fn ladder(&self, n: usize) -> Result<Vec<Density>> {
        match &self.cache {
            Some(c) => c.density_ladder(&self.schedule, &self.mesh, n, self.config.method),
            None => density_ladder(&self.schedule, &self.mesh, n, self.config.method),
        }
    }

    fn row(&self, quantity: &str) -> ResultRow {
        ResultRow {
            experiment: self.kind.to_string(),
            quantity: quantity.to_string(),
            n: None,
            tau: None,
            x: None,
            estimate: f64::NAN,
            se: None,
            target: None,
            pass: None,
        }
    }

    fn sorted_n(&self) -> Vec<usize> {
        let mut ns = self.config.n_values();
        ns.sort_unstable();
        ns.dedup();
        ns
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))
}

pub(super) fn run(config: &ExperimentConfig) -> Result<Outcome> {
    let ctx = Context {
        config,
        kind: config.kind.name(),
        schedule: config.schedule_config().build()?,
        mesh: config.mesh_spec().build()?,
        observable: Observable::new(config.observable.zeta, config.observable.form)?,
        rng: RngSpec::new(config.seed),
        cache: config.cache_dir.as_ref().map(DiskCache::open).transpose()?,
    };
    let mut out = Outcome::default();
    match config.kind {
        ExperimentKind::Evl => evl(&ctx, &mut out)?,
        ExperimentKind::Calibrate => calibrate(&ctx, &mut out)?,
        ExperimentKind::Dprime => dprime(&ctx, &mut out)?,
        ExperimentKind::D0 => d0(&ctx, &mut out)?,
        ExperimentKind::Decay => decay(&ctx, &mut out)?,
        ExperimentKind::Recurrence => recurrence(&ctx, &mut out)?,
        ExperimentKind::Orbit => orbit(&ctx, &mut out)?,
    }
    Ok(out)
}

fn evl(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let ns = ctx.sorted_n();
    let samples = ctx.config.samples();
    let tol = ctx.config.evl_tolerance;
    let ladder = ctx.ladder(*ns.last().expect("validated"))?;
    for tau in ctx.config.taus() {
        let target = (-tau).exp();
        let mut previous = None;
        let mut monotone = true;
        let mut last_ok = false;
        for &n in &ns {
            let ts = ThresholdSchedule::from_ladder(&ladder, &ctx.observable, tau, n, None)?;
            let est = estimate_pn(&ctx.schedule, &ts, &ctx.rng, samples)?;
            out.samples += samples;
            let err = (est.value - target).abs();
            last_ok = err <= tol;
            if let Some((prev_err, prev_est)) = previous {
                monotone &= err <= prev_err + 2.0 * combined_se(&prev_est, &est);
            }
            out.rows.push(ResultRow {
                n: Some(n),
                tau: Some(tau),
                estimate: est.value,
                se: Some(est.standard_error),
                target: Some(target),
                pass: Some(last_ok),
                ..ctx.row("P_n")
            });
            previous = Some((err, est));
        }
        let n_max = ns[ns.len() - 1];
        out.check(
            format!("evl-limit-tau{tau}"),
            "extreme value law: P_n -> exp(-tau)",
            last_ok,
            format!("|P_n - exp(-{tau})| <= {tol} at n = {n_max}"),
        );
        out.check(
            format!("evl-monotone-tau{tau}"),
            "extreme value law: error shrinks with n",
            monotone,
            "|P_n - exp(-tau)| nonincreasing in n up to 2 combined standard errors".into(),
        );
    }
    Ok(())
}

fn calibrate(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let ns = ctx.sorted_n();
    let samples = ctx.config.samples();
    let ladder = ctx.ladder(*ns.last().expect("validated"))?;
    let cone = ConeParams::new(ctx.config.cone_a, ctx.schedule.alpha_max())?;
    for &n in &ns {
        for tau in ctx.config.taus() {
            let ts = ThresholdSchedule::from_ladder(&ladder, &ctx.observable, tau, n, Some(&cone))?;

            let expected = tau / (2.0 * n as f64);
            let delta_ok = (ts.deltas[0] - expected).abs() <= 1e-12;
            out.rows.push(ResultRow {
                n: Some(n),
                tau: Some(tau),
                x: Some(0.0),
                estimate: ts.deltas[0],
                target: Some(expected),
                pass: Some(delta_ok),
                ..ctx.row("delta_0")
            });
            out.check(
                format!("delta0-n{n}-tau{tau}"),
                "uniform initial law: delta_{n,0} = tau/(2n)",
                delta_ok,
                format!("delta_0 = {:e}, tau/(2n) = {expected:e}", ts.deltas[0]),
            );

            let k = ctx.config.calibrate_indices.clamp(1, n);
            let mut indices: Vec<usize> = (0..k)
                .map(|j| if k == 1 { 0 } else { (j * (n - 1) + (k - 1) / 2) / (k - 1) })
                .collect();
            indices.dedup();
            let target = tau / n as f64;
            let ests = estimate_exceedances(&ctx.schedule, &ts, &indices, &ctx.rng, samples)?;
            out.samples += samples;
            let mut measured = vec![None; n];
            let mut all_ok = true;
            for (&i, est) in indices.iter().zip(&ests) {
                let ok = est.within_se(target, 3.0);
                all_ok &= ok;
                measured[i] = Some(est.value);
                out.rows.push(ResultRow {
                    n: Some(n),
                    tau: Some(tau),
                    x: Some(i as f64),
                    estimate: est.value,
                    se: Some(est.standard_error),
                    target: Some(target),
                    pass: Some(ok),
                    ..ctx.row("exceedance")
                });
            }
            out.check(
                format!("calibration-n{n}-tau{tau}"),
                "level calibration: m(X_i > u_{n,i}) = tau/n",
                all_ok,
                format!("{} sampled times within 3 standard errors of tau/n", indices.len()),
            );

            let (lo, hi) = ts.window.expect("cone supplied");
            out.check(
                format!("delta-window-n{n}-tau{tau}"),
                "density bounds: tau/(2C'n) <= delta_{n,i} <= tau/(2cn)",
                ts.all_in_window(),
                format!(
                    "window [{lo:e}, {hi:e}], radii in [{:e}, {:e}]",
                    ts.deltas.iter().cloned().fold(f64::INFINITY, f64::min),
                    ts.deltas.iter().cloned().fold(0.0, f64::max)
                ),
            );
            let csv = csv_string(|buf| ts.write_csv(Some(&measured), buf))?;
            out.artifacts.push((format!("thresholds-n{n}-tau{tau}.csv"), csv));
        }
    }
    Ok(())
}

fn dprime(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let ns = ctx.sorted_n();
    let samples = ctx.config.samples();
    let ex = ctx.config.exponents;
    let ladder = ctx.ladder(*ns.last().expect("validated"))?;
    for tau in ctx.config.taus() {
        let mut previous: Option<EstimateWithCi> = None;
        let mut monotone = true;
        for &n in &ns {
            let ts = ThresholdSchedule::from_ladder(&ladder, &ctx.observable, tau, n, None)?;
            let k_n = default_block_count(n, ex.beta);
            let blocks = build_blocks(&ts, k_n, default_gap(n, ex.kappa))?;
            let est = dprime_sum(&ctx.schedule, &ts, &blocks, &ctx.rng, samples)?.total;
            out.samples += samples;
            let step_ok = match &previous {
                Some(prev) => est.value <= prev.value + 2.0 * combined_se(prev, &est),
                None => true,
            };
            monotone &= step_ok;
            out.rows.push(ResultRow {
                n: Some(n),
                tau: Some(tau),
                x: Some(k_n as f64),
                estimate: est.value,
                se: Some(est.standard_error),
                target: Some(0.0),
                pass: Some(step_ok),
                ..ctx.row("dprime_sum")
            });
            previous = Some(est);
        }
        out.check(
            format!("dprime-trend-tau{tau}"),
            "anti-clustering: within-block pair sum decreases to 0",
            monotone,
            format!("sum nonincreasing along n up to 2 combined standard errors (beta = {})", ex.beta),
        );
    }
    Ok(())
}

fn d0(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let ns = ctx.sorted_n();
    let samples = ctx.config.samples();
    let [e_short, e_long] = ctx.config.d0_gap_exponents;
    let ladder = ctx.ladder(*ns.last().expect("validated"))?;
    for &n in &ns {
        for tau in ctx.config.taus() {
            let ts = ThresholdSchedule::from_ladder(&ladder, &ctx.observable, tau, n, None)?;
            let t_short = ((n as f64).powf(e_short).round() as usize).max(1);
            let t_long = ((n as f64).powf(e_long).round() as usize).max(t_short);
            if t_long >= n {
                return Err(Error::InvalidArgument(format!("gap {t_long} leaves no window before n = {n}")));
            }
            let ell = n - t_long;
            let mut gaps = Vec::new();
            for t in [t_short, t_long] {
                let g = d0_mixing_gap(&ctx.schedule, &ts, 0, t, ell, &ctx.rng, samples)?;
                out.samples += samples;
                out.rows.push(ResultRow {
                    n: Some(n),
                    tau: Some(tau),
                    x: Some(t as f64),
                    estimate: g.gap.value,
                    se: Some(g.gap.standard_error),
                    target: Some(0.0),
                    pass: None,
                    ..ctx.row("mixing_gap")
                });
                gaps.push(g.gap);
            }
            let ok = gaps[1].value <= gaps[0].value + 3.0 * combined_se(&gaps[0], &gaps[1]);
            out.check(
                format!("d0-trend-n{n}-tau{tau}"),
                "mixing: gap at the longer separation no larger",
                ok,
                format!(
                    "gap(t = {t_long}) = {:e} vs gap(t = {t_short}) = {:e}, window length {ell}",
                    gaps[1].value, gaps[0].value
                ),
            );
        }
    }
    Ok(())
}

fn decay(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let ns = ctx.sorted_n();
    let alpha = ctx.schedule.alpha_max();
    let f = Density::uniform(ctx.mesh.clone());
    let g = cone_step_surrogate(&ctx.mesh, ctx.config.decay_step, alpha)?;
    let lom = loss_of_memory_distance(&ctx.schedule, &f, &g, &ns, ctx.config.method)?;
    out.notes.extend(lom.cone_warnings.iter().cloned());
    let mut csv = String::from("n,distance,ln_distance\n");
    for ((&n, &d), &ln_d) in lom.ladder.iter().zip(&lom.distances).zip(&lom.ln_distances) {
        csv.push_str(&format!("{n},{d:e},{ln_d}\n"));
        out.rows.push(ResultRow {
            n: Some(n),
            x: Some(ln_d),
            estimate: d,
            ..ctx.row("l1_distance")
        });
    }
    out.artifacts.push(("decay.csv".into(), csv));
    out.check(
        "memory-strictly-decreasing",
        "loss of memory: distance decreases",
        lom.strictly_decreasing(),
        format!("{} ladder points", lom.ladder.len()),
    );
    if lom.ladder.len() >= 2 {
        let slope = memory_decay_slope(&lom.ladder, &lom.ln_distances, alpha)?;
        let bound = -(1.0 / alpha - 1.0) + 0.5;
        out.check(
            "memory-slope",
            "loss of memory: rate n^(1-1/alpha) (ln n)^(1/alpha)",
            slope <= bound,
            format!("fitted slope {slope:.4} after removing (ln n)^(1/alpha); bound {bound:.4}"),
        );
    }
    Ok(())
}

fn recurrence(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let rc = &ctx.config.recurrence;
    let alpha_star = ctx.schedule.alpha_star();
    let mut csv_rows = Vec::new();

    let eps: Vec<f64> = rc.eps_exponents.iter().map(|&k| 2f64.powi(-k)).collect();
    let slope_bound = 1.0 / (1.0 + alpha_star) - 0.15;
    for n in ctx.sorted_n() {
        let grid = EnGrid::build(&ctx.schedule, n, rc.resolution)?;
        let mut values = Vec::with_capacity(eps.len());
        for &e in &eps {
            let m = grid.measure(e);
            values.push(m.value);
            out.rows.push(ResultRow {
                n: Some(n),
                x: Some(e),
                estimate: m.value,
                se: Some(m.grid_error),
                ..ctx.row("E_n(eps)")
            });
            csv_rows.push(RecurrenceRow {
                quantity: format!("E_{n}(eps)"),
                x: e,
                measured: m.value,
                bound: None,
                pass: None,
            });
        }
        if eps.len() >= 2 {
            let slope = log_log_slope(&eps, &values);
            out.check(
                format!("recurrence-slope-n{n}"),
                "fast returns: m(E_n(eps)) <= C eps^(1/(1+alpha*))",
                slope >= slope_bound,
                format!("fitted eps-slope {slope:.4}; bound {slope_bound:.4}"),
            );
        }
        if n == 1 {
            let alpha = ctx.schedule.alpha(0)?;
            let mut ok = true;
            for &e in &eps {
                let (left, right) = grid.measure_split(e);
                let left_target = (e / 2f64.powf(alpha)).powf(1.0 / (1.0 + alpha));
                for (q, v, t) in [("E_1-left", left, left_target), ("E_1-right", right, e)] {
                    let pass = (v - t).abs() <= 1e-8;
                    ok &= pass;
                    out.rows.push(ResultRow {
                        n: Some(1),
                        x: Some(e),
                        estimate: v,
                        target: Some(t),
                        pass: Some(pass),
                        ..ctx.row(q)
                    });
                }
            }
            out.check(
                "recurrence-closed-form-n1",
                "one step: left branch (eps/2^alpha)^(1/(1+alpha)), right branch eps",
                ok,
                "both branches within 1e-8".into(),
            );
        }
    }

    let params = RecurrenceParams::new(rc.beta, rc.kappa, rc.xi, rc.gamma, alpha_star, rc.local_check)?;
    if !rc.j_exponents.is_empty() {
        let js: Vec<f64> = rc.j_exponents.iter().map(|&k| 2f64.powi(k as i32)).collect();
        let mut values = Vec::new();
        for &j in &js {
            let m = measure_ej(&ctx.schedule, j as usize, &params, rc.ej_resolution)?;
            values.push(m.value);
            out.rows.push(ResultRow {
                x: Some(j),
                estimate: m.value,
                se: Some(m.grid_error),
                ..ctx.row("E_j")
            });
            csv_rows.push(RecurrenceRow {
                quantity: "E_j".into(),
                x: j,
                measured: m.value,
                bound: None,
                pass: None,
            });
        }
        if js.len() >= 2 && values.iter().all(|&v| v > 0.0) {
            let slope = log_log_slope(&js, &values);
            let bound = -params.varsigma + 0.3;
            out.check(
                "ej-slope",
                "short returns: m(E_j) <= C j^-varsigma",
                slope <= bound,
                format!("fitted j-slope {slope:.4}; bound {bound:.4}"),
            );
        } else {
            out.notes.push("E_j vanished on the grid; slope not fitted".into());
        }
    }

    let mut local_ok = true;
    for &j in &rc.local_j {
        let l = local_recurrence_at(&ctx.schedule, ctx.observable.zeta, j, &params, rc.ej_resolution)?;
        local_ok &= l.pass;
        out.rows.push(ResultRow {
            x: Some(j as f64),
            estimate: l.measured,
            target: Some(l.bound),
            pass: Some(l.pass),
            ..ctx.row("local_recurrence")
        });
        csv_rows.push(RecurrenceRow {
            quantity: "local".into(),
            x: j as f64,
            measured: l.measured,
            bound: Some(l.bound),
            pass: Some(l.pass),
        });
    }
    if !rc.local_j.is_empty() {
        out.check(
            "local-recurrence",
            "local returns near zeta: measure <= 2 j^(-gamma (1+beta))",
            local_ok,
            format!("j in {:?}", rc.local_j),
        );
    }
    out.artifacts
        .push(("recurrence.csv".into(), csv_string(|buf| write_recurrence_csv(&csv_rows, buf))?));
    Ok(())
}

fn orbit(ctx: &Context, out: &mut Outcome) -> Result<()> {
    let n = *ctx.sorted_n().last().expect("validated");
    let x0 = Point::new(ctx.config.orbit_start)?;
    let path = sequential_orbit(&ctx.schedule, x0, n)?;
    let alphas = ctx.schedule.alphas(n)?;
    let mut csv = String::from("k,alpha,x\n");
    let mut near_zero = 0usize;
    for (k, p) in path.iter().enumerate() {
        let alpha = alphas.get(k).map(|a| a.to_string()).unwrap_or_default();
        csv.push_str(&format!("{k},{alpha},{}\n", p.get()));
        near_zero += (p.get() < 0.25) as usize;
    }
    out.artifacts.push(("orbit.csv".into(), csv));
    out.rows.push(ResultRow {
        n: Some(n),
        x: Some(x0.get()),
        estimate: path[n].get(),
        ..ctx.row("x_n")
    });
    out.rows.push(ResultRow {
        n: Some(n),
        estimate: near_zero as f64 / path.len() as f64,
        ..ctx.row("fraction_below_quarter")
    });
    Ok(())
}

//! Measures of the sets of points that return close to themselves.

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::recurrence::{local_recurrence_at, measure_ej, EnGrid, RecurrenceParams};
use lsv_evl::stats::log_log_slope;

fn main() -> lsv_evl::Result<()> {
    let schedule = ParameterSchedule::constant(0.1)?;
    let eps: Vec<f64> = (4..=14).map(|k| 2f64.powi(-k)).collect();
    for n in [1, 5, 10] {
        let grid = EnGrid::build(&schedule, n, 1 << 12)?;
        let m: Vec<f64> = eps.iter().map(|&e| grid.measure(e).value).collect();
        println!(
            "n = {n:2}: {} pieces, m(E_n(2^-4)) = {:.5e}, m(E_n(2^-14)) = {:.5e}, eps-slope {:.3}",
            grid.piece_count(),
            m[0],
            m[m.len() - 1],
            log_log_slope(&eps, &m)
        );
    }

    let params = RecurrenceParams::standard(schedule.alpha_star())?;
    for k in [5, 8, 11] {
        let j = 1usize << k;
        println!("m(E_{j}) = {:.4e}", measure_ej(&schedule, j, &params, 1 << 16)?.value);
    }
    let local = local_recurrence_at(&schedule, std::f64::consts::FRAC_1_SQRT_2, 8, &params, 1 << 16)?;
    println!("local: measured {:e}, bound {:e}", local.measured, local.bound);
    Ok(())
}

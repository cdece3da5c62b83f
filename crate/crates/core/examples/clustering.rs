//! Block structure, within-block exceedance pairs, and the mixing gap
//! between one exceedance and a later window of non-exceedances.

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::MeshSpec;
use lsv_evl::montecarlo::{build_blocks, d0_mixing_gap, default_block_count, default_gap, dprime_sum};
use lsv_evl::rng::RngSpec;
use lsv_evl::thresholds::{build_threshold_schedule, Observable};

fn main() -> lsv_evl::Result<()> {
    let n = 1000;
    let schedule = ParameterSchedule::constant(0.1)?;
    let mesh = MeshSpec::default().build()?;
    let obs = Observable::log(std::f64::consts::FRAC_1_SQRT_2)?;
    let ts = build_threshold_schedule(&schedule, &obs, 1.0, n, &mesh, None)?;
    let rng = RngSpec::new(5);

    let (beta, kappa) = (0.5, 0.4);
    let blocks = build_blocks(&ts, default_block_count(n, beta), default_gap(n, kappa))?;
    println!("k_n = {}, lengths = {:?}", blocks.k_n, blocks.lengths);
    println!("block masses = {:?}", blocks.block_masses);
    let d = dprime_sum(&schedule, &ts, &blocks, &rng, 20_000)?;
    println!("within-block pair sum = {:.4} +- {:.4}", d.total.value, d.total.standard_error);

    for t in [16, 251] {
        let g = d0_mixing_gap(&schedule, &ts, 0, t, n - 251, &rng, 20_000)?;
        println!("mixing gap at t = {t:3}: {:.3e} +- {:.1e}", g.gap.value, g.gap.standard_error);
    }
    Ok(())
}

//! Correlation of two indicators along the sequential system, computed by
//! pushing densities and by simulation.

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::MeshSpec;
use lsv_evl::montecarlo::{correlation_dc, correlation_dc_mc, Indicator};
use lsv_evl::rng::RngSpec;
use lsv_evl::transfer::PushMethod;

fn main() -> lsv_evl::Result<()> {
    let schedule = ParameterSchedule::periodic(vec![0.05, 0.12])?;
    let mesh = MeshSpec::default().build()?;
    let phi = Indicator { lo: 0.0, hi: 0.25 };
    let psi = Indicator { lo: 0.0, hi: 0.25 };
    let rng = RngSpec::new(3);
    for t in [0, 1, 2, 4, 8, 16, 32] {
        let exact = correlation_dc(&schedule, &phi, &psi, 3, t, &mesh, PushMethod::Auto)?;
        let mc = correlation_dc_mc(&schedule, &phi, &psi, 3, t, &rng, 100_000)?;
        println!("t = {t:2}  transfer = {exact:+.5}  simulated = {:+.5} +- {:.5}", mc.value, mc.standard_error);
    }
    Ok(())
}

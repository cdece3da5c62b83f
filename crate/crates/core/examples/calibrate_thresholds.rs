//! Calibrates time-dependent exceedance radii so that each time carries
//! mass tau/n, and prints the admissible window from the density bounds.

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::MeshSpec;
use lsv_evl::thresholds::{build_threshold_schedule, Observable};
use lsv_evl::transfer::{ConeParams, DEFAULT_CONE_A};

fn main() -> lsv_evl::Result<()> {
    let (n, tau) = (500, 1.0);
    let mesh = MeshSpec::default().build()?;
    let schedule = ParameterSchedule::constant(0.1)?;
    let obs = Observable::log(std::f64::consts::FRAC_1_SQRT_2)?;
    let cone = ConeParams::new(DEFAULT_CONE_A, 0.1)?;
    let ts = build_threshold_schedule(&schedule, &obs, tau, n, &mesh, Some(&cone))?;

    for i in [0, 1, 2, 10, 100, 499] {
        println!(
            "i = {i:3}  delta = {:.9e}  level u = {:.6}  mass = {:.12e}",
            ts.deltas[i], ts.levels[i], ts.masses[i]
        );
    }
    let (lo, hi) = ts.window.expect("cone supplied");
    println!("tau/(2n) = {:e}", tau / (2.0 * n as f64));
    println!("window [{lo:.4e}, {hi:.4e}], all radii inside: {}", ts.all_in_window());
    ts.write_csv(None, std::io::sink())?;
    Ok(())
}

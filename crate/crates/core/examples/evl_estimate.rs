//! Monte Carlo estimate of the probability of no exceedance up to time n
//! for random exponents, compared with exp(-tau).

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::MeshSpec;
use lsv_evl::montecarlo::estimate_pn;
use lsv_evl::rng::RngSpec;
use lsv_evl::thresholds::{density_ladder, Observable, ThresholdSchedule};
use lsv_evl::transfer::PushMethod;

fn main() -> lsv_evl::Result<()> {
    let schedule = ParameterSchedule::iid_uniform(0.01, 0.14, 7)?;
    let mesh = MeshSpec::default().build()?;
    let obs = Observable::log(std::f64::consts::FRAC_1_SQRT_2)?;
    let n = 1000;
    let ladder = density_ladder(&schedule, &mesh, n, PushMethod::Auto)?;
    let rng = RngSpec::new(11);

    for tau in [0.5, 1.0, 2.0] {
        let ts = ThresholdSchedule::from_ladder(&ladder, &obs, tau, n, None)?;
        let p = estimate_pn(&schedule, &ts, &rng, 20_000)?;
        println!(
            "tau = {tau}: P_n = {:.4} +- {:.4}  exp(-tau) = {:.4}",
            p.value,
            p.standard_error,
            (-tau).exp()
        );
    }
    Ok(())
}

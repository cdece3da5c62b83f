//! Iterates a sequence of LSV maps with different exponents and inverts one
//! step on the left branch.

use lsv_evl::maps::{sequential_orbit, LsvMap, ParameterSchedule, Point};

fn main() -> lsv_evl::Result<()> {
    let schedule = ParameterSchedule::periodic(vec![0.05, 0.1, 0.13])?;
    let orbit = sequential_orbit(&schedule, Point::new(0.3)?, 12)?;
    for (k, x) in orbit.iter().enumerate() {
        let alpha = if k < 12 { format!("{:.2}", schedule.alpha(k)?) } else { "-".into() };
        println!("k = {k:2}  alpha_k = {alpha:>4}  x = {:.12}", x.get());
    }

    let map = LsvMap::new(0.1)?;
    let y = map.apply(0.2);
    println!("T(0.2) = {y:.15}, left inverse recovers {:.15}", map.left_inverse(y));
    Ok(())
}

//! Pushes the uniform density through 200 maps, compares the Ulam matrix
//! with exact preimage pushes, and checks the cone and density bounds.

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::{Density, MeshSpec};
use lsv_evl::transfer::{cone_check, density_bounds_check, push_density, ConeParams, PushMethod, DEFAULT_CONE_A};

fn main() -> lsv_evl::Result<()> {
    let mesh = MeshSpec::default().build()?;
    let schedule = ParameterSchedule::constant(0.1)?;
    let start = Density::uniform(mesh.clone());
    println!("mesh: {} cells, smallest width {:e}", mesh.len(), mesh.width(0));

    let ulam = push_density(&schedule, &start, 200, PushMethod::Ulam)?;
    let exact = push_density(&schedule, &start, 20, PushMethod::Exact)?;
    let gap = ulam[20].as_cells().sub(exact[20].as_cells())?.l1_norm();
    println!("L1 gap between Ulam and exact pushes after 20 steps: {gap:e}");

    let cone = ConeParams::new(DEFAULT_CONE_A, 0.1)?;
    for n in [1, 10, 50, 200] {
        let d = &ulam[n];
        let member = cone_check(d.as_cells(), &cone).member;
        let bounds = density_bounds_check(d.as_cells(), &cone);
        println!(
            "n = {n:3}  mass = {:.12}  f(0.5) = {:.6}  cone = {member}  bounds = {}",
            d.total_mass(),
            d.eval(0.5),
            bounds.lower_ok && bounds.upper_ok
        );
    }
    Ok(())
}

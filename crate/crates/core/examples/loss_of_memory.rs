//! L1 distance between two pushed cone densities of equal mass, on a mesh
//! fine enough near 0 to show the polynomial rate.

use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::{Density, Grading, MeshSpec};
use lsv_evl::transfer::{cone_step_surrogate, loss_of_memory_distance, memory_decay_slope, PushMethod};

fn main() -> lsv_evl::Result<()> {
    let alpha = 0.1;
    let mesh = MeshSpec {
        cells: 1024,
        grading: Grading::Geometric {
            ratio: 0.97,
            min_width: 1e-40,
        },
    }
    .build()?;
    let schedule = ParameterSchedule::constant(alpha)?;
    let f = Density::uniform(mesh.clone());
    let g = cone_step_surrogate(&mesh, 0.5, alpha)?;

    let ladder: Vec<usize> = (6..=12).map(|k| 1 << k).collect();
    let lom = loss_of_memory_distance(&schedule, &f, &g, &ladder, PushMethod::Auto)?;
    for (n, d) in lom.ladder.iter().zip(&lom.distances) {
        println!("n = {n:5}  ||Pi_n f - Pi_n g||_1 = {d:.6e}");
    }
    let slope = memory_decay_slope(&lom.ladder, &lom.ln_distances, alpha)?;
    println!("slope after removing (ln n)^(1/alpha): {slope:.3} (rate exponent {:.1})", 1.0 - 1.0 / alpha);
    Ok(())
}

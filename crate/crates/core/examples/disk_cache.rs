//! Stores a density ladder in the checksummed cache and reads it back.

use lsv_evl::cache::DiskCache;
use lsv_evl::maps::ParameterSchedule;
use lsv_evl::mesh::MeshSpec;
use lsv_evl::transfer::PushMethod;

fn main() -> lsv_evl::Result<()> {
    let dir = std::env::temp_dir().join("lsv-evl-cache-example");
    let cache = DiskCache::open(&dir)?;
    let schedule = ParameterSchedule::constant(0.1)?;
    let mesh = MeshSpec::default().build()?;

    let t = std::time::Instant::now();
    let first = cache.density_ladder(&schedule, &mesh, 300, PushMethod::Auto)?;
    let cold = t.elapsed();
    let t = std::time::Instant::now();
    let second = cache.density_ladder(&schedule, &mesh, 300, PushMethod::Auto)?;
    println!("cold {cold:?}, warm {:?}", t.elapsed());
    let same = first.iter().zip(&second).all(|(a, b)| a.values() == b.values());
    println!("identical after reload: {same}; entries in {}", dir.display());
    Ok(())
}

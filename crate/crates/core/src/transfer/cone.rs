use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{CellFunction, Mesh};

pub const DEFAULT_CONE_A: f64 = 20.0;

const REL_TOL: f64 = 1e-10;

/// Constants of the cone of decreasing densities with `x^(alpha+1) f`
/// increasing and `f <= a x^-alpha int f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub a: f64,
    pub alpha: f64,
    pub c_lower: f64,
    pub c_upper: f64,
}

impl ConeParams {
    pub fn new(a: f64, alpha: f64) -> Result<Self> {
        if !(a > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cone needs a > 0 and alpha in (0, 1), got a = {a}, alpha = {alpha}"
            )));
        }
        let c_lower = a.min((alpha * (1.0 + alpha) / a.powf(alpha)).powf(1.0 / (1.0 - alpha)));
        Ok(ConeParams {
            a,
            alpha,
            c_lower,
            c_upper: a,
        })
    }

    /// Upper envelope `a x^-alpha` (times the mass) at `x`.
    pub fn upper_at(&self, x: f64, mass: f64) -> f64 {
        self.a * x.powf(-self.alpha) * mass
    }

    /// Average of the upper envelope over cell `k`.
    fn upper_on_cell(&self, mesh: &Mesh, k: usize, mass: f64) -> f64 {
        if k > 0 {
            return self.upper_at(mesh.left(k), mass);
        }
        let b = mesh.left(1);
        self.a * mass * b.powf(-self.alpha) / (1.0 - self.alpha)
    }
}

/// Point `r` of cell `[a, b]` where `r^-(1+alpha)` equals the cell average of
/// `x^-(1+alpha)`; cell averages of that profile times `r^(1+alpha)` are
/// exactly constant.
fn power_representative(a: f64, b: f64, alpha: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    // avg = (a^-alpha - b^-alpha) / (alpha (b - a)), written without cancellation
    let log_ratio = (-(b - a) / b).ln_1p();
    let diff = -a.powf(-alpha) * (alpha * log_ratio).exp_m1();
    let avg = diff / (alpha * (b - a));
    avg.powf(-1.0 / (1.0 + alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub nonneg: bool,
    pub decreasing: bool,
    pub x_power_increasing: bool,
    pub domination: bool,
    pub member: bool,
    /// First cell violating each failed condition, in the order above.
    pub first_violations: [Option<usize>; 4],
}

/// Tests cone membership on cell averages, with relative tolerance `1e-10`.
///
/// Monotonicity of `x^(alpha+1) f` is evaluated at the representative points
/// of [`power_representative`] so the extremal profile `x^-(1+alpha)` passes.
/// Domination is tested at left endpoints; the first cell is compared with
/// the average of the envelope.
pub fn cone_check(f: &CellFunction, params: &ConeParams) -> ConeReport {
    let mesh = f.mesh();
    let v = f.values();
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let slack = REL_TOL * scale;

    let nonneg = v.iter().position(|&x| x < 0.0);
    let decreasing = (1..v.len()).find(|&k| v[k] > v[k - 1] + slack);

    let weighted: Vec<f64> = (0..v.len())
        .map(|k| power_representative(mesh.left(k), mesh.left(k + 1), params.alpha).powf(1.0 + params.alpha) * v[k])
        .collect();
    let x_power = (1..v.len()).find(|&k| weighted[k] < weighted[k - 1] * (1.0 - REL_TOL) - f64::MIN_POSITIVE);

    let mass = f.integral();
    let domination = (0..v.len()).find(|&k| v[k] > params.upper_on_cell(mesh, k, mass) * (1.0 + REL_TOL));

    let first_violations = [nonneg, decreasing, x_power, domination];
    let ok = first_violations.map(|c| c.is_none());
    ConeReport {
        nonneg: ok[0],
        decreasing: ok[1],
        x_power_increasing: ok[2],
        domination: ok[3],
        member: ok.iter().all(|&b| b),
        first_violations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// `min_k f_k - c`.
    pub lower_margin: f64,
    /// `min_k (a x_k^-alpha - f_k)` over cell left endpoints.
    pub upper_margin: f64,
    pub worst_lower_cell: usize,
    pub worst_upper_cell: usize,
}

/// Checks `c <= f <= a x^-alpha` on every cell, with `f` a pushforward of the
/// unit density. Values are cell averages.
pub fn density_bounds_check(f: &CellFunction, params: &ConeParams) -> BoundsReport {
    let mesh = f.mesh();
    let v = f.values();
    let (mut worst_lower_cell, mut lower_margin) = (0, f64::INFINITY);
    let (mut worst_upper_cell, mut upper_margin) = (0, f64::INFINITY);
    for (k, &x) in v.iter().enumerate() {
        let lo = x - params.c_lower;
        if lo < lower_margin {
            lower_margin = lo;
            worst_lower_cell = k;
        }
        let up = params.upper_on_cell(mesh, k, 1.0) - x;
        if up < upper_margin {
            upper_margin = up;
            worst_upper_cell = k;
        }
    }
    BoundsReport {
        lower_ok: lower_margin >= 0.0,
        upper_ok: upper_margin >= 0.0,
        lower_margin,
        upper_margin,
        worst_lower_cell,
        worst_upper_cell,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;

    #[test]
    fn lower_constant_closed_form() {
        let p = ConeParams::new(20.0, 0.1).unwrap();
        let expected = (0.1 * 1.1 / 20f64.powf(0.1)).powf(1.0 / 0.9);
        assert!((p.c_lower - expected).abs() <= 1e-12 * expected);
        assert_eq!(p.c_upper, 20.0);
        assert!(ConeParams::new(0.0, 0.1).is_err());
        // small a: the minimum picks a
        assert_eq!(ConeParams::new(1e-3, 0.5).unwrap().c_lower, 1e-3);
    }

    #[test]
    fn constants_are_members() {
        let mesh = MeshSpec::default().build().unwrap();
        let p = ConeParams::new(1.0, 1.0 / 7.0).unwrap();
        let r = cone_check(&CellFunction::constant(mesh, 1.0), &p);
        assert!(r.member, "{r:?}");
    }

    #[test]
    fn increasing_function_fails() {
        let mesh = MeshSpec::default().build().unwrap();
        let p = ConeParams::new(20.0, 0.1).unwrap();
        let r = cone_check(&CellFunction::from_fn(mesh, &|x: f64| x), &p);
        assert!(!r.decreasing && !r.member);
        assert!(r.nonneg);
    }

    #[test]
    fn extremal_profile_passes_power_test() {
        let mesh = MeshSpec::default().build().unwrap();
        let alpha = 0.1;
        let f = CellFunction::from_fn(mesh, &|x: f64| (0.3 / x.max(0.3)).powf(1.0 + alpha));
        let r = cone_check(&f, &ConeParams::new(20.0, alpha).unwrap());
        assert!(r.x_power_increasing, "{r:?}");
    }

    #[test]
    fn representative_lies_in_cell() {
        for &(a, b) in &[(1e-9, 2e-9), (0.5, 0.5009765625), (0.9, 1.0)] {
            let r = power_representative(a, b, 1.0 / 7.0);
            assert!(r > a && r < b, "{a} {b} {r}");
        }
    }

    #[test]
    fn unit_density_bounds() {
        let mesh = MeshSpec::default().build().unwrap();
        let p = ConeParams::new(20.0, 1.0 / 7.0).unwrap();
        let r = density_bounds_check(&CellFunction::constant(mesh, 1.0), &p);
        assert!(r.lower_ok && r.upper_ok);
        assert!((r.lower_margin - (1.0 - p.c_lower)).abs() < 1e-15);
    }
}

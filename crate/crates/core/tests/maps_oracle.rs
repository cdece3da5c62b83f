//! Values frozen from 50-digit evaluations in `oracle/lsv_mpmath.py`.

#![allow(clippy::excessive_precision)]

use lsv_evl::maps::{lsv_apply, lsv_derivative, lsv_left_inverse, sequential_orbit, LsvMap, ParameterSchedule, Point};
use lsv_evl::mesh::Mesh;
use lsv_evl::recurrence::EnGrid;
use lsv_evl::transfer::{pf_apply, push_fn_exact, ConeParams};
use lsv_evl::mesh::CellFunction;

fn close(got: f64, want: f64, rel: f64) {
    assert!(
        (got - want).abs() <= rel * want.abs(),
        "got {got:.17e}, want {want:.17e} (rel tol {rel:e})"
    );
}

/// Masses are differences of points in `[0, 1]`, so a few ulps of 1 is the
/// best achievable absolute accuracy.
fn close_mass(got: f64, want: f64) {
    let tol = 4.0 * f64::EPSILON + 1e-12 * want.abs();
    assert!((got - want).abs() <= tol, "got {got:.17e}, want {want:.17e}");
}

fn p(x: f64) -> Point {
    Point::new(x).unwrap()
}

#[test]
fn one_step_values() {
    close(lsv_apply(1.0 / 7.0, p(0.25)).unwrap().get(), 0.476430916065976667898543218304, 1e-15);
    close(lsv_derivative(1.0 / 7.0, p(0.25)).unwrap(), 2.0351127591587504818219118551, 1e-15);
    close(lsv_left_inverse(1.0 / 7.0, p(0.47643)).unwrap().get(), 0.249999549869641144615996086445, 1e-14);
}

#[test]
fn two_step_orbit() {
    let s = ParameterSchedule::constant(1.0 / 7.0).unwrap();
    let orbit = sequential_orbit(&s, p(0.25), 2).unwrap();
    close(orbit[2].get(), 0.949586763247886566956921659571, 1e-14);
}

#[test]
fn branch_boundary_belongs_to_the_right_branch() {
    let m = LsvMap::new(0.1).unwrap();
    assert_eq!(m.apply(0.5), 0.0);
    assert_eq!(m.derivative(0.5), 2.0);
    assert_eq!(m.apply(1.0), 1.0);
    assert_eq!(m.apply(0.0), 0.0);
}

#[test]
fn cone_lower_constants() {
    close(ConeParams::new(20.0, 0.1).unwrap().c_lower, 0.0617052154279004862668295776875, 1e-13);
    close(ConeParams::new(20.0, 1.0 / 7.0).unwrap().c_lower, 0.0732607272460971229521612127388, 1e-13);
}

#[test]
fn one_step_recurrence_left_part() {
    let s = ParameterSchedule::constant(0.1).unwrap();
    let grid = EnGrid::build(&s, 1, 1 << 10).unwrap();
    for (k, want) in [
        (4, 0.0755055902752779570805776381548),
        (8, 0.00607189953816765359209099386069),
        (14, 0.000138465884057063303343810758413),
    ] {
        let eps = 2f64.powi(-k);
        let (left, right) = grid.measure_split(eps);
        close(left, want, 1e-10);
        close(right, eps, 1e-12);
    }
}

fn oracle_mesh() -> std::sync::Arc<Mesh> {
    Mesh::from_bounds(vec![0.0, 1e-6, 0.3, 0.3 + 1.0 / 64.0, 0.7, 0.75, 1.0]).unwrap()
}

#[test]
fn pushforward_cell_masses() {
    let mesh = oracle_mesh();
    let one = CellFunction::constant(mesh.clone(), 1.0);
    let p1 = pf_apply(0.1, &one).unwrap();
    close_mass(p1.interval_mass(0.0, 1e-6), 0.00000129176306536321431055557595894);
    close_mass(p1.interval_mass(0.3, 0.3 + 1.0 / 64.0), 0.0156916623778594030861476082018);

    let constant = ParameterSchedule::constant(0.1).unwrap();
    let p2 = push_fn_exact(&constant, &|_| 1.0, 2, &mesh).unwrap();
    close_mass(p2.interval_mass(0.3, 0.3 + 1.0 / 64.0), 0.0157383291946964883296056224476);

    let mixed = ParameterSchedule::explicit(vec![0.05, 0.12]).unwrap();
    let p2 = push_fn_exact(&mixed, &|_| 1.0, 2, &mesh).unwrap();
    close_mass(p2.interval_mass(0.7, 0.75), 0.0487787805605462545700646963098);
}

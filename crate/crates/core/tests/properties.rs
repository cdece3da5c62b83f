use std::sync::Arc;

use lsv_evl::maps::{LsvMap, ParameterSchedule};
use lsv_evl::mesh::{gauss8, CellFunction, Density, Mesh, MeshSpec};
use lsv_evl::montecarlo::build_blocks;
use lsv_evl::recurrence::EnGrid;
use lsv_evl::thresholds::{calibrate_delta, Observable, ThresholdSchedule};
use lsv_evl::transfer::{cone_check, pf_apply, push_fn_exact, BumpFunction, ConeParams, DEFAULT_CONE_A};
use proptest::prelude::*;

const ALPHA_STAR: f64 = 1.0 / 7.0;

fn small_mesh() -> Arc<Mesh> {
    MeshSpec {
        cells: 128,
        ..MeshSpec::default()
    }
    .build()
    .unwrap()
}

fn positive_cells(mesh: &Arc<Mesh>, raw: &[f64]) -> CellFunction {
    let values = (0..mesh.len()).map(|k| raw[k % raw.len()]).collect();
    CellFunction::new(mesh.clone(), values).unwrap()
}

proptest! {
    #[test]
    fn map_stays_in_unit_interval(alpha in 1e-3..ALPHA_STAR, x in 0.0..=1.0f64) {
        let m = LsvMap::new(alpha).unwrap();
        let y = m.apply(x);
        prop_assert!((0.0..=1.0 + 1e-15).contains(&y));
        prop_assert!(m.derivative(x) >= 1.0);
    }

    #[test]
    fn left_inverse_inverts(alpha in 1e-3..ALPHA_STAR, x in 0.0..0.5f64) {
        let m = LsvMap::new(alpha).unwrap();
        let back = m.left_inverse(m.apply(x));
        prop_assert!((back - x).abs() <= 16.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE), "{x} -> {back}");
    }

    #[test]
    fn iid_schedule_is_reproducible_and_in_range(lo in 0.0..0.07f64, width in 0.001..0.07f64, seed: u64) {
        let hi = lo + width;
        let a = ParameterSchedule::iid_uniform(lo, hi, seed).unwrap();
        let b = ParameterSchedule::iid_uniform(lo, hi, seed).unwrap();
        let xs = a.alphas(200).unwrap();
        prop_assert_eq!(&xs, &b.alphas(200).unwrap());
        prop_assert!(xs.iter().all(|&x| lo <= x && x <= hi));
        prop_assert_eq!(a.alpha(57).unwrap(), xs[57]);
    }

    #[test]
    fn exponents_at_the_cap_are_rejected(alpha in ALPHA_STAR..1.0f64) {
        prop_assert!(ParameterSchedule::constant(alpha).is_err());
    }

    #[test]
    fn transfer_conserves_mass_and_sign(alpha in 1e-3..ALPHA_STAR, raw in prop::collection::vec(0.0..10.0f64, 1..40)) {
        let mesh = small_mesh();
        let f = positive_cells(&mesh, &raw);
        let pf = pf_apply(alpha, &f).unwrap();
        prop_assert!((pf.integral() - f.integral()).abs() <= 1e-10 * f.integral().max(1.0));
        prop_assert!(pf.values().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn transfer_is_dual_to_composition(alpha in 1e-3..ALPHA_STAR, k in 1.0..6.0f64, raw in prop::collection::vec(0.0..2.0f64, 1..20)) {
        let mesh = small_mesh();
        let f = positive_cells(&mesh, &raw);
        let g = move |x: f64| (k * x).sin() + x * x;
        let map = LsvMap::new(alpha).unwrap();
        let pf = pf_apply(alpha, &f).unwrap();
        let lhs: f64 = (0..mesh.len()).map(|j| pf.values()[j] * gauss8(&g, mesh.left(j), mesh.left(j + 1))).sum();
        let rhs: f64 = (0..mesh.len())
            .map(|j| f.values()[j] * gauss8(&|x: f64| g(map.apply(x)), mesh.left(j), mesh.left(j + 1)))
            .sum();
        // P f is projected on the mesh, so the pairing with g carries the projection error
        prop_assert!((lhs - rhs).abs() <= 1e-2 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cone_is_invariant(alpha in 1e-3..ALPHA_STAR, s in 0.05..1.0f64, tail in 0.0..ALPHA_STAR) {
        // cell averages of the exact push; a push of cell averages would add projection kinks
        let mesh = small_mesh();
        let params = ConeParams::new(DEFAULT_CONE_A, ALPHA_STAR).unwrap();
        let profile = move |x: f64| if x <= s { 1.0 } else { (s / x).powf(1.0 + tail) };
        let f = CellFunction::from_fn(mesh.clone(), &profile);
        prop_assume!(cone_check(&f, &params).member);
        let schedule = ParameterSchedule::constant(alpha).unwrap();
        let pf = push_fn_exact(&schedule, &profile, 1, &mesh).unwrap();
        let report = cone_check(&pf, &params);
        prop_assert!(report.member, "{report:?}");
    }

    #[test]
    fn calibrated_ball_carries_target_mass(tau in 0.1..3.0f64, n in 50usize..5000, zeta in 0.05..0.95f64, alpha in 0.01..0.14f64) {
        let mesh = MeshSpec::default().build().unwrap();
        let d = Density::from_pushforward(pf_apply(alpha, &CellFunction::constant(mesh, 1.0)).unwrap()).unwrap();
        let r = calibrate_delta(&d, zeta, tau, n).unwrap();
        let mass = d.interval_mass((zeta - r).max(0.0), (zeta + r).min(1.0));
        let target = tau / n as f64;
        prop_assert!((mass - target).abs() <= 1e-10 * target, "{mass} vs {target}");
    }

    #[test]
    fn blocks_partition_time_with_balanced_mass(n in 20usize..600, tau in 0.1..3.0f64, k in 1usize..20) {
        prop_assume!(k <= n);
        let mesh = small_mesh();
        let schedule = ParameterSchedule::constant(0.1).unwrap();
        let ladder = lsv_evl::thresholds::density_ladder(&schedule, &mesh, n, Default::default()).unwrap();
        let obs = Observable::log(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let ts = ThresholdSchedule::from_ladder(&ladder, &obs, tau, n, None).unwrap();
        let b = build_blocks(&ts, k, 1).unwrap();
        prop_assert_eq!(b.lengths.iter().sum::<usize>(), n);
        prop_assert!(b.lengths.iter().all(|&l| l >= 1));
        let slack = tau / n as f64 * (1.0 + 1e-9);
        for m in &b.block_masses {
            prop_assert!((m - tau / k as f64).abs() <= slack, "{m} vs {}", tau / k as f64);
        }
    }

    #[test]
    fn recurrence_measure_is_monotone_in_eps(n in 1usize..7, alpha in 1e-3..ALPHA_STAR, e1 in 1e-5..0.3f64, e2 in 1e-5..0.3f64) {
        let schedule = ParameterSchedule::constant(alpha).unwrap();
        let grid = EnGrid::build(&schedule, n, 256).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(grid.measure(lo).value <= grid.measure(hi).value + 1e-15);
    }

    #[test]
    fn bump_stays_in_unit_interval(a in 0.1..0.4f64, len in 0.05..0.4f64, delta in 0.001..0.09f64, x in 0.0..=1.0f64) {
        let b = BumpFunction::new(a, a + len, delta).unwrap();
        let v = b.eval(x);
        prop_assert!((0.0..=1.0).contains(&v));
        if x >= a && x <= a + len {
            prop_assert_eq!(v, 1.0);
        }
        if x < a - delta || x > a + len + delta {
            prop_assert_eq!(v, 0.0);
        }
    }
}

proptest! {
    #[test]
    fn config_survives_toml_round_trip(kind in 0usize..7, seed: u64, samples in 0u64..1_000_000, cells in 64usize..4096) {
        use lsv_evl::experiment::{ExperimentConfig, ExperimentKind};
        let mut config = ExperimentConfig::for_kind(ExperimentKind::ALL[kind]);
        config.seed = seed;
        config.samples = Some(samples);
        config.mesh = Some(MeshSpec { cells, ..MeshSpec::default() });
        let text = config.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back.to_toml().unwrap(), text);
        prop_assert_eq!(back.digest().unwrap(), config.digest().unwrap());
    }
}

use nevlab::maps::{standard_exhaustion, DivisorSpec, MapSpec};
use nevlab::nevanlinna::{
    characteristic, d_mass_ratio, d_mass_ratio_direct, CountMode, DefectReport, Schedule, WeightKind,
};
use nevlab::quad::QuadPlan;
use nevlab::C64;
use proptest::prelude::*;

#[test]
fn direct_and_series_mass_ratios_agree() {
    let exh = standard_exhaustion("logAbs", 1).unwrap();
    let map = MapSpec::power(2).unwrap();
    let plan = QuadPlan::grid(100_000);
    let schedule = Schedule::linear(0.5, 2.0, 4).unwrap();
    let s0 = characteristic(&map, &exh, 0, &schedule, WeightKind::D, &plan).unwrap();
    let s1 = characteristic(&map, &exh, 1, &schedule, WeightKind::D, &plan).unwrap();
    for &r in schedule.radii() {
        let a = d_mass_ratio(&s1, &s0, r).unwrap();
        let b = d_mass_ratio_direct(&map, &exh, 1, r, &plan).unwrap();
        let tol = 3.0 * (a.stderr + b.stderr) + 1e-6 * a.value.abs();
        assert!((a.value - b.value).abs() <= tol, "r = {r}: {} vs {}", a.value, b.value);
    }
}

#[test]
fn infinity_is_fully_deficient_for_polynomials() {
    let exh = standard_exhaustion("logAbs", 1).unwrap();
    let map = MapSpec::power(3).unwrap();
    let plan = QuadPlan::grid(40_000);
    let schedule = Schedule::linear(1.0, 4.0, 4).unwrap();
    let s1 = characteristic(&map, &exh, 1, &schedule, WeightKind::Ddc, &plan).unwrap();
    for divisor in [DivisorSpec::infinity(1), DivisorSpec::value(C64::new(0.4, -0.2))] {
        let report = DefectReport::compute(&map, &exh, &divisor, &s1, CountMode::ArgumentPrinciple, &plan).unwrap();
        report.check_invariants().unwrap();
        if divisor == DivisorSpec::infinity(1) {
            assert!(
                report.delta.iter().all(|d| (d - 1.0).abs() <= 1e-9),
                "{:?}",
                report.delta
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn characteristics_are_monotone(
        d in 1u32..=4,
        k in 1usize..=2,
        id in prop::sample::select(vec!["logAbs", "ballLog"]),
    ) {
        let exh = standard_exhaustion(id, k).unwrap();
        let map = if k == 1 {
            MapSpec::power(d).unwrap()
        } else {
            let mut c = vec![0.0; d as usize + 1];
            c[d as usize] = 1.0;
            MapSpec::polyk(vec![c.clone(), c]).unwrap()
        };
        let lo = exh.r0() + 0.2;
        let hi = exh.r_max().min(exh.r0() + 4.0) - 0.1;
        let schedule = Schedule::linear(lo, hi, 6).unwrap();
        for j in 0..=k {
            let s = characteristic(&map, &exh, j, &schedule, WeightKind::Ddc, &QuadPlan::grid(8_000)).unwrap();
            s.check_invariants().unwrap();
            for i in 0..s.radii.len() {
                prop_assert!(s.t[i] >= -3.0 * s.t_err[i] - 1e-12);
                if i > 0 {
                    prop_assert!(s.big_t[i] >= s.big_t[i - 1] - 3.0 * s.big_t_err[i] - 1e-12);
                }
            }
        }
    }
}

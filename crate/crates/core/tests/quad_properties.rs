use std::f64::consts::PI;

use nevlab::maps::standard_exhaustion;
use nevlab::quad::{integrate_sublevel, QuadPlan};
use nevlab::C64;
use proptest::prelude::*;

fn bump(z: &[C64]) -> f64 {
    let s: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    1.0 / (1.0 + s).powi(2)
}

#[test]
fn sublevel_volume_of_the_disk() {
    let exh = standard_exhaustion("logAbs", 1).unwrap();
    for r in [-1.0, 0.0, 0.5, 1.5] {
        let q = integrate_sublevel(|_: &[C64]| 1.0, &exh, r, &QuadPlan::grid(20_000)).unwrap();
        let exact = PI * (2.0 * r).exp();
        assert!(
            (q.value - exact).abs() <= 1e-9 * exact,
            "r = {r}: {} vs {exact}",
            q.value
        );
    }
}

#[test]
fn monte_carlo_error_decays_like_inverse_square_root() {
    let exh = standard_exhaustion("logAbs", 2).unwrap();
    let budgets = [10_000usize, 100_000, 1_000_000];
    let errs: Vec<f64> = budgets
        .iter()
        .map(|&b| {
            integrate_sublevel(|z: &[C64]| bump(z), &exh, 1.0, &QuadPlan::monte_carlo(b, 7))
                .unwrap()
                .stderr
        })
        .collect();
    let xs: Vec<f64> = budgets.iter().map(|&b| (b as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}, errors {errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sublevel_integrals_grow_with_the_radius(
        id in prop::sample::select(vec!["logAbs", "ballLog"]),
        k in 1usize..=2,
        monte_carlo in any::<bool>(),
    ) {
        let exh = standard_exhaustion(id, k).unwrap();
        let (lo, hi) = (exh.r0() + 0.1, exh.r_max().min(exh.r0() + 6.0) - 0.1);
        let plan = if monte_carlo { QuadPlan::monte_carlo(4_000, 3) } else { QuadPlan::grid(4_000) };
        let mut last = 0.0;
        for i in 0..12 {
            let r = lo + (hi - lo) * i as f64 / 11.0;
            let q = integrate_sublevel(|z: &[C64]| bump(z), &exh, r, &plan).unwrap();
            prop_assert!(q.value >= 0.0);
            prop_assert!(q.value >= last - 3.0 * q.stderr - 1e-12, "{id} k={k} r={r}: {} < {last}", q.value);
            last = q.value;
        }
    }
}

use nevlab::maps::{catalog, standard_exhaustion, MapParams, MapSpec};
use nevlab::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn maps() -> Vec<MapSpec> {
    let p = |d: Option<i64>, n: Option<f64>, coeffs: Option<Vec<Vec<f64>>>| MapParams {
        d,
        n,
        coeffs,
        value: None,
    };
    vec![
        catalog("power", &p(Some(3), None, None)).unwrap(),
        catalog("exp", &p(None, None, None)).unwrap(),
        catalog("expScaled", &p(None, Some(2.0), None)).unwrap(),
        catalog("expCurve", &p(None, None, None)).unwrap(),
        catalog("poly", &p(None, None, Some(vec![vec![-1.0, 0.0, 0.0, 1.0]]))).unwrap(),
        catalog(
            "polyk",
            &p(None, None, Some(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]])),
        )
        .unwrap(),
        catalog("diskCover", &p(None, None, None)).unwrap(),
        catalog("scaleUp", &p(None, Some(2.0), None)).unwrap(),
        catalog("scaleDown", &p(None, Some(2.0), None)).unwrap(),
    ]
}

/// A probe inside the domain: radius below 0.9 for the disk.
fn probe(map: &MapSpec, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut z: Vec<C64> = (0..map.k())
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    if !map.contains(&z) {
        let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let target = 0.9 * rng.random::<f64>();
        z.iter_mut().for_each(|c| *c *= target / n);
    }
    z
}

#[test]
fn jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    for map in maps() {
        for _ in 0..50 {
            let z = probe(&map, &mut rng);
            // undo the overflow rescaling so differences see one representative
            let (_, jac, log_s) = map.eval_with_scale(&z);
            let jac = jac.map(|c| c * (-log_s).exp());
            for q in 0..map.k() {
                let shift = |s: f64| {
                    let mut w = z.clone();
                    w[q] += C64::new(s, 0.0);
                    let (f, _, log_s) = map.eval_with_scale(&w);
                    f.into_iter().map(|c| c * (-log_s).exp()).collect::<Vec<_>>()
                };
                let (plus, minus) = (shift(h), shift(-h));
                for i in 0..=map.m() {
                    let fd = (plus[i] - minus[i]) / (2.0 * h);
                    let scale = jac[(i, q)].norm().max(1.0);
                    assert!((fd - jac[(i, q)]).norm() <= 1e-6 * scale, "{} at {z:?}", map.id());
                }
            }
        }
    }
}

#[test]
fn catalog_maps_are_nondegenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for map in maps() {
        let full = (0..1000)
            .filter(|_| {
                let z = probe(&map, &mut rng);
                let svd = map.pullback_fs(&z).coeff().clone().svd(false, false);
                let top = svd.singular_values.max();
                svd.singular_values
                    .iter()
                    .filter(|s| **s > 1e-12 * top.max(1e-300))
                    .count()
                    == map.k()
                    && top > 0.0
            })
            .count();
        assert!(full >= 990, "{}: rank k at {full}/1000 probes", map.id());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exhaustions_increase_along_rays(
        id in prop::sample::select(vec!["logAbs", "ballLog", "puncturedDisk"]),
        k in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let k = if id == "puncturedDisk" { 1 } else { k };
        let exh = standard_exhaustion(id, k).unwrap();
        prop_assert!(exh.check_invariants(seed).is_ok());
    }
}

//! Acceptance suite. Every criterion prints one PASS/FAIL line with the
//! observed numbers; a FAIL is reported, not raised, so the suite always runs
//! to completion.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use nevlab::currents::{brody_detector, build_current, ddc_bound, weighted_preimage_mass, BrodyVerdict, MomentVector};
use nevlab::forms::{fs_form_at, mixed_wedge_density, ChartPoint, HermitianForm};
use nevlab::maps::{catalog, standard_exhaustion, DivisorSpec, MapParams, MapSpec};
use nevlab::nevanlinna::{
    characteristic, count_preimages, counting_function, ddc_mass_ratio, defect_suite, fmt_residual, CountMode,
    DefectReport, DiscreteMeasure, Schedule, WeightKind,
};
use nevlab::quad::QuadPlan;
use nevlab::scenario::{run_with_threads, ScenarioConfig};
use nevlab::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String), String>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn map(id: &str, params: MapParams) -> MapSpec {
    catalog(id, &params).expect("catalog map")
}

fn power(d: i64) -> MapSpec {
    map(
        "power",
        MapParams {
            d: Some(d),
            ..Default::default()
        },
    )
}

fn scaled(id: &str, n: f64) -> MapSpec {
    map(
        id,
        MapParams {
            n: Some(n),
            ..Default::default()
        },
    )
}

fn poly(coeffs: &[f64]) -> MapSpec {
    map(
        "poly",
        MapParams {
            coeffs: Some(vec![coeffs.to_vec()]),
            ..Default::default()
        },
    )
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------- 1

fn random_hermitian(k: usize, rng: &mut ChaCha8Rng) -> HermitianForm {
    let mut m = DMatrix::<C64>::zeros(k, k);
    for i in 0..k {
        m[(i, i)] = c(rng.sample(StandardNormal), 0.0);
        for j in i + 1..k {
            let v = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    HermitianForm::new(m).expect("hermitian by construction")
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    if n == 0 {
        return vec![(vec![], 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            // inserting n−1 at `pos` moves it past n−1−pos entries
            let sign = if (n - 1 - pos).is_multiple_of(2) { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

/// `k!·D(A₁,…,A_k)` by full expansion: row `i` taken from `A_{π(i)}`,
/// summed over all assignments `π` and all Leibniz permutations `σ`.
/// Returns the value and the sum of absolute terms.
fn mixed_discriminant_expansion(list: &[&DMatrix<C64>]) -> (f64, f64) {
    let k = list.len();
    let perms = permutations(k);
    let (mut value, mut scale) = (C64::new(0.0, 0.0), 0.0);
    for (pi, _) in &perms {
        for (sigma, sign) in &perms {
            let term = (0..k).fold(C64::new(*sign, 0.0), |acc, i| acc * list[pi[i]][(i, sigma[i])]);
            value += term;
            scale += term.norm();
        }
    }
    (value.re, scale)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in [2usize, 3] {
        for trial in 0..100 {
            let forms: Vec<HermitianForm> = (0..k).map(|_| random_hermitian(k, &mut rng)).collect();
            // alternate distinct forms with a repeated first form
            let (args, list): (Vec<(&HermitianForm, usize)>, Vec<&DMatrix<C64>>) = if trial % 2 == 0 {
                (
                    forms.iter().map(|f| (f, 1)).collect(),
                    forms.iter().map(|f| f.coeff()).collect(),
                )
            } else {
                let mut l = vec![forms[0].coeff(); k - 1];
                l.push(forms[1].coeff());
                (vec![(&forms[0], k - 1), (&forms[1], 1)], l)
            };
            let got = mixed_wedge_density(&args, k).map_err(err)? / (2.0 / PI).powi(k as i32);
            let (want, scale) = mixed_discriminant_expansion(&list);
            worst = worst.max((got - want).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    Ok((worst < 1e-10, format!("max relative deviation {worst:.2e} (tol 1e-10)")))
}

// ---------------------------------------------------------------- 2

/// `∫_{ℙᵐ} ωᵐ` in the affine chart by importance sampling with the proposal
/// `w = s·Z'/Z₀`, `Z` standard Gaussian in `ℂ^{m+1}`, whose density is
/// `s^{−2m} q(w/s)` with `q(w) = m!/(πᵐ (1 + |w|²)^{m+1})`.
fn fs_volume(m: usize, samples: usize, seed: u64) -> Result<(f64, f64), String> {
    let s: f64 = 1.3;
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let q = |w2: f64| fact / (PI.powi(m as i32) * (1.0 + w2).powi(m as i32 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let z: Vec<C64> = (0..=m)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let w: Vec<C64> = z[1..].iter().map(|x| x / z[0] * s).collect();
        let w2: f64 = w.iter().map(|x| x.norm_sqr()).sum();
        let proposal = s.powi(-2 * m as i32) * q(w2 / (s * s));
        let form = fs_form_at(&ChartPoint::new(0, w).map_err(err)?);
        let density = mixed_wedge_density(&[(&form, m)], m).map_err(err)?;
        let x = density / proposal;
        sum += x;
        sum2 += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    Ok((mean, ((sum2 / n - mean * mean) / n).sqrt()))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let (v1, e1) = fs_volume(1, 1_000_000, 2)?;
    let t1 = t.elapsed();
    let t = Instant::now();
    let (v2, e2) = fs_volume(2, 1_000_000, 3)?;
    let t2 = t.elapsed();
    let pass = (v1 - 1.0).abs() <= 1e-3
        && (v2 - 1.0).abs() <= 1e-2
        && t1 < Duration::from_secs(5)
        && t2 < Duration::from_secs(30);
    Ok((
        pass,
        format!(
            "P1: {v1:.6} ± {e1:.1e} in {:.2}s; P2: {v2:.6} ± {e2:.1e} in {:.2}s",
            t1.as_secs_f64(),
            t2.as_secs_f64()
        ),
    ))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let exh = standard_exhaustion("logAbs", 1).map_err(err)?;
    let sched = Schedule::linear(1.0, 6.0, 11).map_err(err)?;
    let plan = QuadPlan::grid(400_000);
    let mut worst: f64 = 0.0;
    let mut t0_exact = true;
    for d in [2i64, 3] {
        let m = power(d);
        let t1 = characteristic(&m, &exh, 1, &sched, WeightKind::Ddc, &plan).map_err(err)?;
        let t0 = characteristic(&m, &exh, 0, &sched, WeightKind::Ddc, &plan).map_err(err)?;
        t0_exact &= t0.t.iter().all(|&v| v == 1.0);
        for (r, t) in t1.radii.iter().zip(&t1.t) {
            let x = (2.0 * d as f64 * r).exp();
            worst = worst.max(rel(*t, d as f64 * x / (1.0 + x)));
        }
    }
    Ok((
        worst < 0.01 && t0_exact,
        format!("max relative error of t1 {worst:.2e} (tol 1e-2); t0 identically 1: {t0_exact}"),
    ))
}

// ---------------------------------------------------------------- 4

const EXP_BUDGET: usize = 4_000_000;

fn criterion_4() -> Outcome {
    let exp = map("exp", MapParams::default());
    let exh = standard_exhaustion("logAbs", 1).map_err(err)?;
    let sched = Schedule::linear(4.0, 6.0, 9).map_err(err)?;
    let plan = QuadPlan::grid(EXP_BUDGET);
    let t1 = characteristic(&exp, &exh, 1, &sched, WeightKind::Ddc, &plan).map_err(err)?;
    let t0 = characteristic(&exp, &exh, 0, &sched, WeightKind::Ddc, &plan).map_err(err)?;
    let scaled: Vec<f64> = t1.radii.iter().zip(&t1.big_t).map(|(r, t)| t * PI / r.exp()).collect();
    let j1: Vec<f64> = sched
        .radii()
        .iter()
        .map(|&r| ddc_mass_ratio(&t1, &t0, r).map(|v| v.value))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let in_band = scaled.iter().all(|v| (0.95..=1.05).contains(v));
    let decreasing = j1.windows(2).all(|w| w[1] < w[0]);
    let last = *j1.last().expect("nonempty");
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    Ok((
        in_band && decreasing && last < 1e-2,
        format!("T1*pi/e^r in [{lo:.4}, {hi:.4}]; J1 decreasing: {decreasing}; J1(6) = {last:.2e}"),
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let m = poly(&[-1.0, 0.0, 0.0, 1.0]);
    let exh = standard_exhaustion("logAbs", 1).map_err(err)?;
    let sched = Schedule::linear(2.0, 6.0, 9).map_err(err)?;
    let plan = QuadPlan::grid(400_000);
    let t1 = characteristic(&m, &exh, 1, &sched, WeightKind::Ddc, &plan).map_err(err)?;
    let t_max = *t1.big_t.last().expect("nonempty");
    let targets = DiscreteMeasure::uniform_values(10, 5).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (d, _) in targets.atoms() {
        let rep = DefectReport::compute(&m, &exh, d, &t1, CountMode::ArgumentPrinciple, &plan).map_err(err)?;
        let res = fmt_residual(&rep);
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let sd = (res.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / res.len() as f64).sqrt();
        worst = worst.max(sd);
    }
    Ok((
        worst < 0.01 * t_max,
        format!("max residual std {worst:.3e} vs 1% of T1(6) = {:.3e}", 0.01 * t_max),
    ))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let log_abs = standard_exhaustion("logAbs", 1).map_err(err)?;
    let ball = standard_exhaustion("ballLog", 1).map_err(err)?;
    let plane = Schedule::linear(0.5, 4.0, 8).map_err(err)?;
    let disk = Schedule::linear(-3.0, -0.5, 8).map_err(err)?;
    let cases = [
        (power(2), &log_abs, &plane),
        (map("exp", MapParams::default()), &log_abs, &plane),
        (scaled("expScaled", 2.0), &log_abs, &plane),
        (map("expCurve", MapParams::default()), &log_abs, &plane),
        (poly(&[-1.0, 0.0, 0.0, 1.0]), &log_abs, &plane),
        (scaled("scaleUp", 2.0), &log_abs, &plane),
        (scaled("scaleDown", 2.0), &log_abs, &plane),
        (map("diskCover", MapParams::default()), &ball, &disk),
    ];
    let plan = QuadPlan::grid(2_000_000);
    let (mut train, mut test) = (0.0f64, 0.0f64);
    let mut per_map = Vec::new();
    for (m, exh, sched) in &cases {
        let rep = ddc_bound(m, exh, 1, 12, sched, &plan).map_err(err)?;
        train = train.max(rep.fitted_c);
        test = test.max(rep.test_max);
        per_map.push(format!("{} {:.3}/{:.3}", rep.map_id, rep.fitted_c, rep.test_max));
    }
    Ok((
        test <= 1.2 * train,
        format!(
            "train C = {train:.4}, test max = {test:.4} (limit +20%); {}",
            per_map.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let exh = standard_exhaustion("logAbs", 1).map_err(err)?;
    let fs = MomentVector::fubini_study(1);
    let plan = QuadPlan::grid(400_000);
    let mut pass = true;
    let mut detail = Vec::new();
    for m in [map("exp", MapParams::default()), power(3)] {
        let d: Vec<f64> = [3.0, 4.0, 5.0]
            .iter()
            .map(|&r| {
                build_current(&m, &exh, 1, r, WeightKind::Ddc, &plan).map(|c| c.normalize().moments().distance(&fs))
            })
            .collect::<Result<_, _>>()
            .map_err(err)?;
        pass &= d[2] < 0.05 && d[1] < d[0] && d[2] < d[1];
        detail.push(format!("{}: {:.4} {:.4} {:.4}", m.id(), d[0], d[1], d[2]));
    }
    Ok((
        pass,
        format!("FS moment distance at r = 3, 4, 5: {}", detail.join("; ")),
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let m = power(2);
    let exh = standard_exhaustion("logAbs", 1).map_err(err)?;
    let sched = Schedule::linear(1.0, 5.0, 9).map_err(err)?;
    let plan = QuadPlan::grid(200_000);
    let t1 = characteristic(&m, &exh, 1, &sched, WeightKind::Ddc, &plan).map_err(err)?;
    let t0 = characteristic(&m, &exh, 0, &sched, WeightKind::Ddc, &plan).map_err(err)?;
    let nu = DiscreteMeasure::uniform_values(50, 8).map_err(err)?;
    let suite = defect_suite(&m, &exh, &nu, &t1, &t0, &plan).map_err(err)?;
    let bound_everywhere = suite
        .mean_abs_defect
        .iter()
        .zip(&suite.rate)
        .all(|(d, r)| *d <= 1.2 * suite.fitted_c * r);
    let inf = DefectReport::compute(
        &m,
        &exh,
        &DivisorSpec::infinity(1),
        &t1,
        CountMode::ArgumentPrinciple,
        &plan,
    )
    .map_err(err)?;
    let inf_ok = inf.delta.iter().all(|d| (d - 1.0).abs() <= 0.02);
    let tails = suite.tail_ratios();
    let tails_ok = tails.iter().all(|t| t.is_some_and(|v| (1.5..=2.5).contains(&v)));
    let fmt_tail: Vec<String> = tails
        .iter()
        .map(|t| t.map_or("none".to_string(), |v| format!("{v:.2}")))
        .collect();
    Ok((
        bound_everywhere && inf_ok && tails_ok,
        format!(
            "defect bound (C = {:.3}) at every r: {bound_everywhere}; delta(inf) in [{:.4}, {:.4}]; \
             tail ratio eps 0.2/0.4 per r: [{}] (required [1.5, 2.5])",
            suite.fitted_c,
            inf.delta.iter().copied().fold(f64::INFINITY, f64::min),
            inf.delta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            fmt_tail.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let ball = standard_exhaustion("ballLog", 1).map_err(err)?;
    let sched = Schedule::linear(-3.0, -1.0, 5).map_err(err)?;
    let plan = QuadPlan::grid(100_000);
    let ns = [1.0, 2.0, 4.0, 8.0, 16.0];
    let c_scale = 2.0f64;
    let up: Vec<MapSpec> = ns.iter().map(|&n| scaled("scaleUp", n)).collect();
    let down: Vec<MapSpec> = ns.iter().map(|&n| scaled("scaleDown", n)).collect();
    let rep_up = brody_detector(&up, &ball, c_scale, &sched, &plan).map_err(err)?;
    let rep_down = brody_detector(&down, &ball, c_scale, &sched, &plan).map_err(err)?;
    let witness = rep_up.degrees[0].witness.2;
    let up_ok = matches!(rep_up.verdict, BrodyVerdict::DdcLimit { .. });
    // FS area of the image of the disc of radius e^s under z/n
    let exact = ns
        .iter()
        .flat_map(|n| sched.radii().iter().map(move |r| (*r - c_scale.ln(), *n)))
        .map(|(s, n)| {
            let x = (2.0 * s).exp() / (n * n);
            x / (1.0 + x)
        })
        .fold(0.0, f64::max);
    let (down_ok, bound) = match rep_down.verdict {
        BrodyVerdict::VolumeBound { bound } => (rel(bound, exact) <= 0.05, bound),
        _ => (false, f64::NAN),
    };
    Ok((
        up_ok && down_ok,
        format!(
            "n*z: dd^c branch {up_ok}, witness ratio {witness:.3} (threshold 0.05); \
             z/n: volume branch {down_ok}, bound {bound:.5} vs closed form {exact:.5}"
        ),
    ))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let m = power(3);
    let exh = standard_exhaustion("logAbs", 1).map_err(err)?;
    let sched = Schedule::linear(2.0, 5.0, 7).map_err(err)?;
    let plan = QuadPlan::grid(20_000);
    let targets = DiscreteMeasure::uniform_values(5, 10).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (d, _) in targets.atoms() {
        let DivisorSpec::Hyperplane { a } = d else {
            return Err("value divisor is a hyperplane".into());
        };
        let w = -a[0] / a[1];
        let roots: Vec<Vec<C64>> = (0..3)
            .map(|i| vec![w.powf(1.0 / 3.0) * C64::from_polar(1.0, 2.0 * PI * i as f64 / 3.0)])
            .collect();
        let curve = counting_function(&m, &exh, d, &sched, CountMode::ArgumentPrinciple, &plan).map_err(err)?;
        for (r, n) in curve.radii.iter().zip(&curve.big_n) {
            worst = worst.max(rel(*n, weighted_preimage_mass(&exh, &roots, *r)));
        }
    }
    Ok((worst < 0.01, format!("max relative gap {worst:.2e} (tol 1e-2)")))
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Outcome {
    let m = map(
        "polyk",
        MapParams {
            coeffs: Some(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]),
            ..Default::default()
        },
    );
    let exh = standard_exhaustion("logAbs", 2).map_err(err)?;
    let plan = QuadPlan::grid(100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let b = c(rng.sample(StandardNormal), rng.sample(StandardNormal));
        // preimages have norm (|a| + |b|)^{1/2}; count well outside it
        let s = 0.5 * (a.norm() + b.norm()).ln() + 1.0;
        let p = DivisorSpec::point(vec![c(1.0, 0.0), a, b]).map_err(err)?;
        let n = count_preimages(&m, &exh, &p, s, CountMode::SmoothedPl, &plan).map_err(err)?;
        let e = (n.raw - 4.0).abs();
        worst = worst.max(e);
        good += usize::from(n.count == 4 && e < 0.2);
    }
    Ok((
        good >= 19,
        format!("{good}/20 targets count 4 within 0.2; worst pre-rounding error {worst:.3e}"),
    ))
}

// ---------------------------------------------------------------- 12

const EXP_SCENARIO: &str = r#"
name = "exp-growth"
seed = 12
exhaustion = "logAbs"
degrees = [0, 1]
analyses = ["characteristics", "massRatios"]

[map]
id = "exp"

[schedule]
min = 4.0
max = 6.0
count = 9

[quad]
strategy = "radialGrid"
budget = 4000000
"#;

fn criterion_12() -> Outcome {
    let cfg = ScenarioConfig::from_toml(EXP_SCENARIO).map_err(err)?;
    let dir = tempfile::tempdir().map_err(err)?;
    let mut reports = Vec::new();
    for threads in [1usize, 4, 16] {
        let out = dir.path().join(format!("t{threads}"));
        run_with_threads(&cfg, &out, Some(threads)).map_err(err)?;
        reports.push(std::fs::read(out.join("report.json")).map_err(err)?);
    }
    let same = reports.windows(2).all(|w| w[0] == w[1]);
    Ok((
        same,
        format!(
            "report.json identical for 1, 4, 16 threads: {same} ({} bytes)",
            reports[0].len()
        ),
    ))
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("mixed discriminant oracle", 1, criterion_1),
        ("Fubini-Study normalization", 35, criterion_2),
        ("characteristics of z^d", 30, criterion_3),
        ("exponential map growth", 60, criterion_4),
        ("first main theorem residual", 60, criterion_5),
        ("dd^c bound stability", 300, criterion_6),
        ("equidistribution of currents", 60, criterion_7),
        ("defect suite", 120, criterion_8),
        ("normal-family dichotomy", 60, criterion_9),
        ("preimage counting identity", 30, criterion_10),
        ("smoothed point counting", 180, criterion_11),
        ("determinism across threads", 120, criterion_12),
    ];
    let mut passed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && secs <= *limit as f64, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        passed += usize::from(ok);
        println!(
            "criterion {:>2} {}: {} ({detail}) [{secs:.1}s of {limit}s]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {passed}/{} PASS", criteria.len());
}

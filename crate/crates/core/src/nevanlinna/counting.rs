use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::fit::cumulative_trapezoid;
use super::{index_of, CharacteristicSeries, Schedule, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::forms::alt::WedgeEvaluator;
use crate::forms::{fs_potential_gradient, fs_pullback};
use crate::maps::{DivisorSpec, ExhaustionKind, ExhaustionSpec, MapSpec};
use crate::quad::{boundary_nodes, integrate_boundary, QuadPlan};
use crate::C64;

const AP_START: usize = 64;
const AP_MAX: usize = 1 << 20;
const AP_TOL: f64 = 1e-8;
const PANEL_DEPTH: usize = 48;
const CONTOUR_ZERO: f64 = 1e-12;
const PERTURB: f64 = 1e-6;
const MAX_ATTEMPTS: usize = 5;
const CONFIDENCE_LIMIT: f64 = 0.1;
const SMOOTHING: [f64; 3] = [1e-2, 1e-3, 1e-4];
const AP_STEP: f64 = 1.0 / 256.0;
const SMOOTHED_STEP: f64 = 1.0 / 16.0;

/// How `n(D, s)` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CountMode {
    /// Winding number of `⟨φ, a⟩` around `∂B_s` (curves only).
    ArgumentPrinciple,
    /// Boundary integral of `d^c v_ε ∧ (…)^{k−1}` with
    /// `v_ε = ½ log(‖G∘φ‖² + ε²)`, extrapolated to `ε → 0`.
    SmoothedPl,
}

impl CountMode {
    pub fn default_for(k: usize) -> Self {
        if k == 1 {
            CountMode::ArgumentPrinciple
        } else {
            CountMode::SmoothedPl
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageCount {
    pub count: i64,
    pub raw: f64,
    /// Distance of `raw` to the nearest integer.
    pub confidence: f64,
    /// Estimated error of `raw` (quadrature plus extrapolation).
    pub stderr: f64,
    pub mode: CountMode,
    /// Radius actually used, after perturbation off zeros on the contour.
    pub radius: f64,
}

/// Local defining functions `G∘φ` of the divisor and their Jacobian, from the
/// scaled representative of `φ`. Hyperplanes give `⟨F, a⟩`; points give
/// `F_i p_piv − F_piv p_i` for `i ≠ piv`.
fn section(map: &MapSpec, divisor: &DivisorSpec, z: &[C64]) -> (Vec<C64>, DMatrix<C64>, f64) {
    let (f, j, ls) = map.eval_with_scale(z);
    let k = j.ncols();
    match divisor {
        DivisorSpec::Hyperplane { a } => {
            let g: C64 = f.iter().zip(a).map(|(x, y)| x * y).sum();
            let jg = DMatrix::from_fn(1, k, |_, q| (0..f.len()).map(|i| j[(i, q)] * a[i]).sum());
            (vec![g], jg, ls)
        }
        DivisorSpec::Point { p } => {
            let piv = (0..p.len())
                .max_by(|&x, &y| p[x].norm().total_cmp(&p[y].norm()))
                .expect("nonempty point");
            let rows: Vec<usize> = (0..p.len()).filter(|&i| i != piv).collect();
            let g = rows.iter().map(|&i| f[i] * p[piv] - f[piv] * p[i]).collect();
            let jg = DMatrix::from_fn(rows.len(), k, |r, q| {
                let i = rows[r];
                j[(i, q)] * p[piv] - j[(piv, q)] * p[i]
            });
            (g, jg, ls)
        }
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn check_compatible(map: &MapSpec, exh: &ExhaustionSpec, divisor: &DivisorSpec) -> Result<()> {
    exh.check_map(map)?;
    if divisor.m() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m() + 1,
            got: divisor.m() + 1,
        });
    }
    Ok(())
}

/// Rejects maps whose image lies in the divisor, by probing random points.
pub(crate) fn probe_not_contained(map: &MapSpec, exh: &ExhaustionSpec, divisor: &DivisorSpec) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x009e_0be5);
    let radius = exh.radius_at(exh.r0() + 0.5).min(0.9);
    let k = map.k();
    for _ in 0..16 {
        let z: Vec<C64> = (0..k)
            .map(|_| {
                C64::from_polar(
                    radius * rng.random::<f64>() / (k as f64).sqrt(),
                    2.0 * PI * rng.random::<f64>(),
                )
            })
            .collect();
        if exh.kind() == ExhaustionKind::PuncturedDisk && norm(&z) == 0.0 {
            continue;
        }
        let (g, _, _) = section(map, divisor, &z);
        let (f, _) = map.eval_scaled(&z);
        if norm(&g) > CONTOUR_ZERO * norm(&f) {
            return Ok(());
        }
    }
    Err(Error::Degenerate(format!(
        "image of {} appears to lie in the divisor",
        map.id()
    )))
}

/// `(1/2πi) ∮_{|z| = ρ} g′/g dz` on adaptive panels. Over a panel short
/// enough that `arg g` moves by less than `π/4`, the integral is exactly the
/// principal increment of `log g`; longer panels are bisected. The base grid
/// is doubled until two successive totals agree, which guards against
/// aliased turns of `arg g`.
fn winding(map: &MapSpec, divisor: &DivisorSpec, rho: f64) -> Result<(f64, f64)> {
    let g_at = |theta: f64| -> Result<C64> {
        let z = C64::from_polar(rho, theta);
        let (g, _, _) = section(map, divisor, &[z]);
        let (f, _) = map.eval_scaled(&[z]);
        if g[0].norm() <= CONTOUR_ZERO * norm(&f) || !g[0].is_finite() {
            return Err(Error::ZeroOnContour(rho.ln()));
        }
        Ok(g[0])
    };
    fn panel<G: Fn(f64) -> Result<C64>>(g_at: &G, a: f64, ga: C64, b: f64, gb: C64, depth: usize) -> Result<f64> {
        let d = (gb / ga).arg();
        if d.abs() < PI / 4.0 {
            return Ok(d);
        }
        if depth >= PANEL_DEPTH {
            return Err(Error::ZeroOnContour(a));
        }
        let m = 0.5 * (a + b);
        let gm = g_at(m)?;
        Ok(panel(g_at, a, ga, m, gm, depth + 1)? + panel(g_at, m, gm, b, gb, depth + 1)?)
    }
    let total = |n: usize| -> Result<f64> {
        let thetas: Vec<f64> = (0..=n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let gs = thetas.iter().map(|&t| g_at(t)).collect::<Result<Vec<_>>>()?;
        let mut acc = 0.0;
        for i in 0..n {
            acc += panel(&g_at, thetas[i], gs[i], thetas[i + 1], gs[i + 1], 0)?;
        }
        Ok(acc / (2.0 * PI))
    };
    let mut n = AP_START;
    let mut prev = total(n)?;
    loop {
        n *= 2;
        let cur = total(n)?;
        let change = (cur - prev).abs();
        if change < AP_TOL {
            return Ok((cur, change));
        }
        if n >= AP_MAX {
            return Err(Error::LowConfidence {
                distance: change,
                limit: AP_TOL,
            });
        }
        prev = cur;
    }
}

fn argument_principle(map: &MapSpec, exh: &ExhaustionSpec, divisor: &DivisorSpec, s: f64) -> Result<(f64, f64)> {
    let hyperplane;
    let div = match divisor {
        DivisorSpec::Hyperplane { .. } => divisor,
        DivisorSpec::Point { p } if p.len() == 2 => {
            hyperplane = DivisorSpec::hyperplane(vec![p[1], -p[0]])?;
            &hyperplane
        }
        DivisorSpec::Point { .. } => {
            return Err(Error::Unsupported(
                "argument principle needs a hyperplane target".into(),
            ));
        }
    };
    match exh.kind() {
        ExhaustionKind::PuncturedDisk => {
            let (outer, e1) = winding(map, div, 1.0)?;
            let (inner, e2) = winding(map, div, exh.radius_at(s))?;
            Ok((outer - inner, e1 + e2))
        }
        _ => winding(map, div, exh.radius_at(s)),
    }
}

/// Smoothed count at one `ε`: `∫_{∂B_s} d^c v_ε ∧ β^{k−1}` with `β = dd^cτ`
/// for hyperplanes and `β = dd^c v_ε` for points.
fn smoothed_at(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    divisor: &DivisorSpec,
    nodes: &[crate::quad::BoundaryNode],
    eps: f64,
) -> Result<(f64, f64)> {
    let k = exh.k();
    let ev = WedgeEvaluator::new(k - 1);
    let point = matches!(divisor, DivisorSpec::Point { .. }) && divisor.codim() > 1;
    let parts: Vec<(f64, f64)> = nodes
        .par_iter()
        .map(|n| {
            let (mut g, jg, ls) = section(map, divisor, &n.z);
            g.push(C64::new(eps * (-ls).exp(), 0.0));
            let mut jh = jg.clone().insert_row(jg.nrows(), C64::new(0.0, 0.0));
            if jh.nrows() != g.len() {
                jh = DMatrix::zeros(g.len(), k);
            }
            let c = fs_potential_gradient(&g, &jh);
            let beta = if point { fs_pullback(&g, &jh) } else { exh.ddc(&n.z) };
            let twos: Vec<_> = (0..k - 1).map(|_| &beta).collect();
            let v = ev.eval(&c, &twos, &n.frame);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("smoothed counting integrand at {:?}", n.z)));
            }
            Ok((n.param_weight * v, n.coarse_param_weight * v))
        })
        .collect::<Result<Vec<_>>>()?;
    let full: f64 = parts.iter().map(|p| p.0).sum();
    let coarse: f64 = parts.iter().map(|p| p.1).sum();
    Ok((full, (full - coarse).abs()))
}

/// Neville extrapolation to `x = 0` of values `y` sampled at `x`.
fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = x.len();
    for level in 1..n {
        for i in 0..n - level {
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i]);
        }
    }
    p[0]
}

fn smoothed_pl(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    divisor: &DivisorSpec,
    s: f64,
    plan: &QuadPlan,
) -> Result<(f64, f64)> {
    if exh.kind() == ExhaustionKind::PuncturedDisk {
        return Err(Error::Unsupported("smoothed counting on the punctured disk".into()));
    }
    let nodes = boundary_nodes(exh, s, plan.budget)?;
    let mut vals = Vec::with_capacity(SMOOTHING.len());
    let mut quad_err: f64 = 0.0;
    for eps in SMOOTHING {
        let (v, e) = smoothed_at(map, exh, divisor, &nodes, eps)?;
        vals.push(v);
        quad_err = quad_err.max(e);
    }
    let x: Vec<f64> = SMOOTHING.iter().map(|e| e * e).collect();
    let value = extrapolate_to_zero(&x, &vals);
    let last = vals[vals.len() - 1];
    Ok((
        value,
        quad_err + (value - last).abs() + (last - vals[vals.len() - 2]).abs(),
    ))
}

/// `n(D, s)`: the number of preimages of `D` in `B_s` (for `k = 1`), or the
/// mass of `φ*D` against `(dd^cτ)^{k−1}` for hyperplanes when `k ≥ 2`.
pub fn count_preimages(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    divisor: &DivisorSpec,
    s: f64,
    mode: CountMode,
    plan: &QuadPlan,
) -> Result<PreimageCount> {
    check_compatible(map, exh, divisor)?;
    if mode == CountMode::ArgumentPrinciple && map.k() != 1 {
        return Err(Error::Unsupported("argument principle needs k = 1".into()));
    }
    if !(s < exh.r_max()) || s < exh.u_floor() {
        return Err(Error::RadiusOutOfRange {
            r: s,
            lo: exh.u_floor(),
            hi: exh.r_max(),
        });
    }
    probe_not_contained(map, exh, divisor)?;
    let mut radius = s;
    for attempt in 0..MAX_ATTEMPTS {
        let result = match mode {
            CountMode::ArgumentPrinciple => argument_principle(map, exh, divisor, radius),
            CountMode::SmoothedPl => smoothed_pl(map, exh, divisor, radius, plan),
        };
        match result {
            Ok((raw, stderr)) => {
                let count = raw.round() as i64;
                let confidence = (raw - raw.round()).abs();
                if mode == CountMode::ArgumentPrinciple && confidence > CONFIDENCE_LIMIT {
                    return Err(Error::LowConfidence {
                        distance: confidence,
                        limit: CONFIDENCE_LIMIT,
                    });
                }
                return Ok(PreimageCount {
                    count,
                    raw,
                    confidence,
                    stderr,
                    mode,
                    radius,
                });
            }
            Err(Error::ZeroOnContour(_)) | Err(Error::NonFinite(_)) if attempt + 1 < MAX_ATTEMPTS => {
                radius = s + PERTURB * (attempt + 1) as f64;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::ZeroOnContour(radius))
}

/// `N(D, r) = ∫_{r₀}^r n(D, s) ds` on a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingCurve {
    pub radii: Vec<f64>,
    #[serde(rename = "N")]
    pub big_n: Vec<f64>,
    #[serde(rename = "N_err")]
    pub big_n_err: Vec<f64>,
    pub mode: CountMode,
    /// The sampled integrand `(s, n(D, s))`.
    pub samples: Vec<(f64, f64)>,
}

/// Cumulates `n(D, s)` by trapezoid on a fine grid in `s` from `r₀` that
/// contains every scheduled radius.
pub fn counting_function(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    divisor: &DivisorSpec,
    schedule: &Schedule,
    mode: CountMode,
    plan: &QuadPlan,
) -> Result<CountingCurve> {
    check_compatible(map, exh, divisor)?;
    schedule.check_within(exh)?;
    let r0 = exh.r0();
    let step = match mode {
        CountMode::ArgumentPrinciple => AP_STEP,
        CountMode::SmoothedPl => SMOOTHED_STEP,
    };
    let steps = ((schedule.last() - r0) / step).ceil() as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|i| r0 + step * i as f64)
        .filter(|&s| s < schedule.last())
        .collect();
    grid.extend_from_slice(schedule.radii());
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let counts = grid
        .par_iter()
        .map(|&s| count_preimages(map, exh, divisor, s, mode, plan))
        .collect::<Result<Vec<_>>>()?;
    let n: Vec<f64> = counts
        .iter()
        .map(|c| match mode {
            CountMode::ArgumentPrinciple => c.count as f64,
            CountMode::SmoothedPl => c.raw,
        })
        .collect();
    let cum = cumulative_trapezoid(&grid, &n);
    // Jumps of n are located only to within one step.
    let mut err = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        let jump = 0.5 * (grid[i] - grid[i - 1]) * (n[i] - n[i - 1]).abs();
        let quad = 0.5 * (grid[i] - grid[i - 1]) * (counts[i].stderr + counts[i - 1].stderr);
        err[i] = err[i - 1] + jump + quad;
    }
    let mut big_n = Vec::with_capacity(schedule.len());
    let mut big_n_err = Vec::with_capacity(schedule.len());
    for &r in schedule.radii() {
        let i = index_of(&grid, r)?;
        big_n.push(cum[i]);
        big_n_err.push(err[i]);
    }
    Ok(CountingCurve {
        radii: schedule.radii().to_vec(),
        big_n,
        big_n_err,
        mode,
        samples: grid.into_iter().zip(n).collect(),
    })
}

/// `Σ (r − max(τ(z), r₀))⁺` over known preimages `z`: the counting function
/// as a sum of averaging weights.
pub fn counting_from_preimages(exh: &ExhaustionSpec, preimages: &[Vec<C64>], r: f64) -> f64 {
    preimages.iter().map(|z| (r - exh.tau(z).max(exh.r0())).max(0.0)).sum()
}

/// `m_φ(D, r) = ∫_{∂B_r} log(‖φ‖‖a‖/|⟨φ, a⟩|) d^cτ ∧ (dd^cτ)^{k−1}`.
pub fn proximity(map: &MapSpec, exh: &ExhaustionSpec, divisor: &DivisorSpec, r: f64, plan: &QuadPlan) -> Result<f64> {
    check_compatible(map, exh, divisor)?;
    let kernel = |z: &[C64]| divisor.kernel(&map.eval_scaled(z).0);
    let mut radius = r;
    for attempt in 0..MAX_ATTEMPTS {
        match integrate_boundary(kernel, exh, radius, plan) {
            Ok(q) => return Ok(q.value),
            Err(Error::NonFinite(_)) if attempt + 1 < MAX_ATTEMPTS => radius = r + PERTURB * (attempt + 1) as f64,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ZeroOnContour(radius))
}

/// Counting, proximity and defect of one divisor on a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub schema: String,
    pub map_id: String,
    pub exhaustion_id: String,
    pub divisor: DivisorSpec,
    pub radii: Vec<f64>,
    #[serde(rename = "N")]
    pub big_n: Vec<f64>,
    #[serde(rename = "N_err")]
    pub big_n_err: Vec<f64>,
    #[serde(rename = "m")]
    pub proximity: Vec<f64>,
    #[serde(rename = "T1")]
    pub big_t1: Vec<f64>,
    #[serde(rename = "T1_err")]
    pub big_t1_err: Vec<f64>,
    /// `δ(D, r) = 1 − N(D, r)/T₁(r)`.
    pub delta: Vec<f64>,
    pub delta_err: Vec<f64>,
    pub mode: CountMode,
}

impl DefectReport {
    /// Builds the report from a degree-1 characteristic series on the same
    /// schedule.
    pub fn compute(
        map: &MapSpec,
        exh: &ExhaustionSpec,
        divisor: &DivisorSpec,
        t1: &CharacteristicSeries,
        mode: CountMode,
        plan: &QuadPlan,
    ) -> Result<Self> {
        if t1.j != 1 || t1.map_id != map.id() || t1.exhaustion_id != exh.id() {
            return Err(Error::InvalidParam(
                "defects need the degree-1 series of the same map".into(),
            ));
        }
        let schedule = Schedule::new(t1.radii.clone())?;
        let counting = counting_function(map, exh, divisor, &schedule, mode, plan)?;
        let proximity = schedule
            .radii()
            .par_iter()
            .map(|&r| proximity(map, exh, divisor, r, plan))
            .collect::<Result<Vec<_>>>()?;
        let mut delta = Vec::with_capacity(schedule.len());
        let mut delta_err = Vec::with_capacity(schedule.len());
        for i in 0..schedule.len() {
            let (n, t) = (counting.big_n[i], t1.big_t[i]);
            if t <= 0.0 {
                return Err(Error::Degenerate(format!("T_1({}) = {t} <= 0", schedule.radii()[i])));
            }
            delta.push(1.0 - n / t);
            delta_err.push(counting.big_n_err[i] / t + n.abs() * t1.big_t_err[i] / (t * t));
        }
        Ok(Self {
            schema: SCHEMA_VERSION.into(),
            map_id: map.id().into(),
            exhaustion_id: exh.id().into(),
            divisor: divisor.clone(),
            radii: schedule.radii().to_vec(),
            big_n: counting.big_n,
            big_n_err: counting.big_n_err,
            proximity,
            big_t1: t1.big_t.clone(),
            big_t1_err: t1.big_t_err.clone(),
            delta,
            delta_err,
            mode,
        })
    }

    /// `N` nondecreasing, `δ ≤ 1 + 3·stderr`, finite residual.
    pub fn check_invariants(&self) -> Result<()> {
        for i in 1..self.radii.len() {
            if self.big_n[i] < self.big_n[i - 1] - self.big_n_err[i] - 1e-12 {
                return Err(Error::NonMonotone);
            }
        }
        for (d, e) in self.delta.iter().zip(&self.delta_err) {
            if *d > 1.0 + 3.0 * e + 1e-12 {
                return Err(Error::InvalidParam(format!("defect {d} exceeds 1")));
            }
        }
        if fmt_residual(self).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("first main theorem residual".into()));
        }
        Ok(())
    }

    /// CSV with columns `r, N, m, delta, residual`.
    pub fn to_csv(&self) -> String {
        let res = fmt_residual(self);
        let mut out = format!("# {}\nr,N,m,delta,residual\n", self.schema);
        for (i, residual) in res.iter().enumerate() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.radii[i], self.big_n[i], self.proximity[i], self.delta[i], residual
            ));
        }
        out
    }
}

/// `N + m − T₁` on the report's schedule.
pub fn fmt_residual(report: &DefectReport) -> Vec<f64> {
    (0..report.radii.len())
        .map(|i| report.big_n[i] + report.proximity[i] - report.big_t1[i])
        .collect()
}

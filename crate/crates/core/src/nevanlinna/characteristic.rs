use serde::{Deserialize, Serialize};

use super::{index_of, Schedule, WeightKind, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::forms::{mixed_wedge_density, HermitianForm};
use crate::maps::{ExhaustionSpec, MapSpec};
use crate::quad::{integrate_shells, shell_edges, ErrorAccumulator, QuadPlan};
use crate::C64;

/// `t_j(r) = ∫_{B_r} (dd^cτ)^{k−j} ∧ φ*ω^j` and its cumulation
/// `T_j(r) = ∫_{r₀}^r t_j(s) ds` over a schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSeries {
    pub schema: String,
    pub map_id: String,
    pub exhaustion_id: String,
    pub k: usize,
    pub j: usize,
    pub r0: f64,
    pub weight: WeightKind,
    pub radii: Vec<f64>,
    pub t: Vec<f64>,
    pub t_err: Vec<f64>,
    #[serde(rename = "T")]
    pub big_t: Vec<f64>,
    #[serde(rename = "T_err")]
    pub big_t_err: Vec<f64>,
    pub samples_used: usize,
}

/// A ratio of characteristic quantities. `indeterminate` is set when the
/// degree-`j` mass is below three standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioValue {
    pub value: f64,
    pub stderr: f64,
    pub indeterminate: bool,
}

/// Lebesgue density of `extra ∧ (dd^cτ)^{base_deg} ∧ φ*ω^{pull_deg}`; the
/// degrees must add up to `k`.
pub(crate) fn wedge_density(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    extra: Option<&HermitianForm>,
    base_deg: usize,
    pull_deg: usize,
    z: &[C64],
) -> Result<f64> {
    let k = exh.k();
    let mut forms: Vec<(HermitianForm, usize)> = Vec::with_capacity(3);
    if let Some(e) = extra {
        forms.push((e.clone(), 1));
    }
    if base_deg > 0 {
        forms.push((exh.ddc(z), base_deg));
    }
    if pull_deg > 0 {
        forms.push((map.pullback_fs(z), pull_deg));
    }
    let refs: Vec<(&HermitianForm, usize)> = forms.iter().map(|(f, m)| (f, *m)).collect();
    mixed_wedge_density(&refs, k)
}

fn check_degree(exh: &ExhaustionSpec, j: usize) -> Result<()> {
    if j > exh.k() {
        return Err(Error::InvalidParam(format!("degree j = {j} exceeds k = {}", exh.k())));
    }
    Ok(())
}

/// Computes `t_j` and `T_j` on the schedule in one quadrature pass.
///
/// `T_j(r) = ∫_{B_r} (r − max(τ, r₀)) ρ_j` by Fubini, which equals
/// `∫_{r₀}^r t_j(s) ds` without a second discretization in `s`. For `j = 0`
/// the unit mass of `(dd^cτ)ᵏ` at the pole is added exactly.
pub fn characteristic(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    schedule: &Schedule,
    weight: WeightKind,
    plan: &QuadPlan,
) -> Result<CharacteristicSeries> {
    exh.check_map(map)?;
    check_degree(exh, j)?;
    schedule.check_within(exh)?;
    if weight == WeightKind::D && exh.r0() < 0.0 {
        return Err(Error::Unsupported(format!(
            "d-case weights need r0 >= 0; {} has r0 = {}",
            exh.id(),
            exh.r0()
        )));
    }
    let r0 = exh.r0();
    let n = schedule.len();
    let mut series = CharacteristicSeries {
        schema: SCHEMA_VERSION.into(),
        map_id: map.id().into(),
        exhaustion_id: exh.id().into(),
        k: exh.k(),
        j,
        r0,
        weight,
        radii: schedule.radii().to_vec(),
        t: vec![0.0; n],
        t_err: vec![0.0; n],
        big_t: vec![0.0; n],
        big_t_err: vec![0.0; n],
        samples_used: 0,
    };
    // (dd^cτ)^k vanishes away from the pole, so for j = 0 only the point
    // mass contributes.
    if j > 0 {
        let mut breaks = schedule.radii().to_vec();
        breaks.push(r0);
        let edges = shell_edges(exh, exh.u_floor(), schedule.last(), plan, &breaks);
        let shells = integrate_shells(exh, &edges, plan, 2, |z, u, out| {
            let rho = wedge_density(map, exh, None, exh.k() - j, j, z)?;
            out[0] = rho;
            out[1] = u.max(r0) * rho;
            Ok(())
        })?;
        series.samples_used = shells.iter().map(|s| s.samples).sum();
        for (i, &r) in schedule.radii().iter().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            let (mut ea, mut et) = (ErrorAccumulator::default(), ErrorAccumulator::default());
            for s in shells.iter().filter(|s| s.hi <= r + 1e-12) {
                a += s.value[0];
                b += s.value[1];
                ea.add(s.combination_error(&[1.0, 0.0]));
                et.add(s.combination_error(&[r, -1.0]));
            }
            series.t[i] = a;
            series.t_err[i] = ea.stderr();
            series.big_t[i] = r * a - b;
            series.big_t_err[i] = et.stderr();
        }
    } else {
        for (i, &r) in schedule.radii().iter().enumerate() {
            series.t[i] = exh.point_mass();
            series.big_t[i] = (r - r0) * exh.point_mass();
        }
    }
    Ok(series)
}

impl CharacteristicSeries {
    pub fn index_of(&self, r: f64) -> Result<usize> {
        index_of(&self.radii, r)
    }

    /// `(t_j(r), T_j(r))`.
    pub fn at(&self, r: f64) -> Result<(f64, f64)> {
        let i = self.index_of(r)?;
        Ok((self.t[i], self.big_t[i]))
    }

    /// Mass `c_r` of the averaged current: `T_j(r)/r` for `d`-case weights,
    /// `T_j(r)` for `dd^c`-case weights.
    pub fn current_mass(&self, r: f64) -> Result<f64> {
        let (_, big_t) = self.at(r)?;
        Ok(match self.weight {
            WeightKind::D => big_t / r,
            WeightKind::Ddc => big_t,
        })
    }

    /// Whether degree-`j` mass at schedule index `i` is within three
    /// standard errors of zero.
    pub fn is_degenerate_at(&self, i: usize) -> bool {
        self.t[i] < 3.0 * self.t_err[i] || self.t[i] <= 0.0
    }

    /// `t ≥ −2·stderr`, `T` nondecreasing within `2·error`, `T(r₁) ≥ 0`
    /// within error.
    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.radii.len() {
            if self.t[i] < -2.0 * self.t_err[i] - 1e-12 {
                return Err(Error::Degenerate(format!(
                    "t_{}({}) = {} < 0",
                    self.j, self.radii[i], self.t[i]
                )));
            }
            if i > 0 {
                let tol = 2.0 * (self.big_t_err[i] + self.big_t_err[i - 1]) + 1e-12;
                if self.big_t[i] < self.big_t[i - 1] - tol {
                    return Err(Error::NonMonotone);
                }
            }
        }
        if self.big_t[0] < -2.0 * self.big_t_err[0] - 1e-12 {
            return Err(Error::Degenerate(format!("T_{}(r_1) = {} < 0", self.j, self.big_t[0])));
        }
        Ok(())
    }

    /// CSV with columns `r, t_j, t_j_err, T_j, T_j_err`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# {}\nr,t_j,t_j_err,T_j,T_j_err\n", self.schema);
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.radii[i], self.t[i], self.t_err[i], self.big_t[i], self.big_t_err[i]
            ));
        }
        out
    }
}

fn check_pair(sj: &CharacteristicSeries, sjm1: &CharacteristicSeries) -> Result<()> {
    if sj.j == 0 || sjm1.j + 1 != sj.j {
        return Err(Error::InvalidParam(format!(
            "expected degrees j and j − 1, got {} and {}",
            sj.j, sjm1.j
        )));
    }
    if sj.radii != sjm1.radii || sj.map_id != sjm1.map_id || sj.exhaustion_id != sjm1.exhaustion_id {
        return Err(Error::InvalidParam(
            "series do not share map, exhaustion and schedule".into(),
        ));
    }
    Ok(())
}

fn rel(err: f64, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        (err / v).abs()
    }
}

/// `I_j(r) = T_{j−1}(r) t_j(r) / T_j(r)²`.
pub fn d_mass_ratio(sj: &CharacteristicSeries, sjm1: &CharacteristicSeries, r: f64) -> Result<RatioValue> {
    check_pair(sj, sjm1)?;
    let i = sj.index_of(r)?;
    let (t, big_t, big_tm1) = (sj.t[i], sj.big_t[i], sjm1.big_t[i]);
    if big_t <= 0.0 {
        return Err(Error::Degenerate(format!("T_{}({r}) = {big_t} <= 0", sj.j)));
    }
    let value = big_tm1 * t / (big_t * big_t);
    let relerr = rel(sjm1.big_t_err[i], big_tm1) + rel(sj.t_err[i], t) + 2.0 * rel(sj.big_t_err[i], big_t);
    Ok(RatioValue {
        value,
        stderr: value.abs() * relerr,
        indeterminate: sj.is_degenerate_at(i),
    })
}

/// `J_j(r) = t_{j−1}(r) / T_j(r)`.
pub fn ddc_mass_ratio(sj: &CharacteristicSeries, sjm1: &CharacteristicSeries, r: f64) -> Result<RatioValue> {
    check_pair(sj, sjm1)?;
    let i = sj.index_of(r)?;
    let (tm1, big_t) = (sjm1.t[i], sj.big_t[i]);
    if big_t <= 0.0 {
        return Err(Error::Degenerate(format!("T_{}({r}) = {big_t} <= 0", sj.j)));
    }
    let value = tm1 / big_t;
    Ok(RatioValue {
        value,
        stderr: value.abs() * (rel(sjm1.t_err[i], tm1) + rel(sj.big_t_err[i], big_t)),
        indeterminate: sj.is_degenerate_at(i),
    })
}

/// `I_j(r)` from the Dirichlet form: the mass of
/// `dτ ∧ d^cτ ∧ (dd^cτ)^{k−j} ∧ φ*ω^{j−1}` on `{r₀ < τ < r}`, divided by
/// `r²`, times `t_j/c_r²` with `c_r = T_j(r)/r`. All three integrals share one
/// quadrature pass.
pub fn d_mass_ratio_direct(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    r: f64,
    plan: &QuadPlan,
) -> Result<RatioValue> {
    exh.check_map(map)?;
    check_degree(exh, j)?;
    if j == 0 {
        return Err(Error::InvalidParam("mass ratios need j >= 1".into()));
    }
    Schedule::new(vec![r])?.check_within(exh)?;
    let r0 = exh.r0();
    let edges = shell_edges(exh, exh.u_floor(), r, plan, &[r0]);
    let shells = integrate_shells(exh, &edges, plan, 3, |z, u, out| {
        let rho = wedge_density(map, exh, None, exh.k() - j, j, z)?;
        out[1] = rho;
        out[2] = (r - u.max(r0)) * rho;
        if u > r0 {
            let c = exh.grad_zbar(z);
            out[0] = wedge_density(map, exh, Some(&HermitianForm::outer(&c)), exh.k() - j, j - 1, z)?;
        }
        Ok(())
    })?;
    let mut sums = [0.0; 3];
    let mut errs = [ErrorAccumulator::default(); 3];
    for s in &shells {
        for c in 0..3 {
            sums[c] += s.value[c];
            let mut coeff = [0.0; 3];
            coeff[c] = 1.0;
            errs[c].add(s.combination_error(&coeff));
        }
    }
    let [dirichlet, t, big_t] = sums;
    let [ed, et, ebig] = errs.map(|e| e.stderr());
    if big_t <= 0.0 {
        return Err(Error::Degenerate(format!("T_{j}({r}) = {big_t} <= 0")));
    }
    let value = dirichlet * t / (big_t * big_t);
    Ok(RatioValue {
        value,
        stderr: value.abs() * (rel(ed, dirichlet) + rel(et, t) + 2.0 * rel(ebig, big_t)),
        indeterminate: t < 3.0 * et || t <= 0.0,
    })
}

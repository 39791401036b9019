//! Derivative pairings `⟨dd^c S_r, ψ⟩` and `⟨dS_r, ψ⟩`.
//!
//! The `dd^c`-weight `u_r = r − max(τ, r₀)` equals `(r − τ)⁺ − (r₀ − τ)⁺`.
//! Both kinks are smoothed with the convex `χ_δ` (`χ_δ'' = 1/δ` on `[0, δ]`,
//! zero elsewhere, `χ_δ = 0` on the negative axis), the lower one shifted
//! into `[r₀, r₀ + δ]` so it stays inside the domain:
//! `u_δ = χ_δ(r − τ) − χ_δ(r₀ + δ − τ)`. Then
//! `dd^c u_δ = (χ''(v) − χ''(v'))·dτ∧d^cτ − (χ'(v) − χ'(v'))·dd^cτ`, and the
//! pairing `∫ (f∘φ) dd^c u_δ ∧ (dd^cτ)^{k−j} ∧ φ*ω^{j−1}` splits into a band
//! term (`I₂`) and a bulk term (`I₁`). The limit `δ → 0` is taken by
//! polynomial extrapolation over [`DELTAS`].

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{check_current_degree, weight_at, Pairing};
use crate::error::{Error, Result};
use crate::forms::{numeric_gradient_zbar, HermitianForm, TestForm, TestFunction};
use crate::maps::{ExhaustionSpec, MapSpec};
use crate::nevanlinna::{wedge_density, Schedule, WeightKind};
use crate::quad::{integrate_boundary, integrate_shells, shell_edges, ErrorAccumulator, QuadPlan};

/// Smoothing widths used for the extrapolation `δ → 0`.
pub const DELTAS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// `⟨dd^c S_r, ψ⟩` extrapolated to `δ = 0`, with the values at each `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdcPairing {
    pub value: f64,
    pub stderr: f64,
    /// `(δ, value, stderr)`.
    pub by_delta: Vec<(f64, f64, f64)>,
}

/// `χ_δ'(v)`.
fn chi_prime(v: f64, delta: f64) -> f64 {
    (v / delta).clamp(0.0, 1.0)
}

/// `χ_δ''(v)`.
fn chi_second(v: f64, delta: f64) -> f64 {
    if (0.0..delta).contains(&v) {
        1.0 / delta
    } else {
        0.0
    }
}

/// Value at 0 of the polynomial through `(δᵢ, vᵢ)`; the error adds the
/// absolute Lagrange weights times the input errors.
pub fn extrapolate_delta(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let mut value = 0.0;
    let mut err = 0.0;
    for (i, &(di, vi, ei)) in points.iter().enumerate() {
        let l: f64 = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &(dj, _, _))| dj / (dj - di))
            .product();
        value += l * vi;
        err += l.abs() * ei;
    }
    (value, err)
}

/// Smoothed `dd^c` pairing of `g∘φ` for every width in [`DELTAS`], where `g`
/// is a function of homogeneous coordinates.
pub(crate) fn ddc_pairing_with<G>(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    r: f64,
    g: G,
    plan: &QuadPlan,
) -> Result<DdcPairing>
where
    G: Fn(&[C64]) -> f64 + Sync,
{
    Ok(ddc_pairing_multi(map, exh, j, r, &[g], plan)?.remove(0))
}

/// [`ddc_pairing_with`] for several functions in one quadrature pass.
pub(crate) fn ddc_pairing_multi<G>(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    r: f64,
    gs: &[G],
    plan: &QuadPlan,
) -> Result<Vec<DdcPairing>>
where
    G: Fn(&[C64]) -> f64 + Sync,
{
    exh.check_map(map)?;
    check_current_degree(exh, j)?;
    if j == 0 {
        return Err(Error::InvalidParam("dd^c pairings need j >= 1".into()));
    }
    Schedule::new(vec![r])?.check_within(exh)?;
    let r0 = exh.r0();
    if r - r0 <= 2.0 * DELTAS[0] {
        return Err(Error::RadiusOutOfRange {
            r,
            lo: r0 + 2.0 * DELTAS[0],
            hi: exh.r_max(),
        });
    }
    let k = exh.k();
    let mut breaks = vec![r0, r];
    for d in DELTAS {
        breaks.push(r0 + d);
        breaks.push(r - d);
    }
    let edges = shell_edges(exh, r0, r, plan, &breaks);
    let nd = DELTAS.len();
    let ng = gs.len();
    let shells = integrate_shells(exh, &edges, plan, nd * ng, |z, u, out| {
        let w = map.eval_scaled(z).0;
        let band = wedge_density(
            map,
            exh,
            Some(&HermitianForm::outer(&exh.grad_zbar(z))),
            k - j,
            j - 1,
            z,
        )?;
        let bulk = wedge_density(map, exh, None, k - j + 1, j - 1, z)?;
        let kernel: Vec<f64> = DELTAS
            .iter()
            .map(|&d| {
                let (v, vl) = (r - u, r0 + d - u);
                let second = chi_second(v, d) - chi_second(vl, d);
                let first = chi_prime(v, d) - chi_prime(vl, d);
                second * band - first * bulk
            })
            .collect();
        for (gi, g) in gs.iter().enumerate() {
            let gv = g(&w);
            for (c, kv) in kernel.iter().enumerate() {
                out[gi * nd + c] = gv * kv;
            }
        }
        Ok(())
    })
    .map_err(|e| match e {
        Error::NonFinite(s) => Error::NonFinite(format!("dd^c band quadrature: {s}")),
        e => e,
    })?;
    Ok((0..ng)
        .map(|gi| {
            let by_delta: Vec<(f64, f64, f64)> = (0..nd)
                .map(|c| {
                    let idx = gi * nd + c;
                    let mut acc = ErrorAccumulator::default();
                    let mut coeff = vec![0.0; nd * ng];
                    coeff[idx] = 1.0;
                    shells.iter().for_each(|s| acc.add(s.combination_error(&coeff)));
                    (DELTAS[c], shells.iter().map(|s| s.value[idx]).sum(), acc.stderr())
                })
                .collect();
            let (value, stderr) = extrapolate_delta(&by_delta);
            DdcPairing {
                value,
                stderr,
                by_delta,
            }
        })
        .collect())
}

/// `⟨dd^c S_{j,r}, ψ⟩` for `ψ = f·ω^{j−1}` and `dd^c`-weights.
pub fn ddc_pairing(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    r: f64,
    psi: &TestForm,
    plan: &QuadPlan,
) -> Result<DdcPairing> {
    if psi.j + 1 != j {
        return Err(Error::InvalidParam(format!(
            "dd^c pairing of a degree-{j} current needs a degree-{} form, got {}",
            j.saturating_sub(1),
            psi.j
        )));
    }
    if psi.f.m != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            got: psi.f.m,
        });
    }
    ddc_pairing_with(map, exh, j, r, |z| psi.eval(z), plan)
}

/// For `k = 1`: `⟨dd^c S_{1,r}, f⟩ = avg_{τ=r}(f∘φ) − avg_{τ=r₀}(f∘φ)`.
pub fn ddc_pairing_jensen(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    f: &TestFunction,
    r: f64,
    plan: &QuadPlan,
) -> Result<Pairing> {
    exh.check_map(map)?;
    if exh.k() != 1 {
        return Err(Error::Unsupported("the boundary form needs k = 1".into()));
    }
    let g = |z: &[C64]| f.eval(&map.eval_scaled(z).0);
    let outer = integrate_boundary(g, exh, r, plan)?;
    let inner = integrate_boundary(g, exh, exh.r0(), plan)?;
    Ok(Pairing {
        value: outer.value - inner.value,
        stderr: outer.stderr + inner.stderr,
    })
}

/// The 1-form `θ = f · d^c g` with dictionary functions `f`, `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneForm {
    pub f: TestFunction,
    pub g: TestFunction,
}

impl OneForm {
    pub fn new(m: usize, f_id: usize, g_id: usize) -> Result<Self> {
        Ok(Self {
            f: TestFunction::by_id(m, f_id)?,
            g: TestFunction::by_id(m, g_id)?,
        })
    }
}

/// `⟨dS_{j,r}, θ ∧ ω^{j−1}⟩ = −∫_{r₀<τ<r} u_r'(τ) (f∘φ) dτ ∧ d^c(g∘φ) ∧ (dd^cτ)^{k−j} ∧ φ*ω^{j−1}`,
/// with `u_r' = −1` (`dd^c`-weights) or `−1/r` (`d`-weights).
pub fn d_pairing(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    r: f64,
    theta: &OneForm,
    weight: WeightKind,
    plan: &QuadPlan,
) -> Result<Pairing> {
    exh.check_map(map)?;
    check_current_degree(exh, j)?;
    if j == 0 {
        return Err(Error::InvalidParam("d pairings need j >= 1".into()));
    }
    if theta.f.m != map.m() || theta.g.m != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            got: theta.f.m,
        });
    }
    Schedule::new(vec![r])?.check_within(exh)?;
    if weight == WeightKind::D && exh.r0() < 0.0 {
        return Err(Error::Unsupported(format!(
            "d-case weights need r0 >= 0; {} has r0 = {}",
            exh.id(),
            exh.r0()
        )));
    }
    let r0 = exh.r0();
    let k = exh.k();
    // Slope of the weight in τ on (r₀, r).
    let slope = weight_at(exh, weight, r, r0) / (r - r0);
    let edges = shell_edges(exh, r0, r, plan, &[]);
    let shells = integrate_shells(exh, &edges, plan, 1, |z, _, out| {
        let fv = theta.f.eval(&map.eval_scaled(z).0);
        if fv == 0.0 {
            return Ok(());
        }
        let cg = numeric_gradient_zbar(|x| theta.g.eval(&map.eval_scaled(x).0), z, None)?;
        let form = HermitianForm::sym_outer(&exh.grad_zbar(z), &cg);
        out[0] = slope * fv * wedge_density(map, exh, Some(&form), k - j, j - 1, z)?;
        Ok(())
    })?;
    let mut acc = ErrorAccumulator::default();
    shells.iter().for_each(|s| acc.add(s.combination_error(&[1.0])));
    Ok(Pairing {
        value: shells.iter().map(|s| s.value[0]).sum(),
        stderr: acc.stderr(),
    })
}

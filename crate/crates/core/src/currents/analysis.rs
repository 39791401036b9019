//! Cluster analysis of normalized currents, density points, positivity of
//! intersection with a divisor, and the normal-family dichotomy for scaled
//! families of maps.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{weight_at, DiscreteCurrent, MomentVector, Pairing};
use crate::error::{Error, Result};
use crate::forms::{fs_uniform_points, ChartPoint};
use crate::maps::{DivisorSpec, ExhaustionSpec, MapSpec};
use crate::nevanlinna::{
    characteristic, counting_function, probe_not_contained, wedge_density, CharacteristicSeries, CountMode, Schedule,
    WeightKind,
};
use crate::quad::{integrate_boundary, integrate_shells, shell_edges, QuadPlan};

/// Scaled ratio below which the `dd^c`-branch of the dichotomy is declared.
pub const BRODY_THRESHOLD: f64 = 0.05;
/// Perturbation of a contour that passes through the divisor.
const CONTOUR_SHIFT: f64 = 1e-6;
const CONTOUR_ATTEMPTS: usize = 5;
const CANCELLATION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub radii: Vec<f64>,
    pub moments: Vec<MomentVector>,
    /// Sup-norm moment distances between every pair of radii.
    pub pairwise: Vec<Vec<f64>>,
    /// Distances between consecutive radii.
    pub successive: Vec<f64>,
    /// Consecutive distances strictly decrease.
    pub converging: bool,
    pub limit: MomentVector,
    /// Distance of each moment vector to the Fubini–Study moments, when
    /// `k = m = j`.
    pub fs_distances: Option<Vec<f64>>,
    pub fs_decreasing: Option<bool>,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Moment distances between normalized currents at increasing radii.
pub fn cluster_analysis(currents: &[DiscreteCurrent]) -> Result<ClusterReport> {
    if currents.len() < 3 {
        return Err(Error::InsufficientSchedule {
            got: currents.len(),
            need: 3,
        });
    }
    let h0 = &currents[0].header;
    if let Some(c) = currents.iter().find(|c| c.header.j != h0.j || c.header.m != h0.m) {
        return Err(Error::InvalidParam(format!(
            "currents of degree {} on P^{} and degree {} on P^{} cannot be compared",
            h0.j, h0.m, c.header.j, c.header.m
        )));
    }
    let moments: Vec<MomentVector> = currents.iter().map(DiscreteCurrent::moments).collect();
    let pairwise: Vec<Vec<f64>> = moments
        .iter()
        .map(|a| moments.iter().map(|b| a.distance(b)).collect())
        .collect();
    let successive: Vec<f64> = moments.windows(2).map(|w| w[0].distance(&w[1])).collect();
    let fs_distances = (h0.k == h0.m && h0.j == h0.m).then(|| {
        let fs = MomentVector::fubini_study(h0.m);
        moments.iter().map(|mv| mv.distance(&fs)).collect::<Vec<f64>>()
    });
    Ok(ClusterReport {
        radii: currents.iter().map(|c| c.header.r).collect(),
        converging: strictly_decreasing(&successive),
        fs_decreasing: fs_distances.as_deref().map(strictly_decreasing),
        fs_distances,
        limit: moments.last().expect("at least three").clone(),
        moments,
        pairwise,
        successive,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPointReport {
    pub radii: Vec<f64>,
    /// Share of the mass of `S_{1,r}` inside the Fubini–Study ball.
    pub ratio: Vec<f64>,
    /// Minimum over the second half of the schedule.
    pub liminf: f64,
}

/// Mass fraction of the degree-1 `dd^c`-weighted current inside the ball of
/// Fubini–Study radius `delta_ball` around `p`.
pub fn density_point_ratio(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    p: &ChartPoint,
    delta_ball: f64,
    schedule: &Schedule,
    plan: &QuadPlan,
) -> Result<DensityPointReport> {
    exh.check_map(map)?;
    schedule.check_within(exh)?;
    if !(delta_ball > 0.0) {
        return Err(Error::InvalidParam(format!(
            "ball radius {delta_ball} must be positive"
        )));
    }
    if p.m() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            got: p.m(),
        });
    }
    let r0 = exh.r0();
    let k = exh.k();
    let mut breaks = schedule.radii().to_vec();
    breaks.push(r0);
    let edges = shell_edges(exh, exh.u_floor(), schedule.last(), plan, &breaks);
    let shells = integrate_shells(exh, &edges, plan, 4, |z, u, out| {
        let rho = wedge_density(map, exh, None, k - 1, 1, z)?;
        let inside = ChartPoint::from_homogeneous(&map.eval_scaled(z).0).fs_distance(p) < delta_ball;
        let w = u.max(r0);
        out[0] = rho;
        out[1] = w * rho;
        if inside {
            out[2] = rho;
            out[3] = w * rho;
        }
        Ok(())
    })?;
    let mut ratio = Vec::with_capacity(schedule.len());
    for &r in schedule.radii() {
        let mut s = [0.0; 4];
        for sh in shells.iter().filter(|sh| sh.hi <= r + 1e-12) {
            s.iter_mut().zip(&sh.value).for_each(|(a, v)| *a += v);
        }
        let (full, part) = (r * s[0] - s[1], r * s[2] - s[3]);
        if !(full > 0.0) {
            return Err(Error::Degenerate(format!(
                "current of {} at r = {r} has zero mass",
                map.id()
            )));
        }
        ratio.push((part / full).clamp(0.0, 1.0));
    }
    let tail = &ratio[ratio.len() / 2..];
    Ok(DensityPointReport {
        radii: schedule.radii().to_vec(),
        liminf: tail.iter().copied().fold(f64::INFINITY, f64::min),
        ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub divisor: DivisorSpec,
    pub radii: Vec<f64>,
    /// `c_r = T₁(r)`.
    pub mass: Vec<f64>,
    /// `⟨S_r/c_r, α⟩` with `α = ω`, the Fubini–Study representative of the
    /// hyperplane class: the normalized mass.
    pub class_pairing: Vec<f64>,
    /// `⟨S_r/c_r, dd^c U⟩` with `U = −K(·, a) − shift ≤ 0`.
    pub potential_term: Vec<f64>,
    /// `⟨S_r/c_r, α + dd^c U⟩ = ⟨S_r/c_r, [Z]⟩`.
    pub pairing: Vec<f64>,
    pub pairing_err: Vec<f64>,
    /// `N(Z, r)/c_r`, the weighted count of preimages, when `k = 1`.
    pub counting: Option<Vec<f64>>,
    /// Why the counting side is missing for `k = 1`, e.g. a section that is
    /// numerically zero along a contour.
    pub counting_note: Option<String>,
    /// Set when `k > 1`: the counting side needs the parabolic hypothesis
    /// and is not evaluated.
    pub parabolic_flagged: bool,
    pub shift: f64,
    /// Every pairing in the second half of the schedule is `≥ −3` errors.
    pub holds: bool,
}

/// Boundary average retried on slightly larger radii when the contour meets
/// the singular set of `g`.
fn boundary_average<G>(g: G, exh: &ExhaustionSpec, r: f64, plan: &QuadPlan) -> Result<Pairing>
where
    G: Fn(&[C64]) -> f64 + Sync,
{
    let mut last = None;
    for attempt in 0..CONTOUR_ATTEMPTS {
        match integrate_boundary(&g, exh, r + CONTOUR_SHIFT * attempt as f64, plan) {
            Ok(q) => {
                return Ok(Pairing {
                    value: q.value,
                    stderr: q.stderr,
                })
            }
            Err(Error::NonFinite(s)) => last = Some(Error::NonFinite(s)),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Pairing of the normalized degree-1 currents with the current of
/// integration `[Z] = α + dd^c U` of a hyperplane.
pub fn intersection_positivity(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    divisor: &DivisorSpec,
    schedule: &Schedule,
    plan: &QuadPlan,
) -> Result<IntersectionReport> {
    exh.check_map(map)?;
    schedule.check_within(exh)?;
    if divisor.m() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            got: divisor.m(),
        });
    }
    if divisor.codim() != 1 {
        return Err(Error::Unsupported(
            "positivity of intersection needs a hypersurface".into(),
        ));
    }
    probe_not_contained(map, exh, divisor)?;
    let shift = fs_uniform_points(map.m(), 4096, 0x5417)
        .iter()
        .map(|z| -divisor.kernel(z))
        .fold(0.0, f64::max);
    let potential = |z: &[C64]| -divisor.kernel(&map.eval_scaled(z).0) - shift;
    let t1 = characteristic(map, exh, 1, schedule, WeightKind::Ddc, plan)?;
    if let Some(i) = (0..t1.radii.len()).find(|&i| !(t1.big_t[i] > 0.0)) {
        return Err(Error::Degenerate(format!(
            "T_1({}) = {} for {}",
            t1.radii[i],
            t1.big_t[i],
            map.id()
        )));
    }
    let k = exh.k();
    let n = schedule.len();
    let mut potential_term = Vec::with_capacity(n);
    let mut pairing_err = Vec::with_capacity(n);
    if k == 1 {
        let inner = boundary_average(potential, exh, exh.r0(), plan)?;
        for (i, &r) in schedule.radii().iter().enumerate() {
            let outer = boundary_average(potential, exh, r, plan)?;
            let c = t1.big_t[i];
            potential_term.push((outer.value - inner.value) / c);
            pairing_err.push((outer.stderr + inner.stderr) / c + t1.big_t_err[i] / c);
        }
    } else {
        for (i, &r) in schedule.radii().iter().enumerate() {
            let p = super::derivative::ddc_pairing_with(map, exh, 1, r, potential, plan)?;
            let c = t1.big_t[i];
            potential_term.push(p.value / c);
            pairing_err.push(p.stderr / c + t1.big_t_err[i] / c);
        }
    }
    let pairing: Vec<f64> = potential_term.iter().map(|p| 1.0 + p).collect();
    // Rounding in `1 + p` when the two sides cancel.
    for (e, p) in pairing_err.iter_mut().zip(&potential_term) {
        *e += CANCELLATION * (1.0 + p.abs());
    }
    let mut counting_note = None;
    let counting = if k == 1 {
        match counting_function(map, exh, divisor, schedule, CountMode::ArgumentPrinciple, plan) {
            Ok(curve) => Some(curve.big_n.iter().zip(&t1.big_t).map(|(nv, c)| nv / c).collect()),
            Err(e @ (Error::ZeroOnContour(_) | Error::LowConfidence { .. })) => {
                counting_note = Some(e.to_string());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let holds = (n / 2..n).all(|i| pairing[i] >= -3.0 * pairing_err[i]);
    Ok(IntersectionReport {
        divisor: divisor.clone(),
        radii: schedule.radii().to_vec(),
        class_pairing: vec![1.0; n],
        mass: t1.big_t.clone(),
        potential_term,
        pairing,
        pairing_err,
        counting,
        counting_note,
        parabolic_flagged: k > 1,
        shift,
        holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "camelCase")]
pub enum BrodyVerdict {
    /// Some scaled ratio fell below [`BRODY_THRESHOLD`]: a `dd^c`-closed
    /// cluster current exists at degree `j`.
    DdcLimit { j: usize, map: usize, r: f64, ratio: f64 },
    /// No ratio did; the graph volumes over the shrunken ball are bounded.
    VolumeBound { bound: f64 },
    /// Every map in the family is constant.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrodyDegree {
    pub j: usize,
    /// `t_{j−1}(φ_n, r) / t_j(φ_n, r − log c)`, indexed `[n][radius]`.
    pub ratios: Vec<Vec<f64>>,
    /// Smallest ratio over the second half of the family: `(n, r, ratio)`.
    pub witness: (usize, f64, f64),
    /// `max_r t_j(φ_n, r − k log c)` per map.
    pub volumes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrodyReport {
    pub map_ids: Vec<String>,
    pub c: f64,
    pub radii: Vec<f64>,
    pub degrees: Vec<BrodyDegree>,
    pub volume_bound: f64,
    pub verdict: BrodyVerdict,
}

/// Evaluates the scaled ratios of a family of maps and reports which side of
/// the dichotomy the family falls on.
pub fn brody_detector(
    family: &[MapSpec],
    exh: &ExhaustionSpec,
    c: f64,
    schedule: &Schedule,
    plan: &QuadPlan,
) -> Result<BrodyReport> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::InvalidParam(format!("scale c = {c} must exceed 1")));
    }
    if schedule.len() < 5 {
        return Err(Error::InsufficientSchedule {
            got: schedule.len(),
            need: 5,
        });
    }
    let Some(first) = family.first() else {
        return Err(Error::InvalidParam("empty family".into()));
    };
    let k = exh.k();
    let m = first.m();
    let shift = c.ln();
    let deep = k as f64 * shift;
    let (lo, hi) = (schedule.radii()[0], schedule.last());
    let limit = exh.r_max() - deep;
    if hi > limit || lo - deep <= exh.r0() {
        return Err(Error::RadiusOutOfRange {
            r: if hi > limit { hi } else { lo },
            lo: exh.r0() + deep,
            hi: limit,
        });
    }
    let mut all: Vec<f64> = schedule
        .radii()
        .iter()
        .flat_map(|&r| [r, r - shift, r - deep])
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let union = Schedule::new(all)?;
    let jmax = k.min(m);
    let mut series: Vec<Vec<CharacteristicSeries>> = Vec::with_capacity(family.len());
    for map in family {
        if map.m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: map.m(),
            });
        }
        series.push(
            (0..=jmax)
                .map(|j| characteristic(map, exh, j, &union, WeightKind::Ddc, plan))
                .collect::<Result<_>>()?,
        );
    }
    let t = |n: usize, j: usize, r: f64| -> Result<f64> { Ok(series[n][j].at(r)?.0) };
    let degenerate = (0..family.len()).all(|n| series[n][1..].iter().all(|s| s.t.iter().all(|&v| v <= 1e-12)));
    let map_ids = family.iter().map(|f| f.id().to_string()).collect();
    if degenerate {
        return Ok(BrodyReport {
            map_ids,
            c,
            radii: schedule.radii().to_vec(),
            degrees: vec![],
            volume_bound: 0.0,
            verdict: BrodyVerdict::Degenerate,
        });
    }
    if family.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "family has {} maps, need at least 3",
            family.len()
        )));
    }
    let mut degrees = Vec::with_capacity(jmax);
    for j in 1..=jmax {
        let mut ratios = Vec::with_capacity(family.len());
        let mut volumes = Vec::with_capacity(family.len());
        for n in 0..family.len() {
            let mut row = Vec::with_capacity(schedule.len());
            let mut vol: f64 = 0.0;
            for &r in schedule.radii() {
                let den = t(n, j, r - shift)?;
                row.push(if den > 0.0 {
                    t(n, j - 1, r)? / den
                } else {
                    f64::INFINITY
                });
                vol = vol.max(t(n, j, r - deep)?);
            }
            ratios.push(row);
            volumes.push(vol);
        }
        let mut witness = (0, schedule.radii()[0], f64::INFINITY);
        for (n, row) in ratios.iter().enumerate().skip(family.len() / 2) {
            for (&r, &q) in schedule.radii().iter().zip(row) {
                if q < witness.2 {
                    witness = (n, r, q);
                }
            }
        }
        degrees.push(BrodyDegree {
            j,
            ratios,
            witness,
            volumes,
        });
    }
    let volume_bound = degrees
        .iter()
        .flat_map(|d| d.volumes.iter().copied())
        .fold(0.0, f64::max);
    let verdict = match degrees.iter().find(|d| d.witness.2 < BRODY_THRESHOLD) {
        Some(d) => BrodyVerdict::DdcLimit {
            j: d.j,
            map: d.witness.0,
            r: d.witness.1,
            ratio: d.witness.2,
        },
        None => BrodyVerdict::VolumeBound { bound: volume_bound },
    };
    Ok(BrodyReport {
        map_ids,
        c,
        radii: schedule.radii().to_vec(),
        degrees,
        volume_bound,
        verdict,
    })
}

/// Mass `Σ u_r` of the weighted preimages of a divisor; equals `N(Z, r)`.
pub fn weighted_preimage_mass(exh: &ExhaustionSpec, preimages: &[Vec<C64>], r: f64) -> f64 {
    preimages
        .iter()
        .map(|z| weight_at(exh, WeightKind::Ddc, r, exh.tau(z)))
        .sum()
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CharacteristicSeries, CountMode, DefectReport, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::forms::dictionary::fs_uniform_points;
use crate::forms::ChartPoint;
use crate::maps::{DivisorSpec, ExhaustionSpec, MapSpec};
use crate::quad::QuadPlan;
use crate::C64;

const SUP_SAMPLES: usize = 10_000;
const SUP_SEED: u64 = 0x050f_7a11;
const WEIGHT_TOL: f64 = 1e-9;
/// Allowed growth of the fitted constant from training to test radii.
const FIT_SLACK: f64 = 1.2;
pub const TAIL_LEVELS: [f64; 2] = [0.2, 0.4];

/// Kernel `U_a(z) ≥ 0` of a divisor, `+∞` on it. Higher-codimension kernels
/// plug in here.
pub trait DivisorKernel: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, divisor: &DivisorSpec, z: &[C64]) -> f64;
}

/// `log(‖z‖‖a‖/|⟨z, a⟩|)` for hyperplanes, `log(‖z‖‖p‖/‖z ∧ p‖)` for points.
#[derive(Clone, Copy, Debug, Default)]
pub struct HyperplaneKernel;

impl DivisorKernel for HyperplaneKernel {
    fn name(&self) -> &str {
        "hyperplane"
    }

    fn eval(&self, divisor: &DivisorSpec, z: &[C64]) -> f64 {
        divisor.kernel(z)
    }
}

/// Finite probability measure on divisors of one `ℙᵐ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(DivisorSpec, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PotentialValue {
    Finite(f64),
    /// `z` lies on the divisor of atom `atom`.
    Infinite {
        atom: usize,
    },
}

impl PotentialValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            PotentialValue::Finite(v) => Some(v),
            PotentialValue::Infinite { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupEstimate {
    pub sup: f64,
    pub argmax: Vec<C64>,
    pub samples: usize,
    /// `1/‖U_ν‖_∞`, a lower bound for the capacity of the support.
    pub capacity_lower_bound: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(DivisorSpec, f64)>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidParam("measure needs at least one atom".into()))?;
        let m = first.0.m();
        if atoms.iter().any(|(d, _)| d.m() != m) {
            return Err(Error::InvalidParam("atoms live in different projective spaces".into()));
        }
        if atoms.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParam("weights must be finite and nonnegative".into()));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParam(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn uniform(divisors: Vec<DivisorSpec>) -> Result<Self> {
        let w = 1.0 / divisors.len().max(1) as f64;
        Self::new(divisors.into_iter().map(|d| (d, w)).collect())
    }

    pub fn dirac(divisor: DivisorSpec) -> Self {
        Self {
            atoms: vec![(divisor, 1.0)],
        }
    }

    /// Uniform measure on `count` FS-uniform finite values `w ∈ ℂ ⊂ ℙ¹`.
    pub fn uniform_values(count: usize, seed: u64) -> Result<Self> {
        let divisors = fs_uniform_points(1, count, seed)
            .into_iter()
            .map(|z| DivisorSpec::value(z[1] / z[0]))
            .collect();
        Self::uniform(divisors)
    }

    pub fn atoms(&self) -> &[(DivisorSpec, f64)] {
        &self.atoms
    }

    pub fn m(&self) -> usize {
        self.atoms[0].0.m()
    }

    /// `U_ν(z) = Σ wᵢ U_{aᵢ}(z)` for homogeneous `z`.
    pub fn potential_with(&self, kernel: &dyn DivisorKernel, z: &[C64]) -> PotentialValue {
        let mut acc = 0.0;
        for (i, (d, w)) in self.atoms.iter().enumerate() {
            let v = kernel.eval(d, z);
            if !v.is_finite() {
                if *w > 0.0 {
                    return PotentialValue::Infinite { atom: i };
                }
                continue;
            }
            acc += w * v;
        }
        PotentialValue::Finite(acc)
    }

    /// `‖U_ν‖_∞` over FS-uniform sample points.
    pub fn sup_norm_with(&self, kernel: &dyn DivisorKernel, samples: usize, seed: u64) -> SupEstimate {
        let pts = fs_uniform_points(self.m(), samples, seed);
        let vals: Vec<f64> = pts
            .par_iter()
            .map(|z| self.potential_with(kernel, z).finite().unwrap_or(f64::INFINITY))
            .collect();
        let (i, &sup) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one sample");
        SupEstimate {
            sup,
            argmax: pts[i].clone(),
            samples,
            capacity_lower_bound: if sup > 0.0 { 1.0 / sup } else { f64::INFINITY },
        }
    }

    pub fn sup_norm(&self) -> SupEstimate {
        self.sup_norm_with(&HyperplaneKernel, SUP_SAMPLES, SUP_SEED)
    }
}

/// `U_ν(z)` with the built-in kernel.
pub fn proximity_potential(nu: &DiscreteMeasure, z: &ChartPoint) -> Result<PotentialValue> {
    if z.m() != nu.m() {
        return Err(Error::DimensionMismatch {
            expected: nu.m(),
            got: z.m(),
        });
    }
    Ok(nu.potential_with(&HyperplaneKernel, &z.to_homogeneous()))
}

/// Empirical tail `ν{a : δ(D_a, r) > ε}` and the Markov-type bound
/// `(C/ε)·t_{j−1}/T_j` with the fitted constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub eps: f64,
    pub fraction: Vec<f64>,
    pub bound: Vec<f64>,
}

/// Defects of every atom of `ν` and their averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSuite {
    pub schema: String,
    pub map_id: String,
    pub exhaustion_id: String,
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
    pub reports: Vec<DefectReport>,
    pub sup: SupEstimate,
    /// `∫ |δ(D_a, r)| dν(a)`.
    pub mean_abs_defect: Vec<f64>,
    /// `|1 − ∫ N(D_a, r) dν(a) / T_j(r)|`.
    pub averaged_defect: Vec<f64>,
    /// `‖U_ν‖_∞ · t_{j−1}(r)/T_j(r)`.
    pub rate: Vec<f64>,
    /// Smallest `C` with `mean_abs_defect ≤ C·rate` on the even-indexed
    /// (training) radii.
    pub fitted_c: f64,
    /// Largest `mean_abs_defect/rate` on the odd-indexed (test) radii.
    pub test_max_ratio: f64,
    pub bound_holds_on_test: bool,
    /// `∫ (m_a(r) − m_a(r₀)) dν` and `T_j(r) − ∫ N dν`.
    pub identity_lhs: Vec<f64>,
    pub identity_rhs: Vec<f64>,
    pub tails: Vec<TailReport>,
}

/// Runs counting and proximity for every atom of `ν` on the schedule of `tj`
/// (degree `j`) and checks the averaged defect against
/// `C·‖U_ν‖_∞·t_{j−1}/T_j`.
pub fn defect_suite(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    nu: &DiscreteMeasure,
    tj: &CharacteristicSeries,
    tjm1: &CharacteristicSeries,
    plan: &QuadPlan,
) -> Result<DefectSuite> {
    if tjm1.j + 1 != tj.j || tj.radii != tjm1.radii {
        return Err(Error::InvalidParam(
            "defect suite needs series of degrees j and j − 1 on one schedule".into(),
        ));
    }
    if nu.m() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            got: nu.m(),
        });
    }
    let n = tj.radii.len();
    if n < 2 {
        return Err(Error::InsufficientSchedule { got: n, need: 2 });
    }
    let mode = CountMode::default_for(exh.k());
    let reports = nu
        .atoms()
        .iter()
        .map(|(d, _)| DefectReport::compute(map, exh, d, tj, mode, plan))
        .collect::<Result<Vec<_>>>()?;
    let base = nu
        .atoms()
        .par_iter()
        .map(|(d, _)| super::proximity(map, exh, d, exh.r0(), plan))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = nu.atoms().iter().map(|(_, w)| *w).collect();
    let sup = nu.sup_norm();

    let avg = |f: &dyn Fn(&DefectReport, usize) -> f64, i: usize| -> f64 {
        reports.iter().zip(&weights).map(|(r, w)| w * f(r, i)).sum()
    };
    let mut mean_abs_defect = Vec::with_capacity(n);
    let mut averaged_defect = Vec::with_capacity(n);
    let mut rate = Vec::with_capacity(n);
    let mut identity_lhs = Vec::with_capacity(n);
    let mut identity_rhs = Vec::with_capacity(n);
    for i in 0..n {
        mean_abs_defect.push(avg(&|r, i| r.delta[i].abs(), i));
        let mean_n = avg(&|r, i| r.big_n[i], i);
        averaged_defect.push((1.0 - mean_n / tj.big_t[i]).abs());
        rate.push(sup.sup * tjm1.t[i] / tj.big_t[i]);
        identity_lhs.push(
            reports
                .iter()
                .zip(&base)
                .zip(&weights)
                .map(|((r, b), w)| w * (r.proximity[i] - b))
                .sum(),
        );
        identity_rhs.push(tj.big_t[i] - mean_n);
    }
    let ratio: Vec<f64> = mean_abs_defect.iter().zip(&rate).map(|(d, r)| d / r).collect();
    let fitted_c = ratio.iter().step_by(2).copied().fold(0.0, f64::max);
    let test_max_ratio = ratio.iter().skip(1).step_by(2).copied().fold(0.0, f64::max);
    let tails = TAIL_LEVELS
        .iter()
        .map(|&eps| TailReport {
            eps,
            fraction: (0..n)
                .map(|i| {
                    reports
                        .iter()
                        .zip(&weights)
                        .filter(|(r, _)| r.delta[i] > eps)
                        .map(|(_, w)| w)
                        .sum()
                })
                .collect(),
            bound: rate.iter().map(|r| fitted_c * r / eps).collect(),
        })
        .collect();
    Ok(DefectSuite {
        schema: SCHEMA_VERSION.into(),
        map_id: map.id().into(),
        exhaustion_id: exh.id().into(),
        radii: tj.radii.clone(),
        weights,
        reports,
        sup,
        mean_abs_defect,
        averaged_defect,
        rate,
        fitted_c,
        test_max_ratio,
        bound_holds_on_test: test_max_ratio <= FIT_SLACK * fitted_c,
        identity_lhs,
        identity_rhs,
        tails,
    })
}

impl DefectSuite {
    /// `ν{δ > 0.2} / ν{δ > 0.4}` per radius; `None` where the upper tail is
    /// empty.
    pub fn tail_ratios(&self) -> Vec<Option<f64>> {
        let (lo, hi) = (&self.tails[0], &self.tails[1]);
        lo.fraction
            .iter()
            .zip(&hi.fraction)
            .map(|(a, b)| if *b > 0.0 { Some(a / b) } else { None })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::standard_exhaustion;
    use crate::nevanlinna::{characteristic, Schedule, WeightKind};

    #[test]
    fn measure_validation() {
        let a = DivisorSpec::value(C64::new(1.0, 0.0));
        assert!(DiscreteMeasure::new(vec![]).is_err());
        assert!(DiscreteMeasure::new(vec![(a.clone(), 0.5)]).is_err());
        assert!(DiscreteMeasure::new(vec![(a.clone(), 1.5), (a.clone(), -0.5)]).is_err());
        assert!(DiscreteMeasure::new(vec![(a.clone(), 0.25), (a, 0.75)]).is_ok());
        assert!(DiscreteMeasure::new(vec![(DivisorSpec::infinity(1), 0.5), (DivisorSpec::infinity(2), 0.5)]).is_err());
    }

    #[test]
    fn dirac_potential_is_infinite_on_its_divisor() {
        let a = C64::new(2.0, -1.0);
        let nu = DiscreteMeasure::dirac(DivisorSpec::value(a));
        let on = ChartPoint::new(0, vec![a]).unwrap();
        assert_eq!(
            proximity_potential(&nu, &on).unwrap(),
            PotentialValue::Infinite { atom: 0 }
        );
        let off = ChartPoint::new(0, vec![C64::new(0.0, 0.0)]).unwrap();
        let v = proximity_potential(&nu, &off).unwrap().finite().unwrap();
        assert!(v >= 0.0);
    }

    #[test]
    fn spread_measure_has_bounded_potential() {
        let nu = DiscreteMeasure::uniform(DivisorSpec::sample_hyperplanes(1, 200, 11)).unwrap();
        let sup = nu.sup_norm();
        assert!(sup.sup.is_finite() && sup.sup < 5.0, "{sup:?}");
        assert!(sup.capacity_lower_bound > 0.2);
    }

    #[test]
    fn power_map_defects() {
        let map = MapSpec::power(2).unwrap();
        let e = standard_exhaustion("logAbs", 1).unwrap();
        let s = Schedule::linear(1.0, 4.0, 6).unwrap();
        let plan = QuadPlan::grid(20_000);
        let t1 = characteristic(&map, &e, 1, &s, WeightKind::Ddc, &plan).unwrap();
        let t0 = characteristic(&map, &e, 0, &s, WeightKind::Ddc, &plan).unwrap();
        let nu = DiscreteMeasure::uniform_values(8, 5).unwrap();
        let suite = defect_suite(&map, &e, &nu, &t1, &t0, &plan).unwrap();
        assert!(suite.mean_abs_defect.last().unwrap() < &suite.mean_abs_defect[0]);
        for i in 0..s.len() {
            assert!(
                (suite.identity_lhs[i] - suite.identity_rhs[i]).abs() < 1e-2,
                "{i}: {suite:?}"
            );
        }
        // The pole set is never hit.
        let inf = DefectReport::compute(
            &map,
            &e,
            &DivisorSpec::infinity(1),
            &t1,
            CountMode::ArgumentPrinciple,
            &plan,
        )
        .unwrap();
        assert!(inf.delta.iter().all(|d| *d == 1.0));
    }
}

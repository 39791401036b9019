//! Discretized Ahlfors currents `S_{j,r}` as weighted point clouds on `ℙᵐ`.
//!
//! A current of degree `j` at radius `r` pairs a test form `ψ` of bidegree
//! `(j,j)` with `∫ u_r (dd^cτ)^{k−j} ∧ φ*ψ`, where `u_r = r − max(τ, r₀)` for
//! `dd^c`-weights and `(1 − max(τ, r₀)/r)` for `d`-weights, both cut off at
//! `τ = r`. Every quadrature node `x` becomes a sample at `y = φ(x)` carrying
//! weight `u_r · density · cell volume`, so the mass `c_r` (the pairing with
//! `ω^j`) is the sum of the weights.
//!
//! Text layout: the first line is a JSON [`CurrentHeader`], the second a
//! `#`-prefixed column list, then one sample per line with whitespace
//! separated columns `chart`, `y` as `m` re/im pairs, `w`, `coarse_w`,
//! `shell`, and the source point `x` as `k` re/im pairs.

mod analysis;
mod bounds;
mod derivative;

pub use analysis::{
    brody_detector, cluster_analysis, density_point_ratio, intersection_positivity, weighted_preimage_mass,
    BrodyDegree, BrodyReport, BrodyVerdict, ClusterReport, DensityPointReport, IntersectionReport, BRODY_THRESHOLD,
};
pub use bounds::{ddc_bound, DdcBoundReport, BOUND_SLACK};
pub use derivative::{d_pairing, ddc_pairing, ddc_pairing_jensen, extrapolate_delta, DdcPairing, OneForm, DELTAS};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{dictionary, ChartPoint, Part, TestForm, TestFunction, DICTIONARY_VERSION};
use crate::maps::{ExhaustionKind, ExhaustionSpec, MapSpec};
use crate::nevanlinna::{wedge_density, Schedule, WeightKind};
use crate::quad::{map_nodes, shell_edges, QuadPlan, Strategy};

pub const SCHEMA_VERSION: &str = "nevlab-current/1";
/// Number of dictionary entries in a [`MomentVector`].
pub const MOMENT_LEN: usize = 12;
/// Samples lighter than this are not stored.
const MIN_WEIGHT: f64 = 1e-25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentHeader {
    pub schema: String,
    pub map_id: String,
    pub exhaustion_id: String,
    pub k: usize,
    pub m: usize,
    pub j: usize,
    pub r: f64,
    pub weight: WeightKind,
    /// `c_r`, or 1 once normalized.
    pub mass: f64,
    pub mass_err: f64,
    pub plan: QuadPlan,
    pub normalized: bool,
    /// Quadrature nodes per shell, including dropped ones; needed for the
    /// Monte Carlo variance.
    pub shell_samples: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub y: ChartPoint,
    pub w: f64,
    /// Weight in the coarse sub-rule (grid plans); equals `w` for Monte Carlo.
    pub coarse_w: f64,
    pub shell: usize,
    pub x: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurrent {
    pub header: CurrentHeader,
    pub samples: Vec<Sample>,
}

/// A pairing with its quadrature error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub value: f64,
    pub stderr: f64,
}

pub(crate) fn check_current_degree(exh: &ExhaustionSpec, j: usize) -> Result<()> {
    if j > exh.k() {
        return Err(Error::InvalidParam(format!("degree j = {j} exceeds k = {}", exh.k())));
    }
    Ok(())
}

/// Weight `u_r(τ)` of the given kind, zero outside `B_r`.
pub fn weight_at(exh: &ExhaustionSpec, weight: WeightKind, r: f64, tau: f64) -> f64 {
    let u = (r - tau.max(exh.r0())).max(0.0);
    match weight {
        WeightKind::Ddc => u,
        WeightKind::D => u / r,
    }
}

/// Builds `S_{j,r}` from the quadrature nodes of `B_r`.
pub fn build_current(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    r: f64,
    weight: WeightKind,
    plan: &QuadPlan,
) -> Result<DiscreteCurrent> {
    exh.check_map(map)?;
    check_current_degree(exh, j)?;
    Schedule::new(vec![r])?.check_within(exh)?;
    plan.validate()?;
    if weight == WeightKind::D && exh.r0() < 0.0 {
        return Err(Error::Unsupported(format!(
            "d-case weights need r0 >= 0; {} has r0 = {}",
            exh.id(),
            exh.r0()
        )));
    }
    let k = exh.k();
    let mut header = CurrentHeader {
        schema: SCHEMA_VERSION.into(),
        map_id: map.id().into(),
        exhaustion_id: exh.id().into(),
        k,
        m: map.m(),
        j,
        r,
        weight,
        mass: 0.0,
        mass_err: 0.0,
        plan: *plan,
        normalized: false,
        shell_samples: vec![],
    };
    let samples = if j == 0 {
        // (dd^cτ)^k is the point mass at the pole.
        if exh.kind() == ExhaustionKind::PuncturedDisk {
            return Err(Error::Unsupported("j = 0 currents on the punctured disk".into()));
        }
        let x = vec![C64::new(0.0, 0.0); k];
        let w = exh.point_mass() * weight_at(exh, weight, r, f64::NEG_INFINITY);
        header.shell_samples = vec![1];
        vec![Sample {
            y: ChartPoint::from_homogeneous(&map.eval_scaled(&x).0),
            w,
            coarse_w: w,
            shell: 0,
            x,
        }]
    } else {
        let edges = shell_edges(exh, exh.u_floor(), r, plan, &[exh.r0()]);
        let mut counts = vec![0usize; edges.len().saturating_sub(1)];
        let nodes = map_nodes(exh, &edges, plan, |n| {
            let u = weight_at(exh, weight, r, n.u);
            if u == 0.0 {
                return Ok(Some((n.shell, None)));
            }
            let rho = wedge_density(map, exh, None, k - j, j, &n.z)?;
            if !rho.is_finite() {
                return Err(Error::NonFinite(format!("current density at z = {:?}", n.z)));
            }
            let w = n.weight * u * rho;
            let coarse_w = n.coarse_weight * u * rho;
            if w.abs() < MIN_WEIGHT && coarse_w.abs() < MIN_WEIGHT {
                return Ok(Some((n.shell, None)));
            }
            Ok(Some((
                n.shell,
                Some(Sample {
                    y: ChartPoint::from_homogeneous(&map.eval_scaled(&n.z).0),
                    w,
                    coarse_w,
                    shell: n.shell,
                    x: n.z.clone(),
                }),
            )))
        })?;
        let mut samples = Vec::with_capacity(nodes.len());
        for (shell, s) in nodes {
            counts[shell] += 1;
            samples.extend(s);
        }
        header.shell_samples = counts;
        samples
    };
    let mut current = DiscreteCurrent { header, samples };
    let one = current.pair_fn(|_| 1.0);
    if !(one.value > 0.0) {
        return Err(Error::Degenerate(format!(
            "current of {} at r = {r} has zero mass",
            map.id()
        )));
    }
    current.header.mass = one.value;
    current.header.mass_err = one.stderr;
    Ok(current)
}

/// `⟨S, ψ⟩` with `ψ = f · ω^j`.
pub fn pair(current: &DiscreteCurrent, psi: &TestForm) -> Result<Pairing> {
    if psi.j != current.header.j {
        return Err(Error::InvalidParam(format!(
            "form degree {} does not match current degree {}",
            psi.j, current.header.j
        )));
    }
    if psi.f.m != current.header.m {
        return Err(Error::DimensionMismatch {
            expected: current.header.m,
            got: psi.f.m,
        });
    }
    Ok(current.pair_fn(|z| psi.eval(z)))
}

impl DiscreteCurrent {
    pub fn mass(&self) -> f64 {
        self.header.mass
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Σ wᵢ f(yᵢ)` for a function of homogeneous coordinates, with the
    /// per-shell error of the underlying quadrature.
    pub fn pair_fn<F: Fn(&[C64]) -> f64>(&self, f: F) -> Pairing {
        // shell -> (Σ w f, Σ (w − coarse) f, Σ (w f)²)
        let mut shells: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
        for s in &self.samples {
            let v = f(&s.y.to_homogeneous());
            let e = shells.entry(s.shell).or_default();
            e.0 += s.w * v;
            e.1 += (s.w - s.coarse_w) * v;
            e.2 += (s.w * v).powi(2);
        }
        let value = shells.values().map(|e| e.0).sum();
        let stderr = match self.header.plan.strategy {
            _ if self.header.j == 0 => 0.0,
            Strategy::RadialGrid => shells.values().map(|e| e.1.abs()).sum(),
            Strategy::MonteCarlo => shells
                .iter()
                .map(|(&sh, e)| {
                    let n = self.header.shell_samples.get(sh).copied().unwrap_or(0) as f64;
                    if n < 2.0 {
                        0.0
                    } else {
                        ((e.2 - e.0 * e.0 / n) * n / (n - 1.0)).max(0.0)
                    }
                })
                .sum::<f64>()
                .sqrt(),
        };
        Pairing { value, stderr }
    }

    /// `S / c_r`, of mass 1.
    pub fn normalize(&self) -> DiscreteCurrent {
        if self.header.normalized {
            return self.clone();
        }
        let c = self.header.mass;
        let mut out = self.clone();
        for s in &mut out.samples {
            s.w /= c;
            s.coarse_w /= c;
        }
        out.header.mass = out.samples.iter().map(|s| s.w).sum();
        out.header.mass_err = self.header.mass_err / c;
        out.header.normalized = true;
        out
    }

    /// Moments against the first [`MOMENT_LEN`] dictionary functions, after
    /// normalization.
    pub fn moments(&self) -> MomentVector {
        let c = self.header.mass;
        let (entries, errors) = dictionary(self.header.m)
            .iter()
            .take(MOMENT_LEN)
            .map(|f| {
                let p = self.pair_fn(|z| f.eval(z));
                (p.value / c, p.stderr / c)
            })
            .unzip();
        MomentVector {
            version: DICTIONARY_VERSION.into(),
            j: self.header.j,
            m: self.header.m,
            r: Some(self.header.r),
            entries,
            errors,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        let mut cols = vec!["chart".to_string()];
        for i in 0..self.header.m {
            cols.push(format!("y{i}_re"));
            cols.push(format!("y{i}_im"));
        }
        cols.extend(["w", "coarse_w", "shell"].map(String::from));
        for i in 0..self.header.k {
            cols.push(format!("x{i}_re"));
            cols.push(format!("x{i}_im"));
        }
        let _ = writeln!(out, "# {}", cols.join(" "));
        for s in &self.samples {
            let _ = write!(out, "{}", s.y.chart);
            for c in &s.y.w {
                let _ = write!(out, " {:e} {:e}", c.re, c.im);
            }
            let _ = write!(out, " {:e} {:e} {}", s.w, s.coarse_w, s.shell);
            for c in &s.x {
                let _ = write!(out, " {:e} {:e}", c.re, c.im);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: CurrentHeader =
            serde_json::from_str(lines.next().ok_or_else(|| Error::Parse("empty file".into()))?)
                .map_err(|e| Error::Parse(format!("current header: {e}")))?;
        let (m, k) = (header.m, header.k);
        let width = 1 + 2 * m + 3 + 2 * k;
        let mut samples = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != width {
                return Err(Error::Parse(format!(
                    "sample line {}: {} columns, expected {width}",
                    ln + 2,
                    f.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                f[i].parse::<f64>()
                    .map_err(|e| Error::Parse(format!("sample line {}, column {}: {e}", ln + 2, i + 1)))
            };
            let int = |i: usize| -> Result<usize> {
                f[i].parse::<usize>()
                    .map_err(|e| Error::Parse(format!("sample line {}, column {}: {e}", ln + 2, i + 1)))
            };
            let pairs = |start: usize, n: usize| -> Result<Vec<C64>> {
                (0..n)
                    .map(|i| Ok(C64::new(num(start + 2 * i)?, num(start + 2 * i + 1)?)))
                    .collect()
            };
            let y = ChartPoint::new(int(0)?, pairs(1, m)?)?;
            let w = num(1 + 2 * m)?;
            if w < 0.0 {
                return Err(Error::Parse(format!("sample line {}: negative weight", ln + 2)));
            }
            samples.push(Sample {
                y,
                w,
                coarse_w: num(2 + 2 * m)?,
                shell: int(3 + 2 * m)?,
                x: pairs(4 + 2 * m, k)?,
            });
        }
        Ok(Self { header, samples })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if let Some(s) = self.samples.iter().find(|s| !(s.w >= 0.0)) {
            return Err(Error::InvalidParam(format!("negative sample weight {}", s.w)));
        }
        let total: f64 = self.samples.iter().map(|s| s.w).sum();
        if (total - self.header.mass).abs() > 1e-12 * self.header.mass.abs().max(1.0) {
            return Err(Error::InvalidParam(format!(
                "stored mass {} differs from weight sum {total}",
                self.header.mass
            )));
        }
        Ok(())
    }
}

/// Pairings of a normalized current with the first [`MOMENT_LEN`] dictionary
/// functions; entry 0 is the mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub version: String,
    pub j: usize,
    pub m: usize,
    pub r: Option<f64>,
    pub entries: Vec<f64>,
    pub errors: Vec<f64>,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Exact dictionary moments of the Fubini–Study probability measure: the
/// modulus entries `|Z^α|²/‖Z‖^{2d}` average to `α! m! / (m + d)!`, the mixed
/// entries vanish by torus symmetry.
pub fn fs_moment(f: &TestFunction) -> f64 {
    if f.degree == 0 {
        return 1.0;
    }
    match f.part {
        Part::Modulus => {
            let a: f64 = f.alpha.iter().map(|&e| factorial(e)).product();
            a * factorial(f.m as u32) / factorial(f.m as u32 + f.degree)
        }
        _ => 0.0,
    }
}

impl MomentVector {
    /// Moments of the Fubini–Study measure `ωᵐ` on `ℙᵐ`.
    pub fn fubini_study(m: usize) -> Self {
        let entries: Vec<f64> = dictionary(m).iter().take(MOMENT_LEN).map(fs_moment).collect();
        Self {
            version: DICTIONARY_VERSION.into(),
            j: m,
            m,
            r: None,
            errors: vec![0.0; entries.len()],
            entries,
        }
    }

    /// Sup-norm distance between entries.
    pub fn distance(&self, other: &MomentVector) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest combined error of the entries.
    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::fs_uniform_points;
    use crate::maps::{catalog, standard_exhaustion, MapParams};
    use crate::nevanlinna::characteristic;

    fn log_abs() -> ExhaustionSpec {
        standard_exhaustion("logAbs", 1).unwrap()
    }

    #[test]
    fn mass_matches_characteristic() {
        let exh = log_abs();
        let plan = QuadPlan::grid(40_000);
        for d in [2, 3] {
            let map = MapSpec::power(d).unwrap();
            let cur = build_current(&map, &exh, 1, 2.0, WeightKind::Ddc, &plan).unwrap();
            let t = characteristic(
                &map,
                &exh,
                1,
                &Schedule::new(vec![2.0]).unwrap(),
                WeightKind::Ddc,
                &plan,
            )
            .unwrap();
            let err = 3.0 * (cur.header.mass_err + t.big_t_err[0]) + 1e-9;
            assert!(
                (cur.mass() - t.big_t[0]).abs() < err,
                "{} vs {}",
                cur.mass(),
                t.big_t[0]
            );
            cur.check_invariants().unwrap();
            let psi = TestForm::new(1, 1, 0).unwrap();
            assert_eq!(pair(&cur, &psi).unwrap().value, cur.pair_fn(|_| 1.0).value);
        }
    }

    #[test]
    fn d_case_mass_is_t_over_r() {
        let exh = log_abs();
        let plan = QuadPlan::grid(20_000);
        let map = MapSpec::power(2).unwrap();
        let d = build_current(&map, &exh, 1, 3.0, WeightKind::D, &plan).unwrap();
        let ddc = build_current(&map, &exh, 1, 3.0, WeightKind::Ddc, &plan).unwrap();
        assert!((d.mass() * 3.0 - ddc.mass()).abs() < 1e-10 * ddc.mass());
    }

    #[test]
    fn degree_zero_is_a_point_mass() {
        let exh = log_abs();
        let cur = build_current(&MapSpec::exp(), &exh, 0, 2.5, WeightKind::Ddc, &QuadPlan::grid(1000)).unwrap();
        assert_eq!(cur.len(), 1);
        assert!((cur.mass() - 2.5).abs() < 1e-15);
        let punct = standard_exhaustion("puncturedDisk", 1).unwrap();
        let disk = catalog("diskCover", &MapParams::default()).unwrap();
        assert!(matches!(
            build_current(&disk, &punct, 0, 1.0, WeightKind::Ddc, &QuadPlan::grid(1000)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn normalized_mass_is_one() {
        let cur = build_current(
            &MapSpec::exp(),
            &log_abs(),
            1,
            2.0,
            WeightKind::Ddc,
            &QuadPlan::monte_carlo(20_000, 3),
        )
        .unwrap()
        .normalize();
        assert!((cur.mass() - 1.0).abs() < 1e-12);
        cur.check_invariants().unwrap();
        assert!((cur.moments().entries[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn odd_test_function_pairs_to_zero() {
        // z² pushes forward a rotation-invariant measure, Re(Z₀ conj Z₁) is odd.
        let cur = build_current(
            &MapSpec::power(2).unwrap(),
            &log_abs(),
            1,
            2.0,
            WeightKind::Ddc,
            &QuadPlan::monte_carlo(40_000, 9),
        )
        .unwrap();
        let psi = TestForm::new(1, 1, 2).unwrap();
        assert_eq!(psi.f.part, Part::Re);
        let p = pair(&cur, &psi).unwrap();
        assert!(p.value.abs() < 2.0 * p.stderr.max(1e-12), "{p:?}");
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let cur = build_current(
            &MapSpec::exp(),
            &log_abs(),
            1,
            1.0,
            WeightKind::Ddc,
            &QuadPlan::grid(2000),
        )
        .unwrap();
        assert!(pair(&cur, &TestForm::new(1, 0, 1).unwrap()).is_err());
    }

    #[test]
    fn constant_map_is_degenerate() {
        let map = catalog(
            "constant",
            &MapParams {
                value: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(
            build_current(&map, &log_abs(), 1, 1.0, WeightKind::Ddc, &QuadPlan::grid(2000)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let cur = build_current(
            &MapSpec::power(3).unwrap(),
            &log_abs(),
            1,
            1.0,
            WeightKind::Ddc,
            &QuadPlan::monte_carlo(2000, 1),
        )
        .unwrap();
        let back = DiscreteCurrent::from_text(&cur.to_text()).unwrap();
        assert_eq!(back, cur);
    }

    #[test]
    fn fs_moments_match_sampling() {
        for m in [1, 2] {
            let exact = MomentVector::fubini_study(m);
            let pts = fs_uniform_points(m, 200_000, 77);
            for (f, e) in dictionary(m).iter().take(MOMENT_LEN).zip(&exact.entries) {
                let mean = pts.iter().map(|z| f.eval(z)).sum::<f64>() / pts.len() as f64;
                assert!((mean - e).abs() < 5e-3, "{} {mean} {e}", f.label());
            }
        }
    }

    #[test]
    fn weight_vanishes_on_the_boundary() {
        let exh = log_abs();
        for w in [WeightKind::D, WeightKind::Ddc] {
            assert_eq!(weight_at(&exh, w, 2.0, 2.0), 0.0);
        }
    }
}

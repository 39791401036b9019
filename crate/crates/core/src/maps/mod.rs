//! Holomorphic maps into `ℙᵐ`, exhaustions of their domains, and divisors.

mod exhaustion;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::{fs_pullback, HermitianForm};

pub use exhaustion::{standard_exhaustion, ExhaustionKind, ExhaustionSpec};

/// Where a map is defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// All of `ℂᵏ`.
    Whole,
    /// The open unit disk or ball.
    UnitBall,
}

/// Parameters accepted by [`catalog`]. Unused fields are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    /// Degree for `power`.
    pub d: Option<i64>,
    /// Scale factor for `scaleUp`, `scaleDown`, `expScaled`.
    pub n: Option<f64>,
    /// Real polynomial coefficients, lowest degree first, one list per
    /// component, for `polyk` and `poly`.
    pub coeffs: Option<Vec<Vec<f64>>>,
    /// Value for `constant`.
    pub value: Option<f64>,
}

type EvalFn = dyn Fn(&[C64]) -> Vec<C64> + Send + Sync;
type JacFn = dyn Fn(&[C64]) -> DMatrix<C64> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Power(u32),
    Exp(f64),
    ExpCurve,
    PolyK(Vec<Vec<C64>>),
    DiskCover,
    Scale(f64),
    Constant(C64),
    Custom { eval: Arc<EvalFn>, jac: Arc<JacFn> },
}

/// A holomorphic map `φ: X ⊂ ℂᵏ → ℙᵐ` through a homogeneous representative.
#[derive(Clone)]
pub struct MapSpec {
    id: String,
    k: usize,
    m: usize,
    domain: Domain,
    kind: Kind,
}

impl fmt::Debug for MapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapSpec")
            .field("id", &self.id)
            .field("k", &self.k)
            .field("m", &self.m)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Catalog ids with a one-line description, as listed by the CLI.
pub const CATALOG: &[(&str, &str)] = &[
    ("power", "C -> P1, z -> [1 : z^d]; params d >= 1"),
    ("exp", "C -> P1, z -> [1 : e^z]"),
    ("expScaled", "C -> P1, z -> [1 : e^(n z)]; params n > 0"),
    ("expCurve", "C -> P2, z -> [1 : z : e^z]"),
    ("polyk", "C^k -> P^k, z -> [1 : p1(z1) : ... : pk(zk)]; params coeffs"),
    ("poly", "C -> P1, z -> [1 : p(z)]; params coeffs (one list)"),
    ("diskCover", "unit disk -> P1, z -> [1 : exp((1+z)/(1-z))]"),
    ("scaleUp", "C -> P1, z -> [1 : n z]; params n > 0"),
    ("scaleDown", "C -> P1, z -> [1 : z/n]; params n > 0"),
    ("constant", "C -> P1, z -> [1 : value] (degenerate)"),
];

fn poly_eval(c: &[C64], z: C64) -> (C64, C64) {
    // Horner for value and derivative
    let mut v = C64::new(0.0, 0.0);
    let mut dv = C64::new(0.0, 0.0);
    for a in c.iter().rev() {
        dv = dv * z + v;
        v = v * z + a;
    }
    (v, dv)
}

fn positive_n(params: &MapParams, id: &str) -> Result<f64> {
    match params.n {
        Some(n) if n > 0.0 && n.is_finite() => Ok(n),
        Some(n) => Err(Error::InvalidParam(format!("{id}: n must be positive, got {n}"))),
        None => Err(Error::InvalidParam(format!("{id}: missing parameter n"))),
    }
}

/// Builds a catalog map.
pub fn catalog(id: &str, params: &MapParams) -> Result<MapSpec> {
    let spec = |k, m, domain, kind| MapSpec {
        id: id.to_string(),
        k,
        m,
        domain,
        kind,
    };
    Ok(match id {
        "power" => {
            let d = params
                .d
                .ok_or_else(|| Error::InvalidParam("power: missing parameter d".into()))?;
            if d <= 0 {
                return Err(Error::InvalidParam(format!("power: d must be positive, got {d}")));
            }
            spec(1, 1, Domain::Whole, Kind::Power(d as u32))
        }
        "exp" => spec(1, 1, Domain::Whole, Kind::Exp(1.0)),
        "expScaled" => spec(1, 1, Domain::Whole, Kind::Exp(positive_n(params, id)?)),
        "expCurve" => spec(1, 2, Domain::Whole, Kind::ExpCurve),
        "polyk" | "poly" => {
            let coeffs = params
                .coeffs
                .clone()
                .ok_or_else(|| Error::InvalidParam(format!("{id}: missing parameter coeffs")))?;
            if coeffs.is_empty() || coeffs.iter().any(|c| c.len() < 2 || c.iter().any(|x| !x.is_finite())) {
                return Err(Error::InvalidParam(format!(
                    "{id}: each component needs finite coefficients of degree >= 1"
                )));
            }
            if id == "poly" && coeffs.len() != 1 {
                return Err(Error::InvalidParam("poly: expects exactly one coefficient list".into()));
            }
            if coeffs.iter().any(|c| c.iter().skip(1).all(|&x| x == 0.0)) {
                return Err(Error::InvalidParam(format!("{id}: constant component")));
            }
            let k = coeffs.len();
            let cs = coeffs
                .into_iter()
                .map(|c| c.into_iter().map(|x| C64::new(x, 0.0)).collect())
                .collect();
            spec(k, k, Domain::Whole, Kind::PolyK(cs))
        }
        "diskCover" => spec(1, 1, Domain::UnitBall, Kind::DiskCover),
        "scaleUp" => spec(1, 1, Domain::Whole, Kind::Scale(positive_n(params, id)?)),
        "scaleDown" => spec(1, 1, Domain::Whole, Kind::Scale(1.0 / positive_n(params, id)?)),
        "constant" => spec(
            1,
            1,
            Domain::Whole,
            Kind::Constant(C64::new(params.value.unwrap_or(0.0), 0.0)),
        ),
        _ => {
            return Err(Error::UnknownId {
                kind: "map",
                id: id.to_string(),
            })
        }
    })
}

impl MapSpec {
    /// Power map `z ↦ [1 : z^d]`.
    pub fn power(d: u32) -> Result<Self> {
        catalog(
            "power",
            &MapParams {
                d: Some(d as i64),
                ..Default::default()
            },
        )
    }

    pub fn exp() -> Self {
        catalog("exp", &MapParams::default()).expect("exp has no parameters")
    }

    /// Componentwise polynomial map from coefficient lists.
    pub fn polyk(coeffs: Vec<Vec<f64>>) -> Result<Self> {
        catalog(
            "polyk",
            &MapParams {
                coeffs: Some(coeffs),
                ..Default::default()
            },
        )
    }

    /// User-supplied map. `eval` and `jac` must be thread-safe and describe the
    /// same homogeneous representative.
    pub fn custom<E, J>(k: usize, m: usize, domain: Domain, eval: E, jac: J) -> Self
    where
        E: Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static,
        J: Fn(&[C64]) -> DMatrix<C64> + Send + Sync + 'static,
    {
        Self {
            id: "custom".into(),
            k,
            m,
            domain,
            kind: Kind::Custom {
                eval: Arc::new(eval),
                jac: Arc::new(jac),
            },
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Homogeneous coordinates at `z`.
    pub fn eval(&self, z: &[C64]) -> Vec<C64> {
        self.eval_scaled(z).0
    }

    /// Jacobian of the unscaled representative, multiplied by the same factor
    /// as [`MapSpec::eval`].
    pub fn jac(&self, z: &[C64]) -> DMatrix<C64> {
        self.eval_scaled(z).1
    }

    /// Homogeneous coordinates and Jacobian, both multiplied by a common
    /// positive factor chosen so nothing overflows. Metric quantities are
    /// invariant under this rescaling.
    pub fn eval_scaled(&self, z: &[C64]) -> (Vec<C64>, DMatrix<C64>) {
        let (f, j, _) = self.eval_with_scale(z);
        (f, j)
    }

    /// Like [`MapSpec::eval_scaled`], also returning `log s` where `s` is the
    /// factor the unscaled representative was multiplied by.
    pub fn eval_with_scale(&self, z: &[C64]) -> (Vec<C64>, DMatrix<C64>, f64) {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match &self.kind {
            Kind::Power(d) => {
                let w = z[0].powu(*d);
                let dw = if *d == 0 { zero } else { z[0].powu(d - 1) * (*d as f64) };
                (vec![one, w], DMatrix::from_column_slice(2, 1, &[zero, dw]), 0.0)
            }
            Kind::Exp(n) => {
                let arg = z[0] * n;
                let s = arg.re.max(0.0);
                let lead = (-s).exp();
                let e = (arg - s).exp();
                (
                    vec![C64::new(lead, 0.0), e],
                    DMatrix::from_column_slice(2, 1, &[zero, e * n]),
                    -s,
                )
            }
            Kind::ExpCurve => {
                let s = z[0].re.max(0.0);
                let f = (-s).exp();
                let e = (z[0] - s).exp();
                (
                    vec![C64::new(f, 0.0), z[0] * f, e],
                    DMatrix::from_column_slice(3, 1, &[zero, C64::new(f, 0.0), e]),
                    -s,
                )
            }
            Kind::PolyK(cs) => {
                let k = cs.len();
                let mut coords = vec![one];
                let mut jac = DMatrix::zeros(k + 1, k);
                for (i, c) in cs.iter().enumerate() {
                    let (v, dv) = poly_eval(c, z[i]);
                    coords.push(v);
                    jac[(i + 1, i)] = dv;
                }
                (coords, jac, 0.0)
            }
            Kind::DiskCover => {
                let q = (one + z[0]) / (one - z[0]);
                let dq = 2.0 / ((one - z[0]) * (one - z[0]));
                let s = q.re.max(0.0);
                let e = (q - s).exp();
                (
                    vec![C64::new((-s).exp(), 0.0), e],
                    DMatrix::from_column_slice(2, 1, &[zero, e * dq]),
                    -s,
                )
            }
            Kind::Scale(n) => (
                vec![one, z[0] * n],
                DMatrix::from_column_slice(2, 1, &[zero, C64::new(*n, 0.0)]),
                0.0,
            ),
            Kind::Constant(c) => (vec![one, *c], DMatrix::zeros(2, 1), 0.0),
            Kind::Custom { eval, jac } => (eval(z), jac(z), 0.0),
        }
    }

    /// `φ*ω` at `z`.
    pub fn pullback_fs(&self, z: &[C64]) -> HermitianForm {
        let (f, j) = self.eval_scaled(z);
        fs_pullback(&f, &j)
    }

    /// Whether `z` lies in the domain.
    pub fn contains(&self, z: &[C64]) -> bool {
        match self.domain {
            Domain::Whole => true,
            Domain::UnitBall => z.iter().map(|c| c.norm_sqr()).sum::<f64>() < 1.0,
        }
    }

    fn probes(&self, n: usize, seed: u64) -> Vec<Vec<C64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = match self.domain {
            Domain::Whole => 2.0,
            Domain::UnitBall => 0.9,
        };
        (0..n)
            .map(|_| {
                let mut v: Vec<C64> = (0..self.k)
                    .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                    .collect();
                let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                let rho = radius * rng.random::<f64>().powf(1.0 / (2 * self.k) as f64);
                v.iter_mut().for_each(|c| *c *= rho / norm);
                v
            })
            .collect()
    }

    /// Largest relative deviation between the analytic Jacobian and a
    /// fourth-order complex difference of `eval`, over `probes` random points.
    pub fn jacobian_check(&self, probes: usize, seed: u64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for z in self.probes(probes, seed) {
            let (f0, jac, _) = self.eval_with_scale(&z);
            if f0.iter().all(|c| c.norm() == 0.0) {
                return Err(Error::Degenerate(format!("eval vanishes at {z:?}")));
            }
            let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            // the local length scale of disk maps shrinks like (1 − |z|)²
            let h = match self.domain {
                Domain::Whole => 1e-3 * (1.0 + n),
                Domain::UnitBall => 1e-3 * (1.0 - n).powi(2),
            };
            for q in 0..self.k {
                let col = numeric_column(self, &z, q, h);
                let scale = jac.column(q).norm().max(1e-12);
                for i in 0..=self.m {
                    worst = worst.max((jac[(i, q)] - col[i]).norm() / scale);
                }
            }
        }
        Ok(worst)
    }

    /// Fraction of random probes at which `φ*ω` has full rank `k`.
    pub fn nondegeneracy_fraction(&self, probes: usize, seed: u64) -> f64 {
        let pts = self.probes(probes, seed);
        let good = pts
            .iter()
            .filter(|z| {
                let form = self.pullback_fs(z);
                let max = form.coeff().iter().map(|c| c.norm()).fold(0.0, f64::max);
                max > 1e-300 && form.min_eigenvalue() > 1e-10 * max
            })
            .count();
        good as f64 / pts.len() as f64
    }
}

/// Fourth-order central difference of `eval` along `z_q`, with every sample
/// brought to the representative scale used at `z`.
fn numeric_column(map: &MapSpec, z: &[C64], q: usize, h: f64) -> Vec<C64> {
    let (_, _, ls0) = map.eval_with_scale(z);
    let at = |t: f64| {
        let mut w = z.to_vec();
        w[q] += t;
        let (f, _, ls) = map.eval_with_scale(&w);
        let r = (ls0 - ls).exp();
        f.into_iter().map(|c| c * r).collect::<Vec<_>>()
    };
    let samples = [at(2.0 * h), at(h), at(-h), at(-2.0 * h)];
    (0..=map.m)
        .map(|i| (-samples[0][i] + samples[1][i] * 8.0 - samples[2][i] * 8.0 + samples[3][i]) / (12.0 * h))
        .collect()
}

/// Divisor of `ℙᵐ`: a hyperplane `{⟨Z, a⟩ = 0}` with the bilinear pairing
/// `⟨Z, a⟩ = Σ Z_i a_i`, or a point (codimension `m`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DivisorSpec {
    Hyperplane { a: Vec<C64> },
    Point { p: Vec<C64> },
}

fn unit(v: Vec<C64>) -> Result<Vec<C64>> {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::InvalidParam("divisor vector must be finite and nonzero".into()));
    }
    Ok(v.into_iter().map(|c| c / n).collect())
}

impl DivisorSpec {
    /// Hyperplane with normal `a`, normalized to unit length.
    pub fn hyperplane(a: Vec<C64>) -> Result<Self> {
        Ok(Self::Hyperplane { a: unit(a)? })
    }

    /// Point with homogeneous coordinates `p`, normalized to unit length.
    pub fn point(p: Vec<C64>) -> Result<Self> {
        Ok(Self::Point { p: unit(p)? })
    }

    /// Preimage of the value `w ∈ ℂ` for a map `[1 : f]` into `ℙ¹`:
    /// the hyperplane `Z₁ − w Z₀ = 0`.
    pub fn value(w: C64) -> Self {
        Self::hyperplane(vec![-w, C64::new(1.0, 0.0)]).expect("nonzero normal")
    }

    /// The hyperplane `Z₀ = 0` (the value `∞` for maps `[1 : f]`).
    pub fn infinity(m: usize) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); m + 1];
        a[0] = C64::new(1.0, 0.0);
        Self::Hyperplane { a }
    }

    /// `count` FS-uniform hyperplanes (normals uniform on the unit sphere).
    pub fn sample_hyperplanes(m: usize, count: usize, seed: u64) -> Vec<Self> {
        crate::forms::dictionary::fs_uniform_points(m, count, seed)
            .into_iter()
            .map(|a| Self::Hyperplane { a })
            .collect()
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Hyperplane { a } => a.len() - 1,
            Self::Point { p } => p.len() - 1,
        }
    }

    /// Codimension in `ℙᵐ`.
    pub fn codim(&self) -> usize {
        match self {
            Self::Hyperplane { .. } => 1,
            Self::Point { p } => p.len() - 1,
        }
    }

    /// Normalized distance kernel `log(‖Z‖‖a‖/|⟨Z,a⟩|) ≥ 0` for hyperplanes and
    /// `log(‖Z‖‖p‖/‖Z ∧ p‖)` for points. `+∞` on the divisor.
    pub fn kernel(&self, z: &[C64]) -> f64 {
        let nz = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        match self {
            Self::Hyperplane { a } => {
                let ip: C64 = z.iter().zip(a).map(|(x, y)| x * y).sum();
                (nz / ip.norm()).ln()
            }
            Self::Point { p } => {
                let mut wedge = 0.0;
                for i in 0..p.len() {
                    for j in (i + 1)..p.len() {
                        wedge += (z[i] * p[j] - z[j] * p[i]).norm_sqr();
                    }
                }
                (nz / wedge.sqrt()).ln()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn all_catalog() -> Vec<MapSpec> {
        vec![
            MapSpec::power(3).unwrap(),
            MapSpec::exp(),
            catalog(
                "expScaled",
                &MapParams {
                    n: Some(2.0),
                    ..Default::default()
                },
            )
            .unwrap(),
            catalog("expCurve", &MapParams::default()).unwrap(),
            MapSpec::polyk(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap(),
            catalog(
                "poly",
                &MapParams {
                    coeffs: Some(vec![vec![-1.0, 0.0, 0.0, 1.0]]),
                    ..Default::default()
                },
            )
            .unwrap(),
            catalog("diskCover", &MapParams::default()).unwrap(),
            catalog(
                "scaleUp",
                &MapParams {
                    n: Some(4.0),
                    ..Default::default()
                },
            )
            .unwrap(),
            catalog(
                "scaleDown",
                &MapParams {
                    n: Some(4.0),
                    ..Default::default()
                },
            )
            .unwrap(),
        ]
    }

    #[test]
    fn power_three_at_one() {
        let m = MapSpec::power(3).unwrap();
        assert_eq!(m.eval(&[c(1.0, 0.0)]), vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let j = m.jac(&[c(1.0, 0.0)]);
        assert_eq!((j[(0, 0)], j[(1, 0)]), (c(0.0, 0.0), c(3.0, 0.0)));
    }

    #[test]
    fn exp_at_zero() {
        assert_eq!(MapSpec::exp().eval(&[c(0.0, 0.0)]), vec![c(1.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn polyk_squares() {
        let m = MapSpec::polyk(vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(
            m.eval(&[c(1.0, 0.0), c(2.0, 0.0)]),
            vec![c(1.0, 0.0), c(1.0, 0.0), c(4.0, 0.0)]
        );
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(
            catalog("nope", &MapParams::default()),
            Err(Error::UnknownId { .. })
        ));
        assert!(MapSpec::power(0).is_err());
        assert!(catalog(
            "power",
            &MapParams {
                d: Some(-2),
                ..Default::default()
            }
        )
        .is_err());
        assert!(catalog("scaleUp", &MapParams::default()).is_err());
        assert!(MapSpec::polyk(vec![vec![1.0]]).is_err());
    }

    #[test]
    fn exp_rescaling_survives_huge_arguments() {
        let m = MapSpec::exp();
        let (f, j) = m.eval_scaled(&[c(800.0, 1.0)]);
        assert!(f.iter().all(|x| x.re.is_finite() && x.im.is_finite()));
        assert!(j.iter().all(|x| x.re.is_finite()));
        let form = m.pullback_fs(&[c(800.0, 1.0)]);
        assert!(form.coeff()[(0, 0)].re.is_finite());
    }

    #[test]
    fn pullback_fs_of_exp_matches_closed_form() {
        // |e^z|² / (2 (1 + |e^z|²)²)
        let m = MapSpec::exp();
        for x in [-3.0f64, -0.5, 0.0, 1.3, 20.0] {
            let e2 = (2.0 * x).exp();
            let expected = e2 / (2.0 * (1.0 + e2) * (1.0 + e2));
            let got = m.pullback_fs(&[c(x, 0.7)]).coeff()[(0, 0)].re;
            assert!((got - expected).abs() < 1e-12 * expected.max(1e-300), "x={x}");
        }
    }

    #[test]
    fn catalog_jacobians_match_differences() {
        for m in all_catalog() {
            let dev = m.jacobian_check(100, 11).unwrap();
            assert!(dev < 1e-6, "{}: {dev}", m.id());
        }
    }

    #[test]
    fn catalog_maps_are_nondegenerate() {
        for m in all_catalog() {
            let frac = m.nondegeneracy_fraction(1000, 12);
            assert!(frac >= 0.99, "{}: {frac}", m.id());
        }
        let constant = catalog(
            "constant",
            &MapParams {
                value: Some(2.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(constant.nondegeneracy_fraction(100, 1), 0.0);
    }

    #[test]
    fn kernel_is_nonnegative_and_infinite_on_divisor() {
        let d = DivisorSpec::value(c(1.0, 0.0));
        for z in crate::forms::dictionary::fs_uniform_points(1, 500, 3) {
            assert!(d.kernel(&z) >= -1e-12);
        }
        assert_eq!(d.kernel(&[c(1.0, 0.0), c(1.0, 0.0)]), f64::INFINITY);
        let p = DivisorSpec::point(vec![c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(p.codim(), 2);
        assert_eq!(p.kernel(&[c(2.0, 0.0), c(4.0, 0.0), c(0.0, 2.0)]), f64::INFINITY);
    }

    #[test]
    fn divisors_are_unit() {
        let d = DivisorSpec::hyperplane(vec![c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        let DivisorSpec::Hyperplane { a } = d else {
            unreachable!()
        };
        assert!((a.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(DivisorSpec::hyperplane(vec![c(0.0, 0.0)]).is_err());
    }
}

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Domain, MapSpec};
use crate::error::{Error, Result};
use crate::forms::{mixed_wedge_density, HermitianForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExhaustionKind {
    /// `τ = log‖z‖` on `ℂᵏ`.
    LogAbs,
    /// `τ = log‖z‖` on the unit ball, `R = 0`.
    BallLog,
    /// `τ = log 1/|z|` on the punctured unit disk.
    PuncturedDisk,
}

/// Radial logarithmic exhaustion `τ` of a domain in `ℂᵏ`.
///
/// All three kinds are radial, so sublevel sets `B_r = {τ < r}` are balls or
/// annuli and `u = τ` doubles as the integration variable. `(dd^cτ)ᵏ`
/// vanishes away from the center, and the unit mass it carries (the Dirac
/// mass at 0, or for the punctured disk the flux of `d^cτ` through the
/// circle `τ = r₀`) is booked separately as [`ExhaustionSpec::point_mass`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustionSpec {
    kind: ExhaustionKind,
    k: usize,
}

/// Builds one of `logAbs`, `ballLog`, `puncturedDisk`.
pub fn standard_exhaustion(id: &str, k: usize) -> Result<ExhaustionSpec> {
    let kind = match id {
        "logAbs" => ExhaustionKind::LogAbs,
        "ballLog" => ExhaustionKind::BallLog,
        "puncturedDisk" => ExhaustionKind::PuncturedDisk,
        _ => {
            return Err(Error::UnknownId {
                kind: "exhaustion",
                id: id.to_string(),
            })
        }
    };
    ExhaustionSpec::new(kind, k)
}

impl ExhaustionSpec {
    pub fn new(kind: ExhaustionKind, k: usize) -> Result<Self> {
        if k == 0 || k > 3 {
            return Err(Error::InvalidParam(format!("domain dimension {k} not in 1..=3")));
        }
        if kind == ExhaustionKind::PuncturedDisk && k != 1 {
            return Err(Error::InvalidParam("puncturedDisk needs k = 1".into()));
        }
        Ok(Self { kind, k })
    }

    pub fn id(&self) -> &'static str {
        match self.kind {
            ExhaustionKind::LogAbs => "logAbs",
            ExhaustionKind::BallLog => "ballLog",
            ExhaustionKind::PuncturedDisk => "puncturedDisk",
        }
    }

    pub fn kind(&self) -> ExhaustionKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Supremum `R` of `τ`.
    pub fn r_max(&self) -> f64 {
        match self.kind {
            ExhaustionKind::BallLog => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// Base radius `r₀`: characteristic functions are cumulated from here.
    pub fn r0(&self) -> f64 {
        match self.kind {
            ExhaustionKind::BallLog => -4.0,
            _ => 0.0,
        }
    }

    /// Lowest `τ` reached by quadrature. Below it the integrands of interest
    /// carry mass of order `e^{2k·floor}`.
    pub fn u_floor(&self) -> f64 {
        match self.kind {
            ExhaustionKind::PuncturedDisk => 0.0,
            _ => self.r0() - 16.0,
        }
    }

    pub fn is_parabolic(&self) -> bool {
        true
    }

    pub fn is_log_type(&self) -> bool {
        true
    }

    pub fn has_finite_radius(&self) -> bool {
        self.r_max().is_finite()
    }

    /// Unit mass of `(dd^cτ)ᵏ` not seen by quadrature.
    pub fn point_mass(&self) -> f64 {
        1.0
    }

    /// Euclidean radius of the level set `τ = u`.
    pub fn radius_at(&self, u: f64) -> f64 {
        match self.kind {
            ExhaustionKind::PuncturedDisk => (-u).exp(),
            _ => u.exp(),
        }
    }

    /// `ρ^{2k−1} |dρ/du|`: Lebesgue measure is this times `du dS`, with `dS`
    /// the unit sphere measure.
    pub fn radial_jacobian(&self, u: f64) -> f64 {
        self.radius_at(u).powi(2 * self.k as i32)
    }

    fn norm_sqr(z: &[C64]) -> f64 {
        z.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        let s = Self::norm_sqr(z);
        match self.kind {
            ExhaustionKind::LogAbs => true,
            ExhaustionKind::BallLog => s < 1.0,
            ExhaustionKind::PuncturedDisk => s > 0.0 && s < 1.0,
        }
    }

    pub fn tau(&self, z: &[C64]) -> f64 {
        let t = 0.5 * Self::norm_sqr(z).ln();
        match self.kind {
            ExhaustionKind::PuncturedDisk => -t,
            _ => t,
        }
    }

    /// `∂τ/∂z̄`.
    pub fn grad_zbar(&self, z: &[C64]) -> Vec<C64> {
        let s = Self::norm_sqr(z);
        let sign = match self.kind {
            ExhaustionKind::PuncturedDisk => -1.0,
            _ => 1.0,
        };
        z.iter().map(|c| c * (sign * 0.5 / s)).collect()
    }

    /// `dd^cτ`: `½(I/‖z‖² − z zᴴ/‖z‖⁴)`, zero for the punctured disk.
    pub fn ddc(&self, z: &[C64]) -> HermitianForm {
        if self.kind == ExhaustionKind::PuncturedDisk {
            return HermitianForm::zero(1);
        }
        let s = Self::norm_sqr(z);
        let k = self.k;
        let mut a = DMatrix::<C64>::zeros(k, k);
        for p in 0..k {
            for q in 0..k {
                let delta = if p == q { 1.0 / s } else { 0.0 };
                a[(p, q)] = (C64::new(delta, 0.0) - z[p] * z[q].conj() / (s * s)) * 0.5;
            }
        }
        HermitianForm::new_positive(a).unwrap_or_else(|_| HermitianForm::zero(k))
    }

    /// Whether `map` can be evaluated on the whole domain of this exhaustion.
    pub fn check_map(&self, map: &MapSpec) -> Result<()> {
        if map.k() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: map.k(),
            });
        }
        if map.domain() == Domain::UnitBall && self.kind == ExhaustionKind::LogAbs {
            return Err(Error::InvalidParam(format!(
                "map {} lives on the unit ball; logAbs exhausts all of C^k",
                map.id()
            )));
        }
        Ok(())
    }

    /// Properness along random rays, positivity of `dd^cτ`, and vanishing of
    /// `(dd^cτ)ᵏ` above `r₀`.
    pub fn check_invariants(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = self.r_max().min(self.r0() + 8.0);
        for _ in 0..20 {
            let mut dir: Vec<C64> = (0..self.k)
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let n = Self::norm_sqr(&dir).sqrt();
            dir.iter_mut().for_each(|c| *c /= n);
            let mut last = f64::NEG_INFINITY;
            for i in 0..40 {
                let u = self.r0() + (top - self.r0()) * (i as f64 + 0.5) / 40.0;
                let rho = self.radius_at(u);
                let z: Vec<C64> = dir.iter().map(|c| c * rho).collect();
                let t = self.tau(&z);
                if t <= last {
                    return Err(Error::Degenerate(format!("{} not increasing along a ray", self.id())));
                }
                last = t;
                let form = self.ddc(&z);
                if form.min_eigenvalue() < -1e-10 * form.norm() {
                    return Err(Error::Degenerate(format!("{}: ddc not positive", self.id())));
                }
                let top_power = mixed_wedge_density(&[(&form, self.k)], self.k)?;
                if top_power.abs() > 1e-8 * form.norm().powi(self.k as i32).max(1.0) {
                    return Err(Error::Degenerate(format!("{}: (ddc tau)^k = {top_power:e}", self.id())));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::numeric_ddc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn invariants_hold_for_all_kinds() {
        for (id, k) in [
            ("logAbs", 1),
            ("logAbs", 2),
            ("logAbs", 3),
            ("ballLog", 1),
            ("ballLog", 2),
            ("puncturedDisk", 1),
        ] {
            let e = standard_exhaustion(id, k).unwrap();
            e.check_invariants(5).unwrap();
            assert!(e.is_parabolic());
        }
    }

    #[test]
    fn logabs_k2_ddc_is_degenerate_and_matches_numeric() {
        let e = standard_exhaustion("logAbs", 2).unwrap();
        let z = [c(1.0, 0.0), c(0.0, 0.0)];
        let f = e.ddc(&z);
        let det = (f.coeff()[(0, 0)] * f.coeff()[(1, 1)] - f.coeff()[(0, 1)] * f.coeff()[(1, 0)]).re;
        assert!(det.abs() < 1e-15);
        let z = [c(0.3, -0.4), c(1.2, 0.5)];
        let num = numeric_ddc(|w: &[C64]| e.tau(w), &z, None).unwrap();
        assert!((num.coeff() - e.ddc(&z).coeff()).norm() < 1e-6);
    }

    #[test]
    fn gradient_matches_differences() {
        for (id, z) in [
            ("logAbs", vec![c(0.3, 0.8), c(-1.0, 0.2)]),
            ("puncturedDisk", vec![c(0.2, -0.3)]),
        ] {
            let e = standard_exhaustion(id, z.len()).unwrap();
            let num = crate::forms::numeric_gradient_zbar(|w: &[C64]| e.tau(w), &z, None).unwrap();
            for (a, b) in num.iter().zip(e.grad_zbar(&z)) {
                assert!((a - b).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn flags_and_radii() {
        let b = standard_exhaustion("ballLog", 1).unwrap();
        assert!(b.has_finite_radius());
        assert_eq!(b.r_max(), 0.0);
        let l = standard_exhaustion("logAbs", 1).unwrap();
        assert!(!l.has_finite_radius());
        assert!((l.radius_at(2f64.ln()) - 2.0).abs() < 1e-15);
        let p = standard_exhaustion("puncturedDisk", 1).unwrap();
        assert!((p.radius_at(1.0) - (-1f64).exp()).abs() < 1e-15);
        assert!(standard_exhaustion("puncturedDisk", 2).is_err());
        assert!(matches!(standard_exhaustion("sigma", 1), Err(Error::UnknownId { .. })));
    }

    #[test]
    fn disk_maps_need_a_bounded_exhaustion() {
        let disk = crate::maps::catalog("diskCover", &Default::default()).unwrap();
        assert!(standard_exhaustion("logAbs", 1).unwrap().check_map(&disk).is_err());
        assert!(standard_exhaustion("ballLog", 1).unwrap().check_map(&disk).is_ok());
    }
}

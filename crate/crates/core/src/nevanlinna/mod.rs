//! Characteristic functions, mass ratios, growth conditions and value
//! distribution quantities of a map `φ: X → ℙᵐ`.
//!
//! All radii are in the `u = τ` scale. For the logarithmic exhaustions this is
//! `u = log σ` with `σ` the Euclidean radius.

mod characteristic;
mod conditions;
mod counting;
mod fit;
mod growth;
mod potential;

pub(crate) use characteristic::wedge_density;
pub use characteristic::{
    characteristic, d_mass_ratio, d_mass_ratio_direct, ddc_mass_ratio, CharacteristicSeries, RatioValue,
};
pub use conditions::{
    check_condition, AlphaKind, ConditionId, ConditionParams, ConditionReport, FitSummary, SeriesBundle, MIN_RADII,
};
pub(crate) use counting::probe_not_contained;
pub use counting::{
    count_preimages, counting_from_preimages, counting_function, fmt_residual, proximity, CountMode, CountingCurve,
    DefectReport, PreimageCount,
};
pub use growth::{growth_classify, GrowthMode, GrowthReport};
pub use potential::{
    defect_suite, proximity_potential, DefectSuite, DiscreteMeasure, DivisorKernel, HyperplaneKernel, PotentialValue,
    SupEstimate, TailReport, TAIL_LEVELS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::ExhaustionSpec;

/// Version tag of the CSV and JSON output schemas.
pub const SCHEMA_VERSION: &str = "nevlab-nevanlinna/1";

/// Which averaging the characteristic is paired with: `d`-case weights
/// `u_r = (1 − τ/r)⁺`, `dd^c`-case weights `(r − τ)⁺`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    #[serde(rename = "d")]
    D,
    #[serde(rename = "ddc")]
    Ddc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Spacing {
    /// Equally spaced in `u`.
    LinearTau,
    /// Equally spaced in `σ = e^u`.
    LinearSigma,
}

/// Strictly increasing radii in the `u` scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Schedule {
    radii: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Schedule {
    type Error = Error;
    fn try_from(radii: Vec<f64>) -> Result<Self> {
        Schedule::new(radii)
    }
}

impl From<Schedule> for Vec<f64> {
    fn from(s: Schedule) -> Self {
        s.radii
    }
}

impl Schedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidParam("empty schedule".into()));
        }
        if radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParam("schedule radii must be finite".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParam("schedule must be strictly increasing".into()));
        }
        Ok(Self { radii })
    }

    pub fn with_spacing(lo: f64, hi: f64, count: usize, spacing: Spacing) -> Result<Self> {
        if count < 2 || hi <= lo {
            return Err(Error::InvalidParam(format!(
                "schedule [{lo}, {hi}] with {count} points"
            )));
        }
        let step = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (count - 1) as f64;
        let radii = match spacing {
            Spacing::LinearTau => (0..count).map(|i| step(lo, hi, i)).collect(),
            Spacing::LinearSigma => (0..count).map(|i| step(lo.exp(), hi.exp(), i).ln()).collect(),
        };
        Self::new(radii)
    }

    pub fn linear(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::with_spacing(lo, hi, count, Spacing::LinearTau)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.radii.last().expect("nonempty schedule")
    }

    /// Requires every radius in `(r₀, R)`.
    pub fn check_within(&self, exh: &ExhaustionSpec) -> Result<()> {
        for &r in &self.radii {
            if r <= exh.r0() || r >= exh.r_max() {
                return Err(Error::RadiusOutOfRange {
                    r,
                    lo: exh.r0(),
                    hi: exh.r_max(),
                });
            }
        }
        Ok(())
    }

    /// Even-indexed and odd-indexed radii.
    pub fn split_interleaved(&self) -> (Vec<f64>, Vec<f64>) {
        let even = self.radii.iter().step_by(2).copied().collect();
        let odd = self.radii.iter().skip(1).step_by(2).copied().collect();
        (even, odd)
    }
}

pub(crate) fn index_of(radii: &[f64], r: f64) -> Result<usize> {
    radii
        .iter()
        .position(|&x| (x - r).abs() <= 1e-9 * (1.0 + r.abs()))
        .ok_or_else(|| Error::InvalidParam(format!("radius {r} is not on the schedule")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::standard_exhaustion;

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(vec![]).is_err());
        assert!(Schedule::new(vec![1.0, 1.0]).is_err());
        assert!(Schedule::new(vec![1.0, f64::NAN]).is_err());
        let s = Schedule::linear(1.0, 2.0, 5).unwrap();
        assert_eq!(s.radii(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
        let sig = Schedule::with_spacing(0.0, 2f64.ln(), 3, Spacing::LinearSigma).unwrap();
        assert!((sig.radii()[1] - 1.5f64.ln()).abs() < 1e-15);
        let (even, odd) = s.split_interleaved();
        assert_eq!(even, vec![1.0, 1.5, 2.0]);
        assert_eq!(odd, vec![1.25, 1.75]);
    }

    #[test]
    fn schedule_range() {
        let e = standard_exhaustion("logAbs", 1).unwrap();
        assert!(Schedule::linear(0.5, 3.0, 4).unwrap().check_within(&e).is_ok());
        assert!(Schedule::linear(0.0, 3.0, 4).unwrap().check_within(&e).is_err());
        let b = standard_exhaustion("ballLog", 1).unwrap();
        assert!(Schedule::linear(-3.0, -0.1, 4).unwrap().check_within(&b).is_ok());
        assert!(Schedule::linear(-3.0, 0.0, 4).unwrap().check_within(&b).is_err());
    }

    #[test]
    fn schedule_serde_roundtrip() {
        let s = Schedule::linear(1.0, 2.0, 3).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, "[1.0,1.5,2.0]");
        let back: Schedule = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<Schedule>("[2.0,1.0]").is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::conditions::MIN_RADII;
use super::fit::linear_fit;
use super::CharacteristicSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GrowthMode {
    /// Slope of `log t` against `u = log σ`: the order in `σ`.
    FiniteOrder,
    /// Slope of `log t` against `log u = log log σ`.
    LogOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub mode: GrowthMode,
    /// Fitted order `d` or log-order `p`.
    pub order: f64,
    pub intercept: f64,
    pub residual: f64,
    /// `t_k/t_{k−1}` numerically tends to infinity.
    pub ratio_unbounded: Option<bool>,
    /// Fit of `t_k/t_{k−1} ≥ c/(log σ)^β` as `(c, β)`.
    pub lower_bound_fit: Option<(f64, f64)>,
    /// The fitted `β` is below 1.
    pub lower_bound_holds: Option<bool>,
}

fn check_monotone(s: &CharacteristicSeries) -> Result<()> {
    for i in 1..s.t.len() {
        if s.t[i] < s.t[i - 1] - 2.0 * (s.t_err[i] + s.t_err[i - 1]) - 1e-12 {
            return Err(Error::NonMonotone);
        }
    }
    if s.t.iter().any(|t| *t <= 0.0) {
        return Err(Error::Degenerate(format!("t_{} vanishes on the schedule", s.j)));
    }
    Ok(())
}

/// Estimates the growth order of `t_k` from the series and, when the
/// degree-`(k−1)` series is given, tests the ratio hypotheses of the growth
/// theorems.
pub fn growth_classify(
    series: &CharacteristicSeries,
    lower: Option<&CharacteristicSeries>,
    mode: GrowthMode,
) -> Result<GrowthReport> {
    let n = series.radii.len();
    if n < MIN_RADII {
        return Err(Error::InsufficientSchedule {
            got: n,
            need: MIN_RADII,
        });
    }
    check_monotone(series)?;
    let (x, y): (Vec<f64>, Vec<f64>) = match mode {
        GrowthMode::FiniteOrder => series.radii.iter().zip(&series.t).map(|(u, t)| (*u, t.ln())).unzip(),
        GrowthMode::LogOrder => series
            .radii
            .iter()
            .zip(&series.t)
            .filter(|(u, _)| **u > 0.0)
            .map(|(u, t)| (u.ln(), t.ln()))
            .unzip(),
    };
    if x.len() < MIN_RADII {
        return Err(Error::InsufficientSchedule {
            got: x.len(),
            need: MIN_RADII,
        });
    }
    let (intercept, order, residual) =
        linear_fit(&x, &y).ok_or_else(|| Error::InvalidParam("degenerate radii for growth fit".into()))?;
    let mut report = GrowthReport {
        mode,
        order,
        intercept,
        residual,
        ratio_unbounded: None,
        lower_bound_fit: None,
        lower_bound_holds: None,
    };
    if let Some(low) = lower {
        if low.j + 1 != series.j || low.radii != series.radii {
            return Err(Error::InvalidParam(
                "lower series must have degree k − 1 on the same schedule".into(),
            ));
        }
        if low.t.iter().any(|t| *t <= 0.0) {
            return Err(Error::Degenerate(format!("t_{} vanishes on the schedule", low.j)));
        }
        let q: Vec<f64> = series.t.iter().zip(&low.t).map(|(a, b)| a / b).collect();
        let logq: Vec<f64> = q.iter().map(|v| v.ln()).collect();
        let (_, slope, _) = linear_fit(&series.radii, &logq).expect("distinct radii");
        let head = q[..n / 4].iter().copied().fold(f64::INFINITY, f64::min);
        let tail = q[n - n / 4..].iter().copied().fold(f64::INFINITY, f64::min);
        report.ratio_unbounded = Some(slope > 0.2 && tail > 2.0 * head);
        let (lx, ly): (Vec<f64>, Vec<f64>) = series
            .radii
            .iter()
            .zip(&logq)
            .filter(|(u, _)| **u > 1.0)
            .map(|(u, l)| (u.ln(), *l))
            .unzip();
        if let Some((a, b, _)) = linear_fit(&lx, &ly) {
            let beta = -b;
            report.lower_bound_fit = Some((a.exp(), beta));
            report.lower_bound_holds = Some(beta < 1.0);
        }
    }
    Ok(report)
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fit::{cumulative_trapezoid, linear_fit};
use super::CharacteristicSeries;
use crate::error::{Error, Result};

/// Characteristic series of one map, keyed by degree `j`.
pub type SeriesBundle = BTreeMap<usize, CharacteristicSeries>;

/// Minimum schedule length for any condition check.
pub const MIN_RADII: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionId {
    /// `t_{j−1}/T_j → 0`.
    #[serde(rename = "simpledMR")]
    SimpledMr,
    /// `liminf α(T_j)·T_{j−1}/T_j² = 0`.
    #[serde(rename = "alphaMR")]
    AlphaMr,
    /// `∫ dr/T_{j−1} = ∞`.
    #[serde(rename = "minimaldMR")]
    MinimaldMr,
    /// `sup_{δ,r} δ ∫ T_j^{1−δ}/T_{j−1} = ∞`.
    #[serde(rename = "MR1supdelta")]
    Mr1SupDelta,
    /// `liminf log σ · t_{j−1} t_j / T_j² = 0`.
    #[serde(rename = "logdclosed")]
    LogDClosed,
    /// `limsup (1/log T_j) ∫ t_j/t_{j−1} = ∞`.
    #[serde(rename = "MR2sup")]
    Mr2Sup,
    /// `∫ t₁ dσ = ∞` on the unit disc.
    #[serde(rename = "diskEnergy")]
    DiskEnergy,
    /// `t_{j−1}(φ_n, u)/t_j(φ_n, u − log c) → 0` along a family.
    #[serde(rename = "scaleCond")]
    ScaleCond,
}

impl ConditionId {
    pub const ALL: [ConditionId; 8] = [
        ConditionId::SimpledMr,
        ConditionId::AlphaMr,
        ConditionId::MinimaldMr,
        ConditionId::Mr1SupDelta,
        ConditionId::LogDClosed,
        ConditionId::Mr2Sup,
        ConditionId::DiskEnergy,
        ConditionId::ScaleCond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionId::SimpledMr => "simpledMR",
            ConditionId::AlphaMr => "alphaMR",
            ConditionId::MinimaldMr => "minimaldMR",
            ConditionId::Mr1SupDelta => "MR1supdelta",
            ConditionId::LogDClosed => "logdclosed",
            ConditionId::Mr2Sup => "MR2sup",
            ConditionId::DiskEnergy => "diskEnergy",
            ConditionId::ScaleCond => "scaleCond",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "condition",
                id: s.into(),
            })
    }

    /// Whether the verdict comes from a divergence extrapolation rather than
    /// a decay test on the observed curve.
    pub fn is_divergence_test(self) -> bool {
        matches!(
            self,
            ConditionId::MinimaldMr | ConditionId::Mr1SupDelta | ConditionId::Mr2Sup | ConditionId::DiskEnergy
        )
    }
}

/// Weight `α` in the alphaMR condition; both satisfy `∫ ds/α = ∞`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AlphaKind {
    #[default]
    Linear,
    SLogS,
}

impl AlphaKind {
    fn eval(self, s: f64) -> f64 {
        match self {
            AlphaKind::Linear => s,
            AlphaKind::SLogS => s * (std::f64::consts::E + s).ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ConditionParams {
    #[serde(default = "default_j")]
    pub j: usize,
    #[serde(default)]
    pub alpha: AlphaKind,
    /// Scale `c > 1` of scaleCond.
    #[serde(default = "default_scale")]
    pub scale_c: f64,
    /// Family parameters `n` for scaleCond, one per bundle.
    #[serde(default)]
    pub family: Vec<f64>,
    /// Radius at which scaleCond compares family members; defaults to the
    /// last scheduled radius.
    #[serde(default)]
    pub reference_radius: Option<f64>,
}

fn default_j() -> usize {
    1
}

fn default_scale() -> f64 {
    2.0
}

impl Default for ConditionParams {
    fn default() -> Self {
        Self {
            j: 1,
            alpha: AlphaKind::Linear,
            scale_c: 2.0,
            family: vec![],
            reference_radius: None,
        }
    }
}

/// Best declared fit of a condition curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub form: String,
    pub intercept: f64,
    pub slope: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub j: usize,
    /// Numerically consistent with the condition along the witnesses.
    pub holds: bool,
    /// Set for divergence verdicts, which rest on fitted extrapolation.
    pub extrapolated: bool,
    pub witness_radii: Vec<f64>,
    /// Abscissae of the curve: radii, or family parameters for scaleCond.
    pub curve_x: Vec<f64>,
    pub curve: Vec<f64>,
    pub fit: FitSummary,
    /// Points dropped because the degree-`j` mass was indeterminate.
    pub dropped: usize,
}

fn series(bundle: &SeriesBundle, j: usize) -> Result<&CharacteristicSeries> {
    bundle
        .get(&j)
        .ok_or_else(|| Error::InvalidParam(format!("series bundle lacks degree {j}")))
}

/// Growth variable `X → ∞` at the end of the exhaustion: `u − r₀` when
/// `R = ∞`, `1/(e^R − e^u)` otherwise.
fn growth_variable(radii: &[f64], r0: f64, r_max: f64) -> Vec<f64> {
    if r_max.is_finite() {
        radii.iter().map(|u| 1.0 / (r_max.exp() - u.exp())).collect()
    } else {
        radii.iter().map(|u| u - r0).collect()
    }
}

/// Regressors for the decay test.
fn progress_forms(radii: &[f64], r0: f64, r_max: f64) -> Vec<(String, Vec<f64>)> {
    let x = growth_variable(radii, r0, r_max);
    vec![("log X".into(), x.iter().map(|v| v.ln()).collect()), ("X".into(), x)]
}

/// Declared shapes `F ≈ a + b·g(X)` for the divergence test, with whether
/// each shape diverges as `X → ∞` (for `b > 0`).
fn growth_forms(radii: &[f64], r0: f64, r_max: f64) -> Vec<(String, bool, Vec<f64>)> {
    let x = growth_variable(radii, r0, r_max);
    let mut forms: Vec<(String, bool, Vec<f64>)> = vec![
        ("log X".into(), true, x.iter().map(|v| v.ln()).collect()),
        ("-exp(-X)".into(), false, x.iter().map(|v| -(-v).exp()).collect()),
    ];
    for p in [-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0] {
        forms.push((format!("X^{p}"), p > 0.0, x.iter().map(|v| v.powf(p)).collect()));
    }
    forms
}

fn running_extrema(x: &[f64], y: &[f64], minima: bool) -> Vec<f64> {
    let mut best = if minima { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut out = Vec::new();
    for (xi, &yi) in x.iter().zip(y) {
        if (minima && yi < best) || (!minima && yi > best) {
            best = yi;
            out.push(*xi);
        }
    }
    out
}

/// Decay test: fit `log q` against each progress form; the condition holds if
/// the best slope is below −0.2 and the tail minimum has fallen under half
/// the curve maximum.
fn tends_to_zero(x: &[f64], q: &[f64], forms: Vec<(String, Vec<f64>)>) -> (bool, FitSummary, Vec<f64>) {
    let logq: Vec<f64> = q.iter().map(|v| v.max(1e-300).ln()).collect();
    let fit = forms
        .into_iter()
        .filter_map(|(name, g)| {
            linear_fit(&g, &logq).map(|(a, b, res)| FitSummary {
                form: format!("log q = a + b*{name}"),
                intercept: a,
                slope: b,
                residual: res,
            })
        })
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .unwrap_or(FitSummary {
            form: "none".into(),
            intercept: f64::NAN,
            slope: f64::NAN,
            residual: f64::NAN,
        });
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = q.len() - q.len() / 4;
    let tail_min = q[tail.min(q.len() - 1)..].iter().copied().fold(f64::INFINITY, f64::min);
    let holds = fit.slope < -0.2 && tail_min < 0.5 * max;
    (holds, fit, running_extrema(x, q, true))
}

/// Divergence test: the best-fitting declared shape decides.
fn diverges(x: &[f64], f: &[f64], forms: Vec<(String, bool, Vec<f64>)>) -> (bool, FitSummary, Vec<f64>) {
    let mut best: Option<(bool, FitSummary)> = None;
    for (name, divergent, g) in forms {
        if let Some((a, b, res)) = linear_fit(&g, f) {
            if best.as_ref().is_none_or(|(_, s)| res < s.residual) {
                best = Some((
                    divergent,
                    FitSummary {
                        form: format!("F = a + b*{name}"),
                        intercept: a,
                        slope: b,
                        residual: res,
                    },
                ));
            }
        }
    }
    let (divergent, fit) = best.unwrap_or((
        false,
        FitSummary {
            form: "none".into(),
            intercept: f64::NAN,
            slope: f64::NAN,
            residual: f64::NAN,
        },
    ));
    let holds = divergent && fit.slope > 0.0;
    (holds, fit, running_extrema(x, f, false))
}

fn require_len(n: usize) -> Result<()> {
    if n < MIN_RADII {
        return Err(Error::InsufficientSchedule {
            got: n,
            need: MIN_RADII,
        });
    }
    Ok(())
}

/// Linear interpolation of `t` in `u`.
fn interpolate_t(s: &CharacteristicSeries, u: f64) -> Result<f64> {
    let r = &s.radii;
    if u < r[0] - 1e-12 || u > r[r.len() - 1] + 1e-12 {
        return Err(Error::RadiusOutOfRange {
            r: u,
            lo: r[0],
            hi: r[r.len() - 1],
        });
    }
    let i = r.partition_point(|&x| x < u).clamp(1, r.len().max(2) - 1);
    if r.len() == 1 {
        return Ok(s.t[0]);
    }
    let w = (u - r[i - 1]) / (r[i] - r[i - 1]);
    Ok(s.t[i - 1] * (1.0 - w) + s.t[i] * w)
}

/// Decides whether the series are numerically consistent with condition
/// `id`. `bundles` holds one map's series, or one per family member for
/// scaleCond.
pub fn check_condition(id: ConditionId, bundles: &[SeriesBundle], params: &ConditionParams) -> Result<ConditionReport> {
    let j = params.j;
    if j == 0 {
        return Err(Error::InvalidParam("conditions need j >= 1".into()));
    }
    if id == ConditionId::ScaleCond {
        return scale_condition(bundles, params);
    }
    if bundles.len() != 1 {
        return Err(Error::InvalidParam(format!(
            "{} takes one series bundle, got {}",
            id.name(),
            bundles.len()
        )));
    }
    let bundle = &bundles[0];
    let sj = series(bundle, j)?;
    let sjm1 = series(bundle, j - 1)?;
    if sj.radii != sjm1.radii {
        return Err(Error::InvalidParam("series do not share a schedule".into()));
    }
    require_len(sj.radii.len())?;
    let r0 = sj.r0;
    let r_max = if sj.exhaustion_id == "ballLog" {
        0.0
    } else {
        f64::INFINITY
    };
    if matches!(id, ConditionId::SimpledMr | ConditionId::AlphaMr) && r_max.is_finite() {
        return Err(Error::Unsupported(format!(
            "{} assumes an unbounded exhaustion",
            id.name()
        )));
    }
    if id == ConditionId::DiskEnergy && (sj.exhaustion_id != "ballLog" || sj.k != 1 || j != 1) {
        return Err(Error::Unsupported(
            "diskEnergy is defined for the unit disc with j = 1".into(),
        ));
    }

    // Points where the degree-j mass is indeterminate are dropped.
    let keep: Vec<usize> = (0..sj.radii.len())
        .filter(|&i| !sj.is_degenerate_at(i) && sj.big_t[i] > 0.0)
        .collect();
    let dropped = sj.radii.len() - keep.len();
    require_len(keep.len())?;
    let x: Vec<f64> = keep.iter().map(|&i| sj.radii[i]).collect();
    let t = |i: usize| sj.t[i];
    let big_t = |i: usize| sj.big_t[i];
    let tm1 = |i: usize| sjm1.t[i];
    let big_tm1 = |i: usize| sjm1.big_t[i];

    let (holds, fit, witness, curve) = match id {
        ConditionId::SimpledMr => {
            let q: Vec<f64> = keep.iter().map(|&i| tm1(i) / big_t(i)).collect();
            let (h, f, w) = tends_to_zero(&x, &q, progress_forms(&x, r0, r_max));
            (h, f, w, q)
        }
        ConditionId::AlphaMr => {
            let q: Vec<f64> = keep
                .iter()
                .map(|&i| params.alpha.eval(big_t(i)) * big_tm1(i) / big_t(i).powi(2))
                .collect();
            let (h, f, w) = tends_to_zero(&x, &q, progress_forms(&x, r0, r_max));
            (h, f, w, q)
        }
        ConditionId::LogDClosed => {
            let q: Vec<f64> = keep
                .iter()
                .map(|&i| {
                    let log_factor = if r_max.is_finite() { 1.0 } else { sj.radii[i] };
                    log_factor * tm1(i) * t(i) / big_t(i).powi(2)
                })
                .collect();
            let (h, f, w) = tends_to_zero(&x, &q, progress_forms(&x, r0, r_max));
            (h, f, w, q)
        }
        ConditionId::MinimaldMr => {
            let inv: Vec<f64> = keep.iter().map(|&i| 1.0 / big_tm1(i)).collect();
            let f = cumulative_trapezoid(&x, &inv);
            let (h, fit, w) = diverges(&x, &f, growth_forms(&x, r0, r_max));
            (h, fit, w, f)
        }
        ConditionId::Mr1SupDelta => {
            let mut best = vec![0.0; x.len()];
            for delta in [1.0, 0.5, 0.25, 0.1, 0.05, 0.01] {
                let g: Vec<f64> = keep.iter().map(|&i| big_t(i).powf(1.0 - delta) / big_tm1(i)).collect();
                let cum = cumulative_trapezoid(&x, &g);
                for (b, c) in best.iter_mut().zip(cum) {
                    *b = f64::max(*b, delta * c);
                }
            }
            let (h, fit, w) = diverges(&x, &best, growth_forms(&x, r0, r_max));
            (h, fit, w, best)
        }
        ConditionId::Mr2Sup => {
            let g: Vec<f64> = keep.iter().map(|&i| t(i) / tm1(i)).collect();
            let cum = cumulative_trapezoid(&x, &g);
            // Only radii with log T_j bounded away from zero are usable.
            let usable: Vec<usize> = (0..x.len()).filter(|&p| big_t(keep[p]).ln() > 0.1).collect();
            require_len(usable.len())?;
            let xu: Vec<f64> = usable.iter().map(|&p| x[p]).collect();
            let f: Vec<f64> = usable.iter().map(|&p| cum[p] / big_t(keep[p]).ln()).collect();
            let (h, fit, w) = diverges(&xu, &f, growth_forms(&xu, r0, r_max));
            let mut full = vec![f64::NAN; x.len()];
            for (&p, v) in usable.iter().zip(&f) {
                full[p] = *v;
            }
            (h, fit, w, full)
        }
        ConditionId::DiskEnergy => {
            let g: Vec<f64> = keep.iter().map(|&i| t(i) * sj.radii[i].exp()).collect();
            let f = cumulative_trapezoid(&x, &g);
            let (h, fit, w) = diverges(&x, &f, growth_forms(&x, r0, r_max));
            (h, fit, w, f)
        }
        ConditionId::ScaleCond => unreachable!("handled above"),
    };
    Ok(ConditionReport {
        id,
        j,
        holds,
        extrapolated: id.is_divergence_test(),
        witness_radii: witness,
        curve_x: x,
        curve,
        fit,
        dropped,
    })
}

fn scale_condition(bundles: &[SeriesBundle], params: &ConditionParams) -> Result<ConditionReport> {
    let j = params.j;
    if params.family.len() != bundles.len() {
        return Err(Error::InvalidParam(format!(
            "scaleCond needs one family parameter per bundle ({} vs {})",
            params.family.len(),
            bundles.len()
        )));
    }
    if params.scale_c <= 1.0 {
        return Err(Error::InvalidParam(format!(
            "scale c = {} must exceed 1",
            params.scale_c
        )));
    }
    require_len(bundles.len())?;
    let shift = params.scale_c.ln();
    let mut q = Vec::with_capacity(bundles.len());
    for b in bundles {
        let sj = series(b, j)?;
        let sjm1 = series(b, j - 1)?;
        let r = params.reference_radius.unwrap_or(*sj.radii.last().expect("nonempty"));
        let num = interpolate_t(sjm1, r)?;
        let den = interpolate_t(sj, r - shift)?;
        if den <= 0.0 {
            return Err(Error::Degenerate(format!(
                "t_{j}({}) = {den} for a family member",
                r - shift
            )));
        }
        q.push(num / den);
    }
    let x = params.family.clone();
    if x.iter().any(|&n| n <= 0.0) || x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam(
            "family parameters must be positive and increasing".into(),
        ));
    }
    let forms = vec![
        ("log n".into(), x.iter().map(|n| n.ln()).collect()),
        ("n".into(), x.clone()),
    ];
    let (holds, fit, witness) = tends_to_zero(&x, &q, forms);
    Ok(ConditionReport {
        id: ConditionId::ScaleCond,
        j,
        holds,
        extrapolated: false,
        witness_radii: witness,
        curve_x: x,
        curve: q,
        fit,
        dropped: 0,
    })
}

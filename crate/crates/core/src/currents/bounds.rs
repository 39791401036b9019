//! Fitted constant of the `dd^c`-bound
//! `|⟨dd^c S_r, ψ⟩| ≤ C·c_r·‖ψ‖_∞·J_j(r)` over a dictionary.

use serde::{Deserialize, Serialize};

use super::derivative::ddc_pairing_multi;
use crate::error::{Error, Result};
use crate::forms::TestForm;
use crate::maps::{ExhaustionSpec, MapSpec};
use crate::nevanlinna::{characteristic, Schedule, WeightKind};
use crate::quad::QuadPlan;

/// Allowed growth of the fitted constant from training to test radii.
pub const BOUND_SLACK: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdcBoundReport {
    pub map_id: String,
    pub j: usize,
    pub radii: Vec<f64>,
    pub form_ids: Vec<usize>,
    /// `c_r = T_j(r)`.
    pub mass: Vec<f64>,
    /// `J_j(r) = t_{j−1}(r)/T_j(r)`.
    pub ratio_j: Vec<f64>,
    /// `⟨dd^c S_r, ψ⟩`, indexed `[form][radius]`.
    pub pairings: Vec<Vec<f64>>,
    pub pairing_errs: Vec<Vec<f64>>,
    /// `|⟨dd^c S_r, ψ⟩| / (c_r·‖ψ‖_∞·J_j(r))`, indexed `[form][radius]`.
    pub ratios: Vec<Vec<f64>>,
    /// Largest ratio over the even-indexed (training) radii.
    pub fitted_c: f64,
    /// Largest ratio over the odd-indexed (test) radii.
    pub test_max: f64,
    pub holds: bool,
}

/// Pairs `dd^c S_{j,r}` with the first `count` dictionary forms of degree
/// `j − 1` at every scheduled radius and fits the bound constant on
/// interleaved training radii.
pub fn ddc_bound(
    map: &MapSpec,
    exh: &ExhaustionSpec,
    j: usize,
    count: usize,
    schedule: &Schedule,
    plan: &QuadPlan,
) -> Result<DdcBoundReport> {
    if j == 0 {
        return Err(Error::InvalidParam("dd^c bounds need j >= 1".into()));
    }
    if schedule.len() < 2 {
        return Err(Error::InsufficientSchedule {
            got: schedule.len(),
            need: 2,
        });
    }
    let forms = TestForm::family(map.m(), j - 1, count)?;
    let sj = characteristic(map, exh, j, schedule, WeightKind::Ddc, plan)?;
    let sjm1 = characteristic(map, exh, j - 1, schedule, WeightKind::Ddc, plan)?;
    let n = schedule.len();
    let gs: Vec<_> = forms.iter().map(|f| move |z: &[crate::C64]| f.eval(z)).collect();
    let mut pairings = vec![vec![0.0; n]; forms.len()];
    let mut pairing_errs = vec![vec![0.0; n]; forms.len()];
    let mut ratios = vec![vec![0.0; n]; forms.len()];
    let mut ratio_j = Vec::with_capacity(n);
    for (i, &r) in schedule.radii().iter().enumerate() {
        let (big_t, t_lower) = (sj.big_t[i], sjm1.t[i]);
        if !(big_t > 0.0 && t_lower > 0.0) {
            return Err(Error::Degenerate(format!(
                "T_{j}({r}) = {big_t}, t_{}({r}) = {t_lower}",
                j - 1
            )));
        }
        ratio_j.push(t_lower / big_t);
        let p = ddc_pairing_multi(map, exh, j, r, &gs, plan)?;
        for (fi, (pv, form)) in p.iter().zip(&forms).enumerate() {
            pairings[fi][i] = pv.value;
            pairing_errs[fi][i] = pv.stderr;
            ratios[fi][i] = pv.value.abs() / (big_t * form.sup_norm * ratio_j[i]);
        }
    }
    let max_over = |start: usize| {
        ratios
            .iter()
            .flat_map(|row| row.iter().skip(start).step_by(2))
            .copied()
            .fold(0.0, f64::max)
    };
    let fitted_c = max_over(0);
    let test_max = max_over(1);
    if !fitted_c.is_finite() || !test_max.is_finite() {
        return Err(Error::NonFinite("dd^c bound ratio".into()));
    }
    Ok(DdcBoundReport {
        map_id: map.id().into(),
        j,
        radii: schedule.radii().to_vec(),
        form_ids: forms.iter().map(|f| f.f.id).collect(),
        mass: sj.big_t.clone(),
        ratio_j,
        pairings,
        pairing_errs,
        ratios,
        fitted_c,
        test_max,
        holds: test_max <= BOUND_SLACK * fitted_c,
    })
}

//! Declarative experiment scenarios.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "exp-growth"
//! seed = 7
//! exhaustion = "logAbs"          # logAbs | ballLog | puncturedDisk
//! degrees = [1]
//! weight = "ddc"                 # d | ddc
//! analyses = ["characteristics", "massRatios", "conditions"]
//! conditions = ["simpledMR", "MR2sup"]
//!
//! [map]                          # or [family] with id and n = [...]
//! id = "exp"
//!
//! [schedule]
//! min = 1.0
//! max = 6.0
//! count = 11
//! spacing = "linearTau"          # linearTau | linearSigma
//!
//! [quad]
//! strategy = "radialGrid"        # radialGrid | monteCarlo
//! budget = 200000
//! shells = 16
//!
//! [divisors]                     # finite values w, hyperplane normals,
//! values = [[0.5, 0.0]]          # sampled targets, and/or infinity
//! sample = 10
//! infinity = true
//!
//! [options]                      # per-analysis knobs, all optional
//! brody_c = 2.0
//! ```
//!
//! All randomness flows from the root `seed`: analysis `a` at index `i` uses
//! [`derive_seed`]`(seed, a, i)`, and quadrature blocks split that seed again
//! per shell and block.

mod run;

pub use run::{run, run_with_threads, RunError, RunSummary, OUTPUT_SCHEMA};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::maps::{catalog, standard_exhaustion, DivisorSpec, ExhaustionSpec, MapParams, MapSpec};
use crate::nevanlinna::{
    AlphaKind, ConditionId, CountMode, DiscreteMeasure, GrowthMode, Schedule, Spacing, WeightKind, MIN_RADII,
};
use crate::quad::{QuadPlan, Strategy};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Analysis {
    Characteristics,
    MassRatios,
    Conditions,
    Currents,
    DdcBounds,
    Defects,
    Fmt,
    Brody,
    Growth,
    DensityPoints,
    Intersection,
}

impl Analysis {
    pub const ALL: [Analysis; 11] = [
        Analysis::Characteristics,
        Analysis::MassRatios,
        Analysis::Conditions,
        Analysis::Currents,
        Analysis::DdcBounds,
        Analysis::Defects,
        Analysis::Fmt,
        Analysis::Brody,
        Analysis::Growth,
        Analysis::DensityPoints,
        Analysis::Intersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Characteristics => "characteristics",
            Analysis::MassRatios => "massRatios",
            Analysis::Conditions => "conditions",
            Analysis::Currents => "currents",
            Analysis::DdcBounds => "ddcBounds",
            Analysis::Defects => "defects",
            Analysis::Fmt => "fmt",
            Analysis::Brody => "brody",
            Analysis::Growth => "growth",
            Analysis::DensityPoints => "densityPoints",
            Analysis::Intersection => "intersection",
        }
    }

    fn needs_divisors(self) -> bool {
        matches!(self, Analysis::Defects | Analysis::Fmt | Analysis::Intersection)
    }
}

/// A catalog id with its parameters inline, e.g. `id = "power"`, `d = 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub id: String,
    #[serde(default)]
    pub d: Option<i64>,
    #[serde(default)]
    pub n: Option<f64>,
    #[serde(default)]
    pub coeffs: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub value: Option<f64>,
}

impl MapConfig {
    pub fn params(&self) -> MapParams {
        MapParams {
            d: self.d,
            n: self.n,
            coeffs: self.coeffs.clone(),
            value: self.value,
        }
    }
}

/// One catalog map per scale parameter `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub id: String,
    pub n: Vec<f64>,
}

fn default_spacing() -> Spacing {
    Spacing::LinearTau
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub strategy: Strategy,
    pub budget: usize,
    #[serde(default)]
    pub shells: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorConfig {
    /// Finite target values `w` as `[re, im]`, for maps into `ℙ¹`.
    #[serde(default)]
    pub values: Vec<[f64; 2]>,
    /// Hyperplane normals, each a list of `[re, im]` coordinates.
    #[serde(default)]
    pub hyperplanes: Vec<Vec<[f64; 2]>>,
    /// Number of Fubini–Study uniform targets to add.
    #[serde(default)]
    pub sample: usize,
    /// Include the hyperplane at infinity `Z₀ = 0`.
    #[serde(default)]
    pub infinity: bool,
}

fn default_brody_c() -> f64 {
    2.0
}

fn default_density_point() -> [f64; 2] {
    [0.3, 0.2]
}

fn default_density_radius() -> f64 {
    0.3
}

fn default_dictionary_size() -> usize {
    12
}

fn default_current_budget() -> usize {
    20_000
}

fn default_growth_mode() -> GrowthMode {
    GrowthMode::FiniteOrder
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default = "default_brody_c")]
    pub brody_c: f64,
    #[serde(default)]
    pub alpha: AlphaKind,
    #[serde(default = "default_growth_mode")]
    pub growth_mode: GrowthMode,
    /// Center of the density-point ball, as a finite value `[re, im]`.
    #[serde(default = "default_density_point")]
    pub density_point: [f64; 2],
    #[serde(default = "default_density_radius")]
    pub density_radius: f64,
    #[serde(default = "default_dictionary_size")]
    pub dictionary_size: usize,
    /// Quadrature budget for the stored currents, which keep every sample.
    #[serde(default = "default_current_budget")]
    pub current_budget: usize,
    #[serde(default)]
    pub count_mode: Option<CountMode>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            brody_c: default_brody_c(),
            alpha: AlphaKind::default(),
            growth_mode: default_growth_mode(),
            density_point: default_density_point(),
            density_radius: default_density_radius(),
            dictionary_size: default_dictionary_size(),
            current_budget: default_current_budget(),
            count_mode: None,
        }
    }
}

fn default_weight() -> WeightKind {
    WeightKind::Ddc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI may override it.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub exhaustion: String,
    pub degrees: Vec<usize>,
    #[serde(default = "default_weight")]
    pub weight: WeightKind,
    pub analyses: Vec<Analysis>,
    #[serde(default)]
    pub conditions: Vec<ConditionId>,
    #[serde(default)]
    pub map: Option<MapConfig>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    pub schedule: ScheduleConfig,
    pub quad: QuadConfig,
    #[serde(default)]
    pub divisors: Option<DivisorConfig>,
    #[serde(default)]
    pub options: AnalysisOptions,
}

/// A validation finding naming the offending field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of item `index` of analysis `label`: FNV-1a of the label mixed into
/// the root seed, then the index, each through splitmix64.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let fnv = label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    splitmix(splitmix(root ^ fnv) ^ index)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| crate::Error::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn has(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    pub fn build_map(&self) -> Option<Result<MapSpec>> {
        self.map.as_ref().map(|m| catalog(&m.id, &m.params()))
    }

    pub fn build_family(&self) -> Option<Result<Vec<MapSpec>>> {
        self.family.as_ref().map(|f| {
            f.n.iter()
                .map(|&n| {
                    catalog(
                        &f.id,
                        &MapParams {
                            n: Some(n),
                            ..Default::default()
                        },
                    )
                })
                .collect()
        })
    }

    /// Source dimension `k` and target dimension `m` of the map or family.
    fn dims(&self) -> Option<(usize, usize)> {
        if let Some(Ok(m)) = self.build_map() {
            return Some((m.k(), m.m()));
        }
        match self.build_family() {
            Some(Ok(f)) if !f.is_empty() => Some((f[0].k(), f[0].m())),
            _ => None,
        }
    }

    pub fn build_exhaustion(&self) -> Result<ExhaustionSpec> {
        standard_exhaustion(&self.exhaustion, self.dims().map(|d| d.0).unwrap_or(1))
    }

    pub fn build_schedule(&self) -> Result<Schedule> {
        let s = &self.schedule;
        Schedule::with_spacing(s.min, s.max, s.count, s.spacing)
    }

    /// Quadrature plan for item `index` of analysis `label`.
    pub fn plan(&self, label: &str, index: u64) -> QuadPlan {
        QuadPlan {
            strategy: self.quad.strategy,
            budget: self.quad.budget,
            seed: derive_seed(self.seed, label, index),
            shells: self.quad.shells.unwrap_or(match self.quad.strategy {
                Strategy::RadialGrid => 16,
                Strategy::MonteCarlo => 8,
            }),
        }
    }

    /// Target divisors in configuration order: values, hyperplanes, samples,
    /// infinity.
    pub fn build_divisors(&self, m: usize) -> Result<Vec<DivisorSpec>> {
        let Some(d) = &self.divisors else {
            return Ok(vec![]);
        };
        let mut out: Vec<DivisorSpec> = d
            .values
            .iter()
            .map(|&[re, im]| DivisorSpec::value(C64::new(re, im)))
            .collect();
        for h in &d.hyperplanes {
            out.push(DivisorSpec::hyperplane(
                h.iter().map(|&[re, im]| C64::new(re, im)).collect(),
            )?);
        }
        if d.sample > 0 {
            let seed = derive_seed(self.seed, "divisors", 0);
            if m == 1 {
                out.extend(
                    DiscreteMeasure::uniform_values(d.sample, seed)?
                        .atoms()
                        .iter()
                        .map(|(a, _)| a.clone()),
                );
            } else {
                out.extend(DivisorSpec::sample_hyperplanes(m, d.sample, seed));
            }
        }
        if d.infinity {
            out.push(DivisorSpec::infinity(m));
        }
        Ok(out)
    }
}

/// Checks a configuration without running any quadrature.
pub fn validate(config: &ScenarioConfig) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut push = |field: &str, message: String| {
        diags.push(Diagnostic {
            field: field.into(),
            message,
        })
    };
    if config.name.trim().is_empty() {
        push("name", "must not be empty".into());
    }
    match (&config.map, &config.family) {
        (None, None) => push("map", "either [map] or [family] is required".into()),
        _ => {
            if let Some(Err(e)) = config.build_map() {
                push("map", e.to_string());
            }
            match config.build_family() {
                Some(Err(e)) => push("family", e.to_string()),
                Some(Ok(f)) if f.is_empty() => push("family.n", "must list at least one parameter".into()),
                _ => {}
            }
        }
    }
    let only_family = config.map.is_none();
    if only_family {
        let scale_only = config.conditions.iter().all(|&c| c == ConditionId::ScaleCond);
        for a in &config.analyses {
            if !matches!(a, Analysis::Brody) && !(matches!(a, Analysis::Conditions) && scale_only) {
                push("map", format!("analysis `{}` needs a single [map]", a.name()));
            }
        }
    }
    let exh = config.build_exhaustion();
    if let Err(e) = &exh {
        push("exhaustion", e.to_string());
    }
    let dims = config.dims();
    if config.degrees.is_empty() {
        push("degrees", "must list at least one degree".into());
    }
    if let Some((k, _)) = dims {
        for &j in &config.degrees {
            if j > k {
                push("degrees", format!("degree j = {j} exceeds k = {k}"));
            }
        }
    }
    let schedule = config.build_schedule();
    match (&schedule, &exh) {
        (Err(e), _) => push("schedule", e.to_string()),
        (Ok(s), Ok(exh)) => {
            if s.radii()[0] <= exh.r0() {
                push(
                    "schedule.min",
                    format!("{} must exceed r0 = {}", s.radii()[0], exh.r0()),
                );
            }
            if s.last() >= exh.r_max() {
                push(
                    "schedule.max",
                    format!("{} must be below R = {}", s.last(), exh.r_max()),
                );
            }
            if config.has(Analysis::Brody) {
                let k = dims.map(|d| d.0).unwrap_or(1) as f64;
                let limit = exh.r_max() - k * config.options.brody_c.max(1.0).ln();
                if s.last() > limit {
                    push("schedule.max", format!("brody needs radii up to R - k log c = {limit}"));
                }
            }
            if let (Some(Ok(m)), Ok(exh)) = (config.build_map(), config.build_exhaustion()) {
                if let Err(e) = exh.check_map(&m) {
                    push("map", e.to_string());
                }
            }
            if config.has(Analysis::DdcBounds) && s.radii()[0] <= exh.r0() + 0.2 {
                push(
                    "schedule.min",
                    format!("ddcBounds needs radii above r0 + 0.2 = {}", exh.r0() + 0.2),
                );
            }
            if config.weight == WeightKind::D && exh.r0() < 0.0 {
                push(
                    "weight",
                    format!("d-case weights need r0 >= 0, {} has r0 = {}", exh.id(), exh.r0()),
                );
            }
        }
        _ => {}
    }
    if config.quad.budget < 1000 {
        push("quad.budget", format!("{} < 1000", config.quad.budget));
    }
    if config.quad.shells.is_some_and(|s| s < 4) {
        push("quad.shells", "must be at least 4".into());
    }
    if config.analyses.is_empty() {
        push("analyses", "must list at least one analysis".into());
    }
    let has_divisors = config
        .divisors
        .as_ref()
        .is_some_and(|d| !d.values.is_empty() || !d.hyperplanes.is_empty() || d.sample > 0 || d.infinity);
    for &a in &config.analyses {
        if a.needs_divisors() && !has_divisors {
            push("divisors", format!("analysis `{}` needs target divisors", a.name()));
        }
    }
    if let (Some(d), Some((_, m))) = (&config.divisors, dims) {
        if !d.values.is_empty() && m != 1 {
            push(
                "divisors.values",
                format!("finite values need maps into P^1, target is P^{m}"),
            );
        }
        if let Some(h) = d.hyperplanes.iter().find(|h| h.len() != m + 1) {
            push(
                "divisors.hyperplanes",
                format!("normal with {} coordinates, expected {}", h.len(), m + 1),
            );
        }
    }
    if config.has(Analysis::Conditions) {
        if config.conditions.is_empty() {
            push("conditions", "analysis `conditions` needs condition ids".into());
        }
        if config.conditions.contains(&ConditionId::ScaleCond) && config.family.is_none() {
            push("family", "scaleCond needs a [family]".into());
        }
    }
    if (config.has(Analysis::Conditions) || config.has(Analysis::Growth)) && config.schedule.count < MIN_RADII {
        push(
            "schedule.count",
            format!("conditions and growth need at least {MIN_RADII} radii"),
        );
    }
    if config.has(Analysis::Brody) {
        match &config.family {
            None => push("family", "analysis `brody` needs a [family]".into()),
            Some(f) if f.n.len() < 3 => push("family.n", "brody needs at least 3 maps".into()),
            _ => {}
        }
        if config.schedule.count < 5 {
            push("schedule.count", "brody needs at least 5 radii".into());
        }
        if !(config.options.brody_c > 1.0) {
            push("options.brody_c", "must exceed 1".into());
        }
    }
    if config.has(Analysis::DdcBounds) && !config.degrees.iter().any(|&j| j >= 1) {
        push("degrees", "ddcBounds needs a degree j >= 1".into());
    }
    if config.has(Analysis::DensityPoints) && !(config.options.density_radius > 0.0) {
        push("options.density_radius", "must be positive".into());
    }
    if config.options.dictionary_size == 0 {
        push("options.dictionary_size", "must be positive".into());
    }
    if config.options.current_budget < 1000 {
        push("options.current_budget", "must be at least 1000".into());
    }
    diags
}

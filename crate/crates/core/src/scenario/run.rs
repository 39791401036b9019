//! Executes a validated scenario and writes its artifacts.
//!
//! Layout of the output directory:
//!
//! - `characteristics.csv`: `r`, then `t{j}, t{j}_err, T{j}, T{j}_err` per degree.
//! - `ratios.csv`: `r`, then `I{j}, I{j}_err, J{j}, J{j}_err` per degree `j ≥ 1`.
//! - `conditions.json`: condition reports keyed by degree and id; a failed
//!   check is recorded as `{"error": ...}`.
//! - `defects.csv`: `r, T1`, then `N{a}, m{a}, delta{a}, residual{a}` per divisor.
//! - `currents/j{j}_r{i}.txt`: stored currents.
//! - `report.json`: verdicts and fitted constants of every analysis.
//! - `plotdata/*.csv`: two-column `x,y` series.
//! - `MANIFEST`: status and the list of written files.
//!
//! Every CSV has a header row and one row per scheduled radius. A non-finite
//! number in any artifact aborts the run as a numerical failure; files already
//! written are kept and the manifest is marked incomplete.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{Debug, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::{validate, Analysis, Diagnostic, ScenarioConfig};
use crate::currents::{
    brody_detector, build_current, cluster_analysis, ddc_bound, density_point_ratio, intersection_positivity,
};
use crate::error::Error;
use crate::forms::{ChartPoint, DICTIONARY_VERSION};
use crate::maps::{DivisorSpec, ExhaustionSpec, MapSpec};
use crate::nevanlinna::{
    characteristic, check_condition, d_mass_ratio, ddc_mass_ratio, defect_suite, fmt_residual, growth_classify,
    CharacteristicSeries, ConditionId, ConditionParams, CountMode, DefectReport, DiscreteMeasure, Schedule,
    SeriesBundle, WeightKind,
};
use crate::C64;

/// Version tag of the scenario output layout.
pub const OUTPUT_SCHEMA: &str = "nevlab-scenario/1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n{}", fmt_diagnostics(.0))]
    Validation(Vec<Diagnostic>),
    #[error("numerical failure in {analysis}: {message}")]
    Numerical { analysis: String, message: String },
    #[error("io: {0}")]
    Io(String),
}

fn fmt_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

impl RunError {
    /// Process exit status: 1 for validation, 2 for numerical and io failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 1,
            RunError::Numerical { .. } | RunError::Io(_) => 2,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// Written files relative to `out_dir`, sorted.
    pub files: Vec<String>,
}

/// Runs with the global thread pool.
pub fn run(config: &ScenarioConfig, out_dir: &Path) -> Result<RunSummary, RunError> {
    run_with_threads(config, out_dir, None)
}

/// Runs on a dedicated pool of `threads` workers. Emitted numbers do not
/// depend on the thread count.
pub fn run_with_threads(
    config: &ScenarioConfig,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<RunSummary, RunError> {
    let diags = validate(config);
    if !diags.is_empty() {
        return Err(RunError::Validation(diags));
    }
    let mut out = Output::open(out_dir)?;
    let result = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| RunError::Io(e.to_string()))?;
            pool.install(|| Runner::new(config, &mut out).and_then(|mut r| r.execute()))
        }
        None => Runner::new(config, &mut out).and_then(|mut r| r.execute()),
    };
    out.finish(config, result.as_ref().err())?;
    result.map(|_| RunSummary {
        out_dir: out_dir.to_path_buf(),
        files: out.files.iter().cloned().collect(),
    })
}

/// Whether a `Debug` rendering contains a NaN or infinite float.
fn has_non_finite(debug: &str) -> bool {
    debug
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '.' || c == '_'))
        .any(|tok| tok == "NaN" || tok == "inf")
}

fn numerical(analysis: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Numerical {
        analysis: analysis.into(),
        message: e.to_string(),
    }
}

fn lib_err(analysis: &str) -> impl Fn(Error) -> RunError + '_ {
    move |e| match e {
        Error::Io(s) => RunError::Io(s),
        e => numerical(analysis, e),
    }
}

struct Output {
    dir: PathBuf,
    files: BTreeSet<String>,
}

impl Output {
    /// Creates the directory and removes the files of a previous run listed in
    /// its manifest.
    fn open(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir)?;
        if let Ok(old) = std::fs::read_to_string(dir.join("MANIFEST")) {
            for line in old.lines().skip_while(|l| *l != "files:").skip(1) {
                let p = dir.join(line.trim());
                if p.starts_with(dir) && p.is_file() {
                    std::fs::remove_file(p)?;
                }
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeSet::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, content)?;
        self.files.insert(name.to_string());
        if name.ends_with(".csv") && has_non_finite(content) {
            return Err(numerical(name, "non-finite value in output"));
        }
        Ok(())
    }

    fn finish(&mut self, config: &ScenarioConfig, err: Option<&RunError>) -> Result<(), RunError> {
        let mut m = format!("schema {OUTPUT_SCHEMA}\nscenario {}\n", config.name);
        match err {
            None => m.push_str("status complete\n"),
            Some(e) => {
                m.push_str("status incomplete\n");
                let _ = writeln!(m, "failure {}", e.to_string().replace('\n', " "));
            }
        }
        m.push_str("files:\n");
        for f in &self.files {
            let _ = writeln!(m, "{f}");
        }
        std::fs::write(self.dir.join("MANIFEST"), m)?;
        Ok(())
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

/// CSV with an `r` column followed by named columns.
fn table(radii: &[f64], columns: &[(String, Vec<f64>)]) -> String {
    let mut s = String::from("r");
    for (name, _) in columns {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for (i, r) in radii.iter().enumerate() {
        s.push_str(&fmt_f(*r));
        for (_, col) in columns {
            s.push(',');
            s.push_str(&fmt_f(col[i]));
        }
        s.push('\n');
    }
    s
}

fn xy(x: &[f64], y: &[f64]) -> String {
    let mut s = String::from("x,y\n");
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(s, "{},{}", fmt_f(*a), fmt_f(*b));
    }
    s
}

fn to_value<T: Serialize + Debug>(analysis: &str, v: &T) -> Result<Value, RunError> {
    if has_non_finite(&format!("{v:?}")) {
        return Err(numerical(analysis, "non-finite value in report"));
    }
    serde_json::to_value(v).map_err(|e| numerical(analysis, e))
}

fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

struct Runner<'a> {
    config: &'a ScenarioConfig,
    out: &'a mut Output,
    exh: ExhaustionSpec,
    schedule: Schedule,
    map: Option<MapSpec>,
    series: BTreeMap<(usize, bool), CharacteristicSeries>,
    defects: Option<Vec<DefectReport>>,
    report: BTreeMap<String, Value>,
}

impl<'a> Runner<'a> {
    fn new(config: &'a ScenarioConfig, out: &'a mut Output) -> Result<Self, RunError> {
        let setup = lib_err("setup");
        Ok(Self {
            exh: config.build_exhaustion().map_err(&setup)?,
            schedule: config.build_schedule().map_err(&setup)?,
            map: config.build_map().transpose().map_err(&setup)?,
            config,
            out,
            series: BTreeMap::new(),
            defects: None,
            report: BTreeMap::new(),
        })
    }

    fn map(&self) -> &MapSpec {
        self.map.as_ref().expect("validated: analysis has a map")
    }

    /// Characteristic series of degree `j`, with the configured weight or
    /// forced to `dd^c`-weights.
    fn series(&mut self, j: usize, force_ddc: bool) -> Result<&CharacteristicSeries, RunError> {
        let weight = if force_ddc { WeightKind::Ddc } else { self.config.weight };
        let key = (j, weight == WeightKind::Ddc);
        if !self.series.contains_key(&key) {
            let plan = self.config.plan("characteristics", j as u64);
            let s = characteristic(self.map(), &self.exh, j, &self.schedule, weight, &plan)
                .map_err(lib_err("characteristics"))?;
            self.series.insert(key, s);
        }
        Ok(&self.series[&key])
    }

    fn execute(&mut self) -> Result<(), RunError> {
        let result = self.execute_analyses();
        let report = json!({
            "schema": OUTPUT_SCHEMA,
            "scenario": self.config.name,
            "seed": self.config.seed,
            "dictionary": DICTIONARY_VERSION,
            "exhaustion": self.exh.id(),
            "map": self.map.as_ref().map(|m| m.id().to_string()),
            "radii": self.schedule.radii(),
            "status": if result.is_ok() { "complete" } else { "incomplete" },
            "analyses": &self.report,
        });
        let text = serde_json::to_string_pretty(&report).map_err(|e| numerical("report", e))? + "\n";
        self.out.write("report.json", &text)?;
        result
    }

    fn execute_analyses(&mut self) -> Result<(), RunError> {
        for a in Analysis::ALL {
            if !self.config.has(a) {
                continue;
            }
            let value = match a {
                Analysis::Characteristics => self.characteristics()?,
                Analysis::MassRatios => self.mass_ratios()?,
                Analysis::Conditions => self.conditions()?,
                Analysis::Currents => self.currents()?,
                Analysis::DdcBounds => self.ddc_bounds()?,
                Analysis::Defects => self.defect_analysis()?,
                Analysis::Fmt => self.fmt()?,
                Analysis::Brody => self.brody()?,
                Analysis::Growth => self.growth()?,
                Analysis::DensityPoints => self.density_points()?,
                Analysis::Intersection => self.intersection()?,
            };
            self.report.insert(a.name().to_string(), value);
        }
        Ok(())
    }

    fn characteristics(&mut self) -> Result<Value, RunError> {
        let mut cols = Vec::new();
        let mut summary = BTreeMap::new();
        for &j in &self.config.degrees.clone() {
            let s = self.series(j, false)?.clone();
            self.out.write(&format!("plotdata/t{j}.csv"), &xy(&s.radii, &s.t))?;
            self.out.write(&format!("plotdata/T{j}.csv"), &xy(&s.radii, &s.big_t))?;
            summary.insert(
                format!("j{j}"),
                json!({
                    "t_last": s.t.last(),
                    "T_last": s.big_t.last(),
                    "T_err_last": s.big_t_err.last(),
                    "samples_used": s.samples_used,
                }),
            );
            cols.push((format!("t{j}"), s.t));
            cols.push((format!("t{j}_err"), s.t_err));
            cols.push((format!("T{j}"), s.big_t));
            cols.push((format!("T{j}_err"), s.big_t_err));
        }
        self.out
            .write("characteristics.csv", &table(self.schedule.radii(), &cols))?;
        to_value("characteristics", &summary)
    }

    fn mass_ratios(&mut self) -> Result<Value, RunError> {
        let mut cols = Vec::new();
        let mut summary = BTreeMap::new();
        let radii = self.schedule.radii().to_vec();
        for &j in self.config.degrees.clone().iter().filter(|&&j| j >= 1) {
            let sj = self.series(j, false)?.clone();
            let sjm1 = self.series(j - 1, false)?.clone();
            let err = lib_err("massRatios");
            let (mut i_v, mut i_e, mut j_v, mut j_e) = (vec![], vec![], vec![], vec![]);
            let mut indeterminate = 0;
            for &r in &radii {
                let d = d_mass_ratio(&sj, &sjm1, r).map_err(&err)?;
                let c = ddc_mass_ratio(&sj, &sjm1, r).map_err(&err)?;
                indeterminate += usize::from(d.indeterminate);
                i_v.push(d.value);
                i_e.push(d.stderr);
                j_v.push(c.value);
                j_e.push(c.stderr);
            }
            self.out.write(&format!("plotdata/I{j}.csv"), &xy(&radii, &i_v))?;
            self.out.write(&format!("plotdata/J{j}.csv"), &xy(&radii, &j_v))?;
            summary.insert(
                format!("j{j}"),
                json!({
                    "I_last": i_v.last(),
                    "J_last": j_v.last(),
                    "I_decreasing": decreasing(&i_v),
                    "J_decreasing": decreasing(&j_v),
                    "indeterminate": indeterminate,
                }),
            );
            cols.push((format!("I{j}"), i_v));
            cols.push((format!("I{j}_err"), i_e));
            cols.push((format!("J{j}"), j_v));
            cols.push((format!("J{j}_err"), j_e));
        }
        self.out.write("ratios.csv", &table(&radii, &cols))?;
        to_value("massRatios", &summary)
    }

    /// Series bundles of every family member for the scale condition.
    fn family_bundles(&self, j: usize) -> Result<Vec<SeriesBundle>, RunError> {
        let err = lib_err("conditions");
        let family = self.config.build_family().expect("validated: family").map_err(&err)?;
        family
            .iter()
            .enumerate()
            .map(|(n, map)| {
                let mut b = SeriesBundle::new();
                for d in [j - 1, j] {
                    let plan = self.config.plan("family", (n * 64 + d) as u64);
                    let s =
                        characteristic(map, &self.exh, d, &self.schedule, self.config.weight, &plan).map_err(&err)?;
                    b.insert(d, s);
                }
                Ok(b)
            })
            .collect()
    }

    fn conditions(&mut self) -> Result<Value, RunError> {
        let mut doc = BTreeMap::new();
        for &j in self.config.degrees.clone().iter().filter(|&&j| j >= 1) {
            let mut per_id = BTreeMap::new();
            for &id in &self.config.conditions {
                let params = ConditionParams {
                    j,
                    alpha: self.config.options.alpha,
                    scale_c: self.config.options.brody_c,
                    family: self.config.family.as_ref().map(|f| f.n.clone()).unwrap_or_default(),
                    reference_radius: None,
                };
                let bundles = if id == ConditionId::ScaleCond {
                    self.family_bundles(j)?
                } else {
                    let mut b = SeriesBundle::new();
                    b.insert(j, self.series(j, false)?.clone());
                    b.insert(j - 1, self.series(j - 1, false)?.clone());
                    vec![b]
                };
                let value = match check_condition(id, &bundles, &params) {
                    Ok(rep) => to_value("conditions", &rep)?,
                    Err(e) => json!({ "error": e.to_string() }),
                };
                per_id.insert(id.name().to_string(), value);
            }
            doc.insert(format!("j{j}"), per_id);
        }
        let text = serde_json::to_string_pretty(&doc).map_err(|e| numerical("conditions", e))? + "\n";
        self.out.write("conditions.json", &text)?;
        let verdicts: BTreeMap<String, BTreeMap<String, Value>> = doc
            .iter()
            .map(|(j, ids)| {
                let v = ids
                    .iter()
                    .map(|(id, rep)| (id.clone(), rep.get("holds").cloned().unwrap_or(Value::Null)))
                    .collect();
                (j.clone(), v)
            })
            .collect();
        to_value("conditions", &verdicts)
    }

    fn currents(&mut self) -> Result<Value, RunError> {
        let err = lib_err("currents");
        let mut summary = BTreeMap::new();
        for &j in &self.config.degrees.clone() {
            let mut currents = Vec::with_capacity(self.schedule.len());
            for (i, &r) in self.schedule.radii().iter().enumerate() {
                let mut plan = self.config.plan("currents", (j * 4096 + i) as u64);
                plan.budget = self.config.options.current_budget;
                let c = build_current(self.map(), &self.exh, j, r, self.config.weight, &plan).map_err(&err)?;
                self.out.write(&format!("currents/j{j}_r{i}.txt"), &c.to_text())?;
                if has_non_finite(&format!("{:?}", c.header)) {
                    return Err(numerical("currents", "non-finite current header"));
                }
                currents.push(c);
            }
            let masses: Vec<f64> = currents.iter().map(|c| c.mass()).collect();
            let mut entry = json!({ "mass": masses });
            if currents.len() >= 3 && j >= 1 {
                let rep = cluster_analysis(&currents).map_err(&err)?;
                if let Some(d) = &rep.fs_distances {
                    self.out
                        .write(&format!("plotdata/fs_distance_j{j}.csv"), &xy(&rep.radii, d))?;
                }
                entry["cluster"] = json!({
                    "successive": rep.successive,
                    "converging": rep.converging,
                    "fs_distances": rep.fs_distances,
                    "fs_decreasing": rep.fs_decreasing,
                });
            }
            summary.insert(format!("j{j}"), entry);
        }
        to_value("currents", &summary)
    }

    fn ddc_bounds(&mut self) -> Result<Value, RunError> {
        let mut summary = BTreeMap::new();
        for &j in self.config.degrees.clone().iter().filter(|&&j| j >= 1) {
            let plan = self.config.plan("ddcBounds", j as u64);
            let rep = ddc_bound(
                self.map(),
                &self.exh,
                j,
                self.config.options.dictionary_size,
                &self.schedule,
                &plan,
            )
            .map_err(lib_err("ddcBounds"))?;
            let worst: Vec<f64> = (0..rep.radii.len())
                .map(|i| rep.ratios.iter().map(|row| row[i]).fold(0.0, f64::max))
                .collect();
            self.out
                .write(&format!("plotdata/ddc_bound_j{j}.csv"), &xy(&rep.radii, &worst))?;
            summary.insert(format!("j{j}"), to_value("ddcBounds", &rep)?);
        }
        to_value("ddcBounds", &summary)
    }

    fn divisors(&self) -> Result<Vec<DivisorSpec>, RunError> {
        self.config.build_divisors(self.map().m()).map_err(lib_err("divisors"))
    }

    /// Per-divisor defect reports, computed once for defects and fmt.
    fn defect_reports(&mut self) -> Result<Vec<DefectReport>, RunError> {
        if let Some(d) = &self.defects {
            return Ok(d.clone());
        }
        let t1 = self.series(1, true)?.clone();
        let mode = self
            .config
            .options
            .count_mode
            .unwrap_or(CountMode::default_for(self.exh.k()));
        let reports = self
            .divisors()?
            .iter()
            .enumerate()
            .map(|(a, d)| {
                let plan = self.config.plan("defects", a as u64);
                DefectReport::compute(self.map(), &self.exh, d, &t1, mode, &plan).map_err(lib_err("defects"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut cols = vec![("T1".to_string(), t1.big_t.clone())];
        for (a, rep) in reports.iter().enumerate() {
            cols.push((format!("N{a}"), rep.big_n.clone()));
            cols.push((format!("m{a}"), rep.proximity.clone()));
            cols.push((format!("delta{a}"), rep.delta.clone()));
            cols.push((format!("residual{a}"), fmt_residual(rep)));
        }
        self.out.write("defects.csv", &table(self.schedule.radii(), &cols))?;
        self.defects = Some(reports.clone());
        Ok(reports)
    }

    fn defect_analysis(&mut self) -> Result<Value, RunError> {
        let reports = self.defect_reports()?;
        let tj = self.series(1, true)?.clone();
        let tjm1 = self.series(0, true)?.clone();
        let nu = DiscreteMeasure::uniform(self.divisors()?).map_err(lib_err("defects"))?;
        let plan = self.config.plan("defectSuite", 0);
        let suite = defect_suite(self.map(), &self.exh, &nu, &tj, &tjm1, &plan).map_err(lib_err("defects"))?;
        self.out.write(
            "plotdata/mean_abs_defect.csv",
            &xy(&suite.radii, &suite.mean_abs_defect),
        )?;
        let deltas: Vec<Vec<f64>> = reports.iter().map(|r| r.delta.clone()).collect();
        let value = json!({
            "delta": deltas,
            "mean_abs_defect": suite.mean_abs_defect,
            "averaged_defect": suite.averaged_defect,
            "rate": suite.rate,
            "sup_potential": suite.sup.sup,
            "fitted_c": suite.fitted_c,
            "test_max_ratio": suite.test_max_ratio,
            "bound_holds_on_test": suite.bound_holds_on_test,
            "tail_ratios": suite.tail_ratios(),
        });
        to_value("defects", &value)
    }

    /// The residual `N + m − T₁` is constant in `r` (the proximity on the
    /// base circle), so its spread across radii measures the error.
    fn fmt(&mut self) -> Result<Value, RunError> {
        let reports = self.defect_reports()?;
        let radii = self.schedule.radii().to_vec();
        let t_max = *self.series(1, true)?.big_t.last().expect("nonempty schedule");
        let mut spreads = Vec::with_capacity(reports.len());
        let mut mean_residual = vec![0.0; radii.len()];
        for rep in &reports {
            let res = fmt_residual(rep);
            let mean = res.iter().sum::<f64>() / res.len() as f64;
            let var = res.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / res.len() as f64;
            spreads.push(var.sqrt());
            for (acc, v) in mean_residual.iter_mut().zip(&res) {
                *acc += v / reports.len() as f64;
            }
        }
        self.out
            .write("plotdata/fmt_residual.csv", &xy(&radii, &mean_residual))?;
        let max_spread = spreads.iter().copied().fold(0.0, f64::max);
        let value = json!({
            "mean_residual": mean_residual,
            "residual_std": spreads,
            "max_std_relative_to_T1": max_spread / t_max,
        });
        to_value("fmt", &value)
    }

    fn brody(&mut self) -> Result<Value, RunError> {
        let err = lib_err("brody");
        let family = self.config.build_family().expect("validated: family").map_err(&err)?;
        let plan = self.config.plan("brody", 0);
        let rep =
            brody_detector(&family, &self.exh, self.config.options.brody_c, &self.schedule, &plan).map_err(&err)?;
        for d in &rep.degrees {
            // smallest scaled ratio over the second half of the family
            let half = d.ratios.len() / 2;
            let y: Vec<f64> = (0..rep.radii.len())
                .map(|i| d.ratios[half..].iter().map(|row| row[i]).fold(f64::INFINITY, f64::min))
                .collect();
            self.out
                .write(&format!("plotdata/brody_ratio_j{}.csv", d.j), &xy(&rep.radii, &y))?;
        }
        to_value("brody", &rep)
    }

    fn growth(&mut self) -> Result<Value, RunError> {
        let k = self.exh.k();
        let top = self.series(k, false)?.clone();
        let lower = self.series(k - 1, false)?.clone();
        match growth_classify(&top, Some(&lower), self.config.options.growth_mode) {
            Ok(rep) => to_value("growth", &rep),
            Err(e @ (Error::NonMonotone | Error::Degenerate(_))) => Ok(json!({ "error": e.to_string() })),
            Err(e) => Err(lib_err("growth")(e)),
        }
    }

    fn density_points(&mut self) -> Result<Value, RunError> {
        let [re, im] = self.config.options.density_point;
        let mut z = vec![C64::new(0.0, 0.0); self.map().m() + 1];
        z[0] = C64::new(1.0, 0.0);
        z[1] = C64::new(re, im);
        let p = ChartPoint::from_homogeneous(&z);
        let plan = self.config.plan("densityPoints", 0);
        let rep = density_point_ratio(
            self.map(),
            &self.exh,
            &p,
            self.config.options.density_radius,
            &self.schedule,
            &plan,
        )
        .map_err(lib_err("densityPoints"))?;
        self.out
            .write("plotdata/density_ratio.csv", &xy(&rep.radii, &rep.ratio))?;
        to_value("densityPoints", &rep)
    }

    fn intersection(&mut self) -> Result<Value, RunError> {
        let mut out = Vec::new();
        for (a, d) in self.divisors()?.iter().enumerate() {
            let plan = self.config.plan("intersection", a as u64);
            let rep = intersection_positivity(self.map(), &self.exh, d, &self.schedule, &plan)
                .map_err(lib_err("intersection"))?;
            self.out
                .write(&format!("plotdata/intersection_{a}.csv"), &xy(&rep.radii, &rep.pairing))?;
            out.push(to_value("intersection", &rep)?);
        }
        Ok(Value::Array(out))
    }
}

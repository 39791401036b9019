use nevlab::scenario::{run_with_threads, validate, RunError, ScenarioConfig};
use serde_json::Value;

const FULL: &str = r#"
name = "power-all"
seed = 11
exhaustion = "logAbs"
degrees = [1]
analyses = ["characteristics", "massRatios", "conditions", "currents", "ddcBounds",
            "defects", "fmt", "growth", "densityPoints", "intersection"]
conditions = ["simpledMR", "alphaMR", "MR2sup", "diskEnergy"]

[map]
id = "power"
d = 3

[schedule]
min = 1.0
max = 4.5
count = 8

[quad]
strategy = "radialGrid"
budget = 8000

[divisors]
values = [[0.5, 0.25], [-1.0, 0.0]]
infinity = true

[options]
current_budget = 2000
dictionary_size = 6
"#;

const BRODY: &str = r#"
name = "scale-down"
exhaustion = "logAbs"
degrees = [1]
analyses = ["brody", "conditions"]
conditions = ["scaleCond"]

[family]
id = "scaleDown"
n = [1.0, 2.0, 4.0, 8.0]

[schedule]
min = 2.0
max = 5.0
count = 8

[quad]
strategy = "radialGrid"
budget = 8000
"#;

fn read_json(p: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &std::path::Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count() - 1
}

#[test]
fn every_analysis_writes_its_artifacts() {
    let cfg = ScenarioConfig::from_toml(FULL).unwrap();
    assert_eq!(validate(&cfg), vec![]);
    let dir = tempfile::tempdir().unwrap();
    let summary = run_with_threads(&cfg, dir.path(), Some(2)).unwrap();
    for f in ["characteristics.csv", "ratios.csv", "defects.csv"] {
        assert_eq!(csv_rows(&dir.path().join(f)), 8, "{f}");
    }
    assert!(summary.files.iter().filter(|f| f.starts_with("currents/")).count() == 8);
    assert!(summary.files.iter().any(|f| f.starts_with("plotdata/")));
    let report = read_json(&dir.path().join("report.json"));
    let a = &report["analyses"];
    assert_eq!(a["ddcBounds"]["j1"]["holds"], Value::Bool(true));
    let fmt_rel = a["fmt"]["max_std_relative_to_T1"].as_f64().unwrap();
    assert!(fmt_rel < 0.01, "{fmt_rel}");
    let conditions = read_json(&dir.path().join("conditions.json"));
    assert_eq!(conditions["j1"]["simpledMR"]["holds"], Value::Bool(true));
    // the disk condition does not apply to the plane and is recorded as an error
    assert!(conditions["j1"]["diskEnergy"].get("error").is_some());
    assert_eq!(a["intersection"].as_array().unwrap().len(), 3);
}

#[test]
fn family_scenario_runs_the_detector() {
    let cfg = ScenarioConfig::from_toml(BRODY).unwrap();
    assert_eq!(validate(&cfg), vec![]);
    let dir = tempfile::tempdir().unwrap();
    run_with_threads(&cfg, dir.path(), Some(1)).unwrap();
    let report = read_json(&dir.path().join("report.json"));
    assert_eq!(report["analyses"]["brody"]["verdict"]["branch"], "volumeBound");
}

#[test]
fn numerical_failure_keeps_partial_artifacts() {
    // the constant map has no mass, so the current construction fails
    let text = FULL
        .replace("id = \"power\"\nd = 3", "id = \"constant\"\nvalue = 2.0")
        .replace("\"conditions\", \"currents\"", "\"currents\"");
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run_with_threads(&cfg, dir.path(), None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(matches!(err, RunError::Numerical { .. }));
    let manifest = std::fs::read_to_string(dir.path().join("MANIFEST")).unwrap();
    assert!(manifest.contains("status incomplete"));
    assert!(dir.path().join("characteristics.csv").exists());
}

#[test]
fn validation_failures_name_fields() {
    let cfg = ScenarioConfig::from_toml(&FULL.replace("count = 8", "count = 4")).unwrap();
    let fields: Vec<String> = validate(&cfg).into_iter().map(|d| d.field).collect();
    assert!(fields.contains(&"schedule.count".to_string()));
    let cfg = ScenarioConfig::from_toml(&BRODY.replace("[family]\nid = \"scaleDown\"\nn = [1.0, 2.0, 4.0, 8.0]\n", ""))
        .unwrap();
    let fields: Vec<String> = validate(&cfg).into_iter().map(|d| d.field).collect();
    assert!(fields.contains(&"family".to_string()), "{fields:?}");
    let err = nevlab::scenario::run(&cfg, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

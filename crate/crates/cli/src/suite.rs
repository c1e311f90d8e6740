//! Manifests of named runs, aggregated reports and baseline comparison.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::app::{run_experiment, value_tokens, Cli, CliError, Command};
use crate::output::{self, Record};

#[derive(Args, Debug, Clone)]
pub struct SuiteArgs {
    /// Manifest JSON: {"runs": [{"name", "experiment", "args", "tolerance"}]}
    pub manifest: PathBuf,
    /// Compare against this frozen report; drift exits with status 4
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Also write the report here as a new baseline
    #[arg(long)]
    pub freeze: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tolerance {
    Abs(f64),
    Rel(f64),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: Option<String>,
    pub experiment: String,
    #[serde(default)]
    pub args: Map<String, Value>,
    #[serde(default)]
    pub tolerance: BTreeMap<String, Tolerance>,
}

impl RunSpec {
    pub fn key(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.experiment)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub runs: Vec<RunSpec>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("manifest {}: {e}", path.display())))?;
        let mut seen = std::collections::HashSet::new();
        for r in &m.runs {
            if !seen.insert(r.key()) {
                return Err(CliError::Config(format!("duplicate run name '{}'", r.key())));
            }
        }
        Ok(m)
    }
}

/// Runs every entry; the report maps run name to its records. Library errors
/// become a single `error` record.
pub fn run_manifest(m: &Manifest, pool: &rayon::ThreadPool) -> Result<Map<String, Value>, CliError> {
    let mut report = Map::new();
    for spec in &m.runs {
        let mut argv = vec!["sl2lab".to_string(), spec.experiment.clone()];
        argv.extend(value_tokens(&spec.args, |_| true)?);
        let cli = Cli::try_parse_from(&argv).map_err(|e| {
            CliError::Config(format!("run '{}': {}", spec.key(), e.to_string().lines().next().unwrap_or("")))
        })?;
        let Some(Command::Experiment(exp)) = cli.command else {
            return Err(CliError::Config(format!("run '{}' is not an experiment", spec.key())));
        };
        // a run the library rejects is part of the report, not a suite failure
        let rows = match run_experiment(&exp, pool, false) {
            Err(CliError::Lab(e)) => vec![Record::new(exp.name()).put("error", e.to_string())],
            other => other?,
        };
        report.insert(spec.key().to_string(), serde_json::to_value(rows).expect("records serialize"));
    }
    Ok(report)
}

fn close(a: &Value, b: &Value, tol: Option<Tolerance>) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let exact_ints = x.is_f64() == y.is_f64() && !x.is_f64();
            if exact_ints && tol.is_none() {
                return x == y;
            }
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            let diff = (x - y).abs();
            match tol {
                Some(Tolerance::Abs(t)) => diff <= t,
                Some(Tolerance::Rel(t)) => diff <= t * x.abs().max(y.abs()),
                None => diff <= 1e-12 * x.abs().max(y.abs()),
            }
        }
        _ => a == b,
    }
}

/// One message per differing field, missing run or changed row count.
pub fn compare(report: &Map<String, Value>, baseline: &Map<String, Value>, m: &Manifest) -> Vec<String> {
    let tols: BTreeMap<&str, &BTreeMap<String, Tolerance>> = m.runs.iter().map(|r| (r.key(), &r.tolerance)).collect();
    let mut drift = Vec::new();
    for name in baseline.keys().filter(|k| !report.contains_key(*k)) {
        drift.push(format!("{name}: present in baseline only"));
    }
    for (name, rows) in report {
        let Some(base) = baseline.get(name) else {
            drift.push(format!("{name}: not in baseline"));
            continue;
        };
        let (rows, base) = (rows.as_array().cloned().unwrap_or_default(), base.as_array().cloned().unwrap_or_default());
        if rows.len() != base.len() {
            drift.push(format!("{name}: {} rows, baseline has {}", rows.len(), base.len()));
            continue;
        }
        for (i, (r, b)) in rows.iter().zip(&base).enumerate() {
            let (Some(r), Some(b)) = (r.as_object(), b.as_object()) else {
                drift.push(format!("{name}[{i}]: not an object"));
                continue;
            };
            let keys: std::collections::BTreeSet<&String> = r.keys().chain(b.keys()).collect();
            for k in keys {
                let tol = tols.get(name.as_str()).and_then(|t| t.get(k)).copied();
                match (r.get(k), b.get(k)) {
                    (Some(x), Some(y)) if close(x, y, tol) => {}
                    (x, y) => drift.push(format!(
                        "{name}[{i}].{k}: {} vs baseline {}",
                        x.map_or("missing".into(), Value::to_string),
                        y.map_or("missing".into(), Value::to_string)
                    )),
                }
            }
        }
    }
    drift
}

pub fn run(args: &SuiteArgs, pool: &rayon::ThreadPool, out: Option<&Path>) -> Result<(), CliError> {
    let m = Manifest::load(&args.manifest)?;
    let report = run_manifest(&m, pool)?;
    let bytes = output::to_json(&report);
    output::emit(&bytes, out)?;
    if let Some(path) = &args.freeze {
        output::emit(&bytes, Some(path))?;
    }
    if let Some(path) = &args.baseline {
        let text = std::fs::read_to_string(path)?;
        let base = match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(o)) => o,
            _ => return Err(CliError::Config(format!("baseline {} is not a JSON object", path.display()))),
        };
        let drift = compare(&report, &base, &m);
        for d in &drift {
            eprintln!("drift: {d}");
        }
        if !drift.is_empty() {
            return Err(CliError::Drift(drift.len()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn manifest(v: Value) -> Manifest {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn tolerance_rules() {
        assert!(close(&json!(3), &json!(3), None));
        assert!(!close(&json!(3), &json!(4), None));
        assert!(close(&json!(3), &json!(4), Some(Tolerance::Abs(1.0))));
        assert!(close(&json!(1.0), &json!(1.0 + 1e-14), None));
        assert!(!close(&json!(1.0), &json!(1.01), None));
        assert!(close(&json!(1.0), &json!(1.01), Some(Tolerance::Rel(0.05))));
        assert!(close(&json!("4/13"), &json!("4/13"), None));
    }

    #[test]
    fn compare_reports_each_kind_of_drift() {
        let m = manifest(json!({"runs": [{"name": "a", "experiment": "girth", "tolerance": {"x": {"abs": 0.5}}}]}));
        let base = json!({"a": [{"x": 1.0, "y": 2}], "b": []});
        let rep = json!({"a": [{"x": 1.4, "y": 3}], "c": []});
        let d = compare(rep.as_object().unwrap(), base.as_object().unwrap(), &m);
        assert_eq!(d.len(), 3, "{d:?}");
        assert!(compare(base.as_object().unwrap(), base.as_object().unwrap(), &m).is_empty());
    }

    #[test]
    fn empty_manifest_gives_empty_report() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert!(run_manifest(&Manifest::default(), &pool).unwrap().is_empty());
    }
}

//! Named, seeded Monte Carlo experiments.

mod experiments;
pub mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::market::default_format;
use crate::oracle::DEFAULT_GUARD;
use crate::prefgen::{ModelSpec, StreamKey};
pub use stats::{Cell, Outcome, Rule, Stat, Verdict};

/// Every experiment name accepted by [`run_experiment`].
pub const CATALOG: &[&str] = &[
    "oracle-sweep",
    "rank-gap",
    "multiplicity",
    "counterexample-swap",
    "counterexample-grouped",
    "stable-pairs",
    "folklore-lb",
    "x-process",
    "block-tail",
    "thm5-ratio",
    "prel-diagnostic",
];

fn default_guard() -> usize {
    DEFAULT_GUARD
}

/// Model override: `{"model": name, "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub model: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ModelChoice {
    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::from_parts(&self.model, &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Sizes {
    One(usize),
    Many(Vec<usize>),
}

fn de_sizes<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    Ok(match Sizes::deserialize(d)? {
        Sizes::One(n) => vec![n],
        Sizes::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_format")]
    pub format: u64,
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelChoice>,
    /// Sweep sizes; empty means the experiment's default.
    #[serde(default, deserialize_with = "de_sizes")]
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_guard")]
    pub guard: usize,
    /// Experiment-specific knobs such as `lambda` or `sigma`.
    #[serde(default)]
    pub params: Map<String, Value>,
    /// Worker threads; does not affect results.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentConfig {
            format: default_format(),
            experiment: experiment.into(),
            model: None,
            n: Vec::new(),
            trials: None,
            seed,
            guard: DEFAULT_GUARD,
            params: Map::new(),
            workers: None,
            output: None,
        }
    }

    pub fn with_n(mut self, n: &[usize]) -> Self {
        self.n = n.to_vec();
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = Some(trials);
        self
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }

    pub fn with_model(mut self, model: &str, params: Map<String, Value>) -> Self {
        self.model = Some(ModelChoice { model: model.into(), params });
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.format != 1 {
            return Err(Error::FormatVersion(cfg.format));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !CATALOG.contains(&self.experiment.as_str()) {
            return Err(Error::UnknownExperiment(self.experiment.clone()));
        }
        if self.trials == Some(0) {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn f64_param(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
                .ok_or_else(|| Error::param(key, format!("expected a number, got {v}"))),
        }
    }

    pub(crate) fn str_param<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.params.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => Ok(s),
            Some(v) => Err(Error::param(key, format!("expected a string, got {v}"))),
        }
    }

    /// Stream of trial `t` at sweep point `n`.
    pub fn stream(&self, n: usize, t: u64) -> StreamKey {
        StreamKey::master(self.seed).child(n as u64).trial(t)
    }
}

/// Aggregates for one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    pub key: BTreeMap<String, Cell>,
    pub stats: BTreeMap<String, Stat>,
}

impl Group {
    pub fn n(&self) -> Option<usize> {
        self.key.get("n").and_then(Cell::as_f64).map(|v| v as usize)
    }

    pub fn stat(&self, column: &str) -> Option<&Stat> {
        self.stats.get(column)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub group: String,
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub columns: Vec<String>,
    /// Leading columns that identify a sweep point.
    pub key_columns: usize,
    pub rows: Vec<Vec<Cell>>,
    pub groups: Vec<Group>,
    pub bounds: Vec<BoundValue>,
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub trends: Vec<TrendSummary>,
    #[serde(default)]
    pub extra: Map<String, Value>,
}

impl ExperimentReport {
    pub(crate) fn new(config: ExperimentConfig, columns: &[&str], key_columns: usize, rows: Vec<Vec<Cell>>) -> Self {
        let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        let groups = group_rows(&columns, key_columns, &rows);
        ExperimentReport {
            config,
            columns,
            key_columns,
            rows,
            groups,
            bounds: Vec::new(),
            verdicts: Vec::new(),
            trends: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn group(&self, label: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn bound(&self, group: &str, name: &str) -> Option<f64> {
        self.bounds.iter().find(|b| b.group == group && b.name == name).map(|b| b.value)
    }

    pub(crate) fn add_bound(&mut self, group: &str, name: &str, value: f64) {
        self.bounds.push(BoundValue { group: group.into(), name: name.into(), value });
    }

    /// Adds a verdict comparing `statistic`'s mean in `group` to `bound`.
    pub(crate) fn judge(&mut self, rule: &str, group: &str, statistic: &str, cmp: Rule, bound: f64) {
        let stat = self
            .group(group)
            .and_then(|g| g.stat(statistic))
            .copied()
            .unwrap_or_else(|| Stat::of(&[]));
        self.verdicts.push(Verdict::check(rule, group, statistic, cmp, &stat, bound));
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed) && self.trends.iter().all(|t| t.outcome != Outcome::Fail)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        let summary = serde_json::json!({
            "format": default_format(),
            "experiment": self.config.experiment,
            "config": self.config,
            "groups": self.groups,
            "bounds": self.bounds,
            "verdicts": self.verdicts,
            "trends": self.trends,
            "extra": self.extra,
            "passed": self.passed(),
        });
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }

    /// Writes `path` (CSV) and its sibling `.summary.json`; returns the
    /// summary path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_csv())?;
        let summary = summary_path(path);
        fs::write(&summary, self.summary_json())?;
        Ok(summary)
    }
}

/// `out/x.csv` → `out/x.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

fn group_label(columns: &[String], key: &[Cell]) -> String {
    if key.is_empty() {
        return "all".into();
    }
    columns.iter().zip(key).map(|(c, v)| format!("{c}={v}")).collect::<Vec<_>>().join(",")
}

fn group_rows(columns: &[String], keys: usize, rows: &[Vec<Cell>]) -> Vec<Group> {
    let mut order: Vec<(Vec<Cell>, Vec<&Vec<Cell>>)> = Vec::new();
    for row in rows {
        let key = row[..keys].to_vec();
        match order.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(row),
            None => order.push((key, vec![row])),
        }
    }
    order
        .into_iter()
        .map(|(key, members)| {
            let mut stats = BTreeMap::new();
            // Skip the key and trial columns.
            for (c, name) in columns.iter().enumerate().skip(keys + 1) {
                let vals: Option<Vec<f64>> = members.iter().map(|r| r[c].as_f64()).collect();
                if let Some(vals) = vals {
                    stats.insert(name.clone(), Stat::of(&vals));
                }
            }
            Group {
                label: group_label(columns, &key),
                key: columns.iter().cloned().zip(key).collect(),
                stats,
            }
        })
        .collect()
}

/// Runs `f(t)` for `t` in `0..trials` and returns the results in trial
/// order.
pub(crate) fn run_trials<T, F>(cfg: &ExperimentConfig, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let work = || (0..trials as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
        match cfg.workers {
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::param("workers", e))?
                .install(work),
            None => work(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cfg;
        (0..trials as u64).map(f).collect()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    experiments::run(cfg)
}

/// Direction a sweep statistic is expected to move in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    Decreasing,
    /// Every point at least this value.
    Floor(f64),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub statistic: String,
    pub trend: Trend,
    pub points: Vec<TrendPoint>,
    pub outcome: Outcome,
}

impl std::fmt::Display for TrendSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let want = match self.trend {
            Trend::Decreasing => "decreasing".to_string(),
            Trend::Floor(x) => format!("every point >= {x}"),
            Trend::None => "none".to_string(),
        };
        write!(f, "[{}] trend {} ({want}):", self.outcome, self.statistic)?;
        for p in &self.points {
            write!(f, " n={} {:.6}±{:.6}", p.n, p.mean, p.se)?;
        }
        Ok(())
    }
}

/// Cross-size comparison of one statistic over the groups of `reports`.
pub fn summarize(reports: &[ExperimentReport], statistic: &str, trend: Trend) -> TrendSummary {
    let mut points: Vec<TrendPoint> = reports
        .iter()
        .flat_map(|r| r.groups.iter())
        .filter_map(|g| {
            let s = g.stat(statistic)?;
            Some(TrendPoint { n: g.n()?, mean: s.mean, se: s.se })
        })
        .collect();
    points.sort_by_key(|p| p.n);
    let outcome = if points.len() < 2 || trend == Trend::None {
        Outcome::ReportOnly
    } else {
        let ok = match trend {
            Trend::Decreasing => points.windows(2).all(|w| w[1].mean < w[0].mean),
            Trend::Floor(f) => points.iter().all(|p| p.mean >= f),
            Trend::None => true,
        };
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    };
    TrendSummary { statistic: statistic.into(), trend, points, outcome }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"folklore-lb","n":200,"trials":10,"seed":1,"params":{"lambda":0.99}}"#,
        )
        .unwrap();
        assert_eq!(cfg.n, vec![200]);
        assert_eq!(cfg.guard, DEFAULT_GUARD);
        let cfg2 = ExperimentConfig::from_json(r#"{"experiment":"multiplicity","n":[50,100],"seed":1}"#).unwrap();
        assert_eq!(cfg2.n, vec![50, 100]);
        assert!(ExperimentConfig::from_json(r#"{"format":2,"experiment":"x","seed":1}"#).is_err());
        let bad = ExperimentConfig::new("nope", 1);
        assert!(matches!(run_experiment(&bad), Err(Error::UnknownExperiment(_))));
        assert!(ExperimentConfig::new("x-process", 1).with_trials(0).validate().is_err());
    }

    #[test]
    fn csv_and_groups() {
        let rows = vec![
            vec![Cell::from(2usize), Cell::from(0usize), Cell::from(1.5)],
            vec![Cell::from(2usize), Cell::from(1usize), Cell::from(2.5)],
            vec![Cell::from(3usize), Cell::from(0usize), Cell::from(4.0)],
        ];
        let r = ExperimentReport::new(ExperimentConfig::new("x-process", 0), &["n", "trial", "v"], 1, rows);
        assert_eq!(r.to_csv(), "n,trial,v\n2,0,1.5\n2,1,2.5\n3,0,4\n");
        assert_eq!(r.groups.len(), 2);
        let s = r.group("n=2").unwrap().stat("v").unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.se - (0.5f64).sqrt() / 2f64.sqrt()).abs() < 1e-15);
        let t = summarize(std::slice::from_ref(&r), "v", Trend::Decreasing);
        assert_eq!(t.outcome, Outcome::Fail);
        let single = summarize(&[], "v", Trend::Decreasing);
        assert_eq!(single.outcome, Outcome::ReportOnly);
    }

    #[test]
    fn summary_path_sibling() {
        assert_eq!(summary_path(Path::new("out/a.csv")), PathBuf::from("out/a.summary.json"));
    }
}

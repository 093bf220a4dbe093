//! Report tables, aggregates and verdicts.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One CSV cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(f) => Some(*f),
            Cell::Text(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => write!(f, "{x}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => write!(f, "\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Mean, sample standard deviation and standard error of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    /// Sums run in input order, so equal inputs give equal bits.
    pub fn of(values: &[f64]) -> Stat {
        let count = values.len();
        if count == 0 {
            return Stat { mean: 0.0, sd: 0.0, se: 0.0, count, min: 0.0, max: 0.0 };
        }
        let n = count as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            sd,
            se: sd / n.sqrt(),
            count,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    ReportOnly,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::ReportOnly => "report-only",
        })
    }
}

/// How an empirical mean is compared against a reference value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// mean ≤ bound + 3·SE
    AtMost,
    /// |mean − bound| ≤ 3·SE
    Within,
    /// mean > bound
    Above,
    /// mean ≥ bound
    AtLeast,
    /// mean = bound exactly
    Exact,
    /// no pass/fail
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule: String,
    pub group: String,
    pub statistic: String,
    pub comparison: Rule,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub outcome: Outcome,
}

impl Verdict {
    pub fn check(rule: &str, group: &str, statistic: &str, comparison: Rule, stat: &Stat, bound: f64) -> Verdict {
        let (m, se) = (stat.mean, stat.se);
        let ok = match comparison {
            Rule::AtMost => Some(m <= bound + 3.0 * se),
            Rule::Within => Some((m - bound).abs() <= 3.0 * se),
            Rule::Above => Some(m > bound),
            Rule::AtLeast => Some(m >= bound),
            Rule::Exact => Some(m == bound),
            Rule::Report => None,
        };
        Verdict {
            rule: rule.into(),
            group: group.into(),
            statistic: statistic.into(),
            comparison,
            mean: m,
            se,
            bound,
            outcome: match ok {
                Some(true) => Outcome::Pass,
                Some(false) => Outcome::Fail,
                None => Outcome::ReportOnly,
            },
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome != Outcome::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparison {
            Rule::AtMost => "<= (+3SE)",
            Rule::Within => "~= (3SE)",
            Rule::Above => ">",
            Rule::AtLeast => ">=",
            Rule::Exact => "==",
            Rule::Report => "vs",
        };
        write!(
            f,
            "[{}] {} {} {}: mean {:.6} ± {:.6} {} {:.6}",
            self.outcome, self.rule, self.group, self.statistic, self.mean, self.se, op, self.bound
        )
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::{pearson, spearman, system_aggregate};
use crate::corpus::EvalRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Utterance,
    System,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "utterance" | "utt" => Ok(Self::Utterance),
            "system" | "sys" => Ok(Self::System),
            other => Err(Error::Config(format!(
                "unknown level `{other}` (expected utterance or system)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric_a: String,
    pub metric_b: String,
    pub level: Level,
    pub lcc: f64,
    pub srcc: f64,
    pub n: usize,
}

/// One line of a results file. Score lines also carry `token_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub utt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<usize>,
}

#[derive(Debug, Clone, Default)]
struct Row {
    system_id: String,
    values: BTreeMap<String, f64>,
}

/// Metric values keyed by utterance: manifest columns merged with results.
#[derive(Debug, Clone, Default)]
pub struct MetricTable {
    rows: BTreeMap<String, Row>,
}

impl MetricTable {
    pub fn from_manifest(records: &[EvalRecord]) -> Self {
        let mut rows = BTreeMap::new();
        for r in records {
            let mut values = r.metrics.clone();
            for (name, v) in [("mos", r.mos), ("wer", r.wer), ("cer", r.cer)] {
                if let Some(v) = v {
                    values.insert(name.to_string(), v);
                }
            }
            rows.insert(
                r.utt_id.clone(),
                Row {
                    system_id: r.system_id.clone(),
                    values,
                },
            );
        }
        Self { rows }
    }

    /// Adds result values for utterances present in the manifest; others
    /// are counted and skipped. Later records overwrite earlier ones.
    pub fn merge(&mut self, results: &[MetricRecord]) -> usize {
        let mut unmatched = 0;
        for r in results {
            match self.rows.get_mut(&r.utt_id) {
                Some(row) => {
                    row.values.insert(r.metric.clone(), r.value);
                }
                None => unmatched += 1,
            }
        }
        unmatched
    }

    /// `(system_id, value)` for every utterance carrying `metric`.
    pub fn values(&self, metric: &str) -> Vec<(&str, f64)> {
        self.rows
            .values()
            .filter_map(|row| Some((row.system_id.as_str(), *row.values.get(metric)?)))
            .collect()
    }

    /// `(system_id, a, b)` for every utterance carrying both metrics.
    pub fn join(&self, a: &str, b: &str) -> Vec<(&str, f64, f64)> {
        self.rows
            .values()
            .filter_map(|row| Some((row.system_id.as_str(), *row.values.get(a)?, *row.values.get(b)?)))
            .collect()
    }
}

fn report(a: &str, b: &str, level: Level, xs: &[f64], ys: &[f64]) -> Result<CorrelationReport> {
    Ok(CorrelationReport {
        metric_a: a.to_string(),
        metric_b: b.to_string(),
        level,
        lcc: pearson(xs, ys)?,
        srcc: spearman(xs, ys)?,
        n: xs.len(),
    })
}

/// One report per `(pair, level)`, in the given order. Utterance level
/// correlates joined raw values; system level correlates per-system means
/// of both series over the joined utterances.
pub fn correlation_run(
    table: &MetricTable,
    pairs: &[(String, String)],
    levels: &[Level],
) -> Result<Vec<CorrelationReport>> {
    let mut out = Vec::new();
    for (a, b) in pairs {
        let joined = table.join(a, b);
        if joined.len() < 2 {
            return Err(Error::validation(format!(
                "joining `{a}` with `{b}` gives {} utterance(s); at least 2 are needed",
                joined.len()
            )));
        }
        for &level in levels {
            let (xs, ys): (Vec<f64>, Vec<f64>) = match level {
                Level::Utterance => joined.iter().map(|&(_, x, y)| (x, y)).unzip(),
                Level::System => {
                    let xa: Vec<(&str, f64)> = joined.iter().map(|&(s, x, _)| (s, x)).collect();
                    let ya: Vec<(&str, f64)> = joined.iter().map(|&(s, _, y)| (s, y)).collect();
                    let xs = system_aggregate(&xa);
                    let ys = system_aggregate(&ya);
                    if xs.len() < 2 {
                        return Err(Error::validation(format!(
                            "system-level correlation of `{a}` with `{b}` needs at least 2 systems"
                        )));
                    }
                    xs.into_iter().zip(ys).map(|((_, x), (_, y))| (x, y)).unzip()
                }
            };
            out.push(report(a, b, level, &xs, &ys)?);
        }
    }
    Ok(out)
}

/// Plain-text table with one row per metric pair and LCC/SRCC columns per
/// level.
pub fn render_table(reports: &[CorrelationReport]) -> String {
    let mut rows: BTreeMap<(String, String), BTreeMap<Level, &CorrelationReport>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in reports {
        let key = (r.metric_a.clone(), r.metric_b.clone());
        if !rows.contains_key(&key) {
            order.push(key.clone());
        }
        rows.entry(key).or_default().insert(r.level, r);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:>8} {:>8} {:>6} {:>8} {:>8} {:>6}",
        "metric pair", "utt LCC", "utt SRCC", "n", "sys LCC", "sys SRCC", "n"
    );
    for key in order {
        let levels = &rows[&key];
        let _ = write!(s, "{:<28}", format!("{} ~ {}", key.0, key.1));
        for level in [Level::Utterance, Level::System] {
            match levels.get(&level) {
                Some(r) => {
                    let _ = write!(s, " {:>8.3} {:>8.3} {:>6}", r.lcc, r.srcc, r.n);
                }
                None => {
                    let _ = write!(s, " {:>8} {:>8} {:>6}", "-", "-", "-");
                }
            }
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_outside_manifest_are_counted() {
        let mut t = MetricTable::from_manifest(&[EvalRecord::new("u1", "s")]);
        let r = MetricRecord {
            utt_id: "zz".into(),
            system_id: None,
            metric: "m".into(),
            value: 1.0,
            token_count: None,
        };
        assert_eq!(t.merge(&[r]), 1);
    }

    #[test]
    fn table_has_a_row_per_pair() {
        let r = CorrelationReport {
            metric_a: "a".into(),
            metric_b: "b".into(),
            level: Level::System,
            lcc: 0.5,
            srcc: 0.25,
            n: 3,
        };
        let t = render_table(&[r]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("a ~ b"));
        assert!(t.contains("0.500"));
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{mean, quantile, sample_std};
use crate::error::{Error, Result};

/// Bin edges (`counts.len() + 1` of them) and counts. Bins are half-open
/// except the last, which includes its upper edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Minimum, lower quartile, median, upper quartile, maximum.
    pub quantiles: [f64; 5],
    pub histogram: Histogram,
}

/// Location shift of group `a` relative to group `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub group_a: String,
    pub group_b: String,
    pub mean_diff: f64,
    /// `None` when the pooled deviation is zero but the means differ.
    pub cohens_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub summaries: Vec<DistributionSummary>,
    pub shifts: Vec<Shift>,
}

/// Effect size `(mean(a) − mean(b)) / pooled_sd`.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Option<f64> {
    let diff = mean(a) - mean(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_std(a).powi(2) + (nb - 1.0) * sample_std(b).powi(2)) / (na + nb - 2.0)).sqrt();
    if pooled > 0.0 {
        Some(diff / pooled)
    } else if diff == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

fn bin_of(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// Per-group summaries over histogram edges shared by all groups, plus the
/// shift between each requested `(a, b)` pair. With no pairs given, every
/// pair of groups in sorted order is compared.
pub fn distribution_summary<S: AsRef<str>>(
    scores: &[(S, f64)],
    bins: usize,
    pairs: &[(String, String)],
) -> Result<DistributionReport> {
    if bins == 0 {
        return Err(Error::validation("histogram needs at least one bin"));
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (g, v) in scores {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite score in group `{}`", g.as_ref())));
        }
        groups.entry(g.as_ref()).or_default().push(*v);
    }
    if groups.is_empty() {
        return Err(Error::validation("no scores to summarize"));
    }
    if let Some((g, v)) = groups.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::validation(format!(
            "group `{g}` has {} value(s); at least 2 are needed",
            v.len()
        )));
    }
    let all = groups.values().flatten();
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();

    let summaries = groups
        .iter()
        .map(|(g, values)| {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let mut counts = vec![0; bins];
            for &v in values {
                counts[bin_of(v, lo, width, bins)] += 1;
            }
            DistributionSummary {
                group: g.to_string(),
                n: values.len(),
                mean: mean(values),
                std: sample_std(values),
                quantiles: [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile(&sorted, p)),
                histogram: Histogram {
                    edges: edges.clone(),
                    counts,
                },
            }
        })
        .collect();

    let requested: Vec<(String, String)> = if pairs.is_empty() {
        let names: Vec<&str> = groups.keys().copied().collect();
        names
            .iter()
            .enumerate()
            .flat_map(|(i, a)| names[i + 1..].iter().map(move |b| (a.to_string(), b.to_string())))
            .collect()
    } else {
        pairs.to_vec()
    };
    let mut shifts = Vec::with_capacity(requested.len());
    for (a, b) in requested {
        let ga = groups
            .get(a.as_str())
            .ok_or_else(|| Error::validation(format!("unknown group `{a}`")))?;
        let gb = groups
            .get(b.as_str())
            .ok_or_else(|| Error::validation(format!("unknown group `{b}`")))?;
        shifts.push(Shift {
            mean_diff: mean(ga) - mean(gb),
            cohens_d: cohens_d(ga, gb),
            group_a: a,
            group_b: b,
        });
    }
    Ok(DistributionReport { summaries, shifts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_groups() {
        let s: Vec<(&str, f64)> = [("a", 0.0); 4].into_iter().chain([("b", 1.0); 4]).collect();
        let r = distribution_summary(&s, 4, &[]).unwrap();
        assert_eq!(r.shifts[0].mean_diff, -1.0);
        assert_eq!(r.shifts[0].cohens_d, None);
        assert_eq!(r.summaries[0].histogram.counts, vec![4, 0, 0, 0]);
        assert_eq!(r.summaries[1].histogram.counts, vec![0, 0, 0, 4]);
    }

    #[test]
    fn single_value_everywhere() {
        let s = [("a", 2.0), ("a", 2.0)];
        let r = distribution_summary(&s, 3, &[]).unwrap();
        assert_eq!(r.summaries[0].histogram.edges.first(), Some(&1.5));
        assert_eq!(r.summaries[0].histogram.counts.iter().sum::<usize>(), 2);
        assert!(r.shifts.is_empty());
    }

    #[test]
    fn errors() {
        assert!(distribution_summary(&[("a", 1.0)], 3, &[]).is_err());
        assert!(distribution_summary(&[("a", 1.0), ("a", 2.0)], 0, &[]).is_err());
        let pairs = [("a".to_string(), "z".to_string())];
        assert!(distribution_summary(&[("a", 1.0), ("a", 2.0)], 2, &pairs).is_err());
    }
}

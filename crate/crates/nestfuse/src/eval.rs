//! Ranking effectiveness metrics and paired significance testing.
//!
//! Average precision divides by the total number of relevant documents in
//! the judgments (unretrieved relevant documents contribute zero), graded
//! judgments are binarized at grade > 0, and P@n divides by n even when fewer
//! documents were retrieved. Queries in the run without relevant judged
//! documents are skipped and counted.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::runs::{Qrels, RunList};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no query of the run has relevance judgments")]
    NoJudgedQueries,
    #[error("per-query vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("paired test needs at least 2 observations, got {n}")]
    TooFewObservations { n: usize },
}

/// Per-query metric values.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub ap: f64,
    pub rr: f64,
    /// Precision at each requested cutoff.
    pub precision: BTreeMap<usize, f64>,
}

/// Metrics over all evaluated queries of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub cutoffs: Vec<usize>,
    pub per_query: BTreeMap<String, QueryMetrics>,
    /// Queries present in the run but skipped: unjudged, or judged with no
    /// relevant document.
    pub skipped: Vec<String>,
}

impl MetricsReport {
    pub fn query_count(&self) -> usize {
        self.per_query.len()
    }

    fn mean(&self, f: impl Fn(&QueryMetrics) -> f64) -> f64 {
        let n = self.per_query.len();
        self.per_query.values().map(f).sum::<f64>() / n as f64
    }

    /// Mean average precision.
    pub fn map(&self) -> f64 {
        self.mean(|q| q.ap)
    }

    /// Mean reciprocal rank.
    pub fn mrr(&self) -> f64 {
        self.mean(|q| q.rr)
    }

    /// Mean precision at cutoff `n`; `None` when `n` was not evaluated.
    pub fn mean_precision(&self, n: usize) -> Option<f64> {
        if !self.cutoffs.contains(&n) {
            return None;
        }
        Some(self.mean(|q| q.precision[&n]))
    }

    /// Per-query values of a named metric, in query-id order.
    pub fn metric_vector(&self, metric: &str) -> Option<Vec<f64>> {
        match metric {
            "map" | "ap" => Some(self.per_query.values().map(|q| q.ap).collect()),
            "mrr" | "rr" => Some(self.per_query.values().map(|q| q.rr).collect()),
            _ => {
                let n: usize = metric.strip_prefix("p@")?.parse().ok()?;
                self.per_query
                    .values()
                    .map(|q| q.precision.get(&n).copied())
                    .collect()
            }
        }
    }
}

/// Score a run against judgments at the given precision cutoffs.
pub fn evaluate(
    run: &RunList,
    qrels: &Qrels,
    cutoffs: &[usize],
) -> Result<MetricsReport, EvalError> {
    let mut per_query = BTreeMap::new();
    let mut skipped = Vec::new();

    for query_id in run.query_ids() {
        let total_relevant = qrels.relevant_count(query_id);
        if total_relevant == 0 {
            skipped.push(query_id.to_string());
            continue;
        }
        let entries = run.entries(query_id).expect("query listed by the run");

        let mut hits = 0usize;
        let mut ap_sum = 0.0;
        let mut rr = 0.0;
        let mut hits_at: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, entry) in entries.iter().enumerate() {
            let rank = i + 1;
            if qrels.is_relevant(query_id, &entry.doc_id) {
                hits += 1;
                ap_sum += hits as f64 / rank as f64;
                if rr == 0.0 {
                    rr = 1.0 / rank as f64;
                }
            }
            if cutoffs.contains(&rank) {
                hits_at.insert(rank, hits);
            }
        }
        // Short runs: the deepest seen hit count stands for every deeper cutoff.
        let precision = cutoffs
            .iter()
            .map(|&n| {
                let h = hits_at.get(&n).copied().unwrap_or(hits);
                (n, h as f64 / n as f64)
            })
            .collect();

        per_query.insert(
            query_id.to_string(),
            QueryMetrics {
                ap: ap_sum / total_relevant as f64,
                rr,
                precision,
            },
        );
    }

    if per_query.is_empty() {
        return Err(EvalError::NoJudgedQueries);
    }
    Ok(MetricsReport {
        cutoffs: cutoffs.to_vec(),
        per_query,
        skipped,
    })
}

/// Outcome of a two-sided paired t-test between matched per-query metric
/// vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceResult {
    pub metric: String,
    pub n: usize,
    pub mean_diff: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// Two-sided significance at alpha = 0.1.
    pub significant_10: bool,
    /// Two-sided significance at alpha = 0.05.
    pub significant_05: bool,
}

/// Paired two-sided t-test on `a[i] - b[i]`, with `n - 1` degrees of freedom.
///
/// Degenerate inputs stay well-defined: identical vectors give `t = 0,
/// p = 1`; a constant nonzero difference gives an infinite statistic and
/// `p = 0`.
pub fn paired_t_test(
    metric: impl Into<String>,
    a: &[f64],
    b: &[f64],
) -> Result<SignificanceResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewObservations { n });
    }

    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();

    let (t_stat, p_value) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (sd / (n as f64).sqrt());
        let dist =
            StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("valid t distribution for n >= 2");
        let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
        (t, p)
    };

    Ok(SignificanceResult {
        metric: metric.into(),
        n,
        mean_diff: mean,
        t_stat,
        p_value,
        significant_10: p_value < 0.1,
        significant_05: p_value < 0.05,
    })
}

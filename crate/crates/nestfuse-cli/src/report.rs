//! Text output for the eval, compare, and tau subcommands.

use std::fmt::Write as _;

use anyhow::{bail, Result};

use nestfuse::eval::{evaluate, paired_t_test, MetricsReport};
use nestfuse::kendall_tau;
use nestfuse::runs::{build_universe, Qrels, RunList, UniverseError};

pub fn pretty_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let mut row = |name: &str, value: String| {
        writeln!(out, "{name:<20}{value}").expect("writing to String cannot fail");
    };
    row("queries evaluated", report.query_count().to_string());
    row("queries skipped", report.skipped.len().to_string());
    row("MAP", format!("{:.4}", report.map()));
    row("MRR", format!("{:.4}", report.mrr()));
    for &n in &report.cutoffs {
        row(
            &format!("P@{n}"),
            format!("{:.4}", report.mean_precision(n).expect("cutoff evaluated")),
        );
    }
    out
}

pub fn aggregate_tsv(report: &MetricsReport) -> String {
    let mut out = String::from("metric\tvalue\n");
    writeln!(out, "queries\t{}", report.query_count()).unwrap();
    writeln!(out, "skipped\t{}", report.skipped.len()).unwrap();
    writeln!(out, "map\t{}", report.map()).unwrap();
    writeln!(out, "mrr\t{}", report.mrr()).unwrap();
    for &n in &report.cutoffs {
        writeln!(out, "p@{n}\t{}", report.mean_precision(n).unwrap()).unwrap();
    }
    out
}

pub fn per_query_csv(report: &MetricsReport) -> String {
    let mut out = String::from("query_id,ap,rr");
    for &n in &report.cutoffs {
        write!(out, ",p@{n}").unwrap();
    }
    out.push('\n');
    for (qid, metrics) in &report.per_query {
        write!(out, "{qid},{},{}", metrics.ap, metrics.rr).unwrap();
        for &n in &report.cutoffs {
            write!(out, ",{}", metrics.precision[&n]).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Evaluate both runs, align their per-query metric vectors over shared
/// queries, and run the paired t-test.
pub fn compare(
    run_a: &RunList,
    run_b: &RunList,
    qrels: &Qrels,
    metric: &str,
    cutoffs: &[usize],
) -> Result<String> {
    let report_a = evaluate(run_a, qrels, cutoffs)?;
    let report_b = evaluate(run_b, qrels, cutoffs)?;

    let shared: Vec<&String> = report_a
        .per_query
        .keys()
        .filter(|qid| report_b.per_query.contains_key(*qid))
        .collect();
    if shared.len() < 2 {
        bail!(
            "paired test needs at least 2 shared evaluated queries, found {}",
            shared.len()
        );
    }

    let pick = |report: &MetricsReport, qid: &str| -> Option<f64> {
        let q = &report.per_query[qid];
        match metric {
            "map" | "ap" => Some(q.ap),
            "mrr" | "rr" => Some(q.rr),
            _ => {
                let n: usize = metric.strip_prefix("p@")?.parse().ok()?;
                q.precision.get(&n).copied()
            }
        }
    };
    let mut a = Vec::with_capacity(shared.len());
    let mut b = Vec::with_capacity(shared.len());
    for qid in &shared {
        match (pick(&report_a, qid), pick(&report_b, qid)) {
            (Some(x), Some(y)) => {
                a.push(x);
                b.push(y);
            }
            _ => bail!(
                "unknown metric {metric:?} (expected map, mrr, or p@<n> with an evaluated cutoff)"
            ),
        }
    }

    let result = paired_t_test(metric, &a, &b)?;
    let mean_a = a.iter().sum::<f64>() / a.len() as f64;
    let mean_b = b.iter().sum::<f64>() / b.len() as f64;
    let flags = match (result.significant_10, result.significant_05) {
        (true, true) => "† ‡".to_string(),
        (true, false) => "†".to_string(),
        _ => "none".to_string(),
    };

    let mut out = String::new();
    writeln!(
        out,
        "paired t-test on {metric} over {} shared queries",
        result.n
    )
    .unwrap();
    writeln!(
        out,
        "mean a = {mean_a:.4}, mean b = {mean_b:.4}, mean diff = {:+.4}",
        result.mean_diff
    )
    .unwrap();
    writeln!(out, "t = {:.4}, p = {:.4}", result.t_stat, result.p_value).unwrap();
    writeln!(
        out,
        "significance vs two-sided alpha 0.1 (†) / 0.05 (‡): {flags}"
    )
    .unwrap();
    Ok(out)
}

/// Pairwise tau rows per query, plus a mean row marked `*` `*`, as TSV.
pub fn tau_matrix(runs: &[RunList]) -> Result<String> {
    let query_ids: std::collections::BTreeSet<String> = runs
        .iter()
        .flat_map(|r| r.query_ids().map(str::to_string))
        .collect();

    let mut out = String::from("query_id\tlist_a\tlist_b\ttau\n");
    for qid in &query_ids {
        let universe = match build_universe(runs, qid) {
            Ok(u) => u,
            Err(UniverseError::InsufficientCoverage { covered, total, .. }) => {
                eprintln!("note: query {qid} skipped: covered by {covered} of {total} runs");
                continue;
            }
        };
        if universe.m() < 2 {
            eprintln!("note: query {qid} skipped: universe holds a single document");
            continue;
        }
        let rank_vectors: Vec<Vec<f64>> = (0..universe.systems.len())
            .map(|s| universe.ranks(s).iter().map(|&r| f64::from(r)).collect())
            .collect();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..rank_vectors.len() {
            for j in (i + 1)..rank_vectors.len() {
                let tau = kendall_tau(&rank_vectors[i], &rank_vectors[j])?;
                writeln!(
                    out,
                    "{qid}\t{}\t{}\t{tau}",
                    universe.systems[i], universe.systems[j]
                )
                .unwrap();
                sum += tau;
                count += 1;
            }
        }
        writeln!(out, "{qid}\t*\t*\t{}", sum / count as f64).unwrap();
    }
    Ok(out)
}

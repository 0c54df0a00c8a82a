//! The fuse subcommand: ingestion, per-query fusion, and output writing.
//!
//! Queries are independent, so fusion runs on a thread pool bounded by
//! `--jobs`; outputs are collected and written in query-id order, so the
//! result does not depend on scheduling.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use nestfuse::baselines;
use nestfuse::marginals::tables_for_universe;
use nestfuse::nested::{
    nested_fuse, tau_fallback_gate, FusedList, FusionRoute, FusionTrace, Relevance,
};
use nestfuse::runs::{
    build_universe, parse_qrels, parse_queries, parse_run_file, parse_term_matches, Qrels,
    QuerySet, RunList, TermMatchTable, UniverseError,
};
use nestfuse::Tunables;

use crate::{FuseArgs, Method};

enum QueryOutcome {
    Fused {
        list: FusedList,
        trace: Option<FusionTrace>,
    },
    /// The concordance gate routed the query to CombMNZ.
    FellBack {
        list: FusedList,
        mean_tau: f64,
    },
    Skipped {
        reason: String,
    },
}

pub fn run(args: &FuseArgs, tunables: Tunables) -> Result<()> {
    let mut runs = Vec::new();
    for path in &args.runs {
        runs.push(parse_run_file(path)?);
    }
    let mut tags = BTreeSet::new();
    for run in &runs {
        if !tags.insert(run.system_id.as_str()) {
            bail!(
                "two run files share the system tag {:?}; tags must be distinct",
                run.system_id
            );
        }
    }

    let queries: Option<QuerySet> = match &args.queries {
        Some(path) => Some(parse_queries(path)?),
        None => None,
    };
    let matches: Option<TermMatchTable> = match &args.matches {
        Some(path) => Some(parse_term_matches(
            path,
            queries.as_ref().expect("validated in cmd_fuse"),
        )?),
        None => None,
    };
    let qrels: Option<Qrels> = match &args.qrels {
        Some(path) => Some(parse_qrels(path)?),
        None => None,
    };

    let query_ids: Vec<String> = runs
        .iter()
        .flat_map(|r| r.query_ids().map(str::to_string))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .context("building worker pool")?;
    let outcomes: Result<Vec<(String, QueryOutcome)>> = pool.install(|| {
        query_ids
            .par_iter()
            .map(|qid| {
                let outcome = fuse_query(
                    qid,
                    &runs,
                    args.method,
                    queries.as_ref(),
                    matches.as_ref(),
                    args,
                    &tunables,
                )?;
                Ok((qid.clone(), outcome))
            })
            .collect()
    });
    let outcomes = outcomes?;

    let mut run_out = String::new();
    let mut trace_out = String::from(
        "query_id\tcycle\tlist_a\tlist_b\ttau\ttheta_g\ttheta_p_min\ttheta_p_median\ttheta_p_max\n",
    );
    let mut fused_queries = 0usize;
    let tag = args.method.name();
    for (qid, outcome) in &outcomes {
        match outcome {
            QueryOutcome::Fused { list, trace } => {
                fused_queries += 1;
                write_run(&mut run_out, list, &tag);
                if let Some(trace) = trace {
                    write_trace(&mut trace_out, trace);
                }
            }
            QueryOutcome::FellBack { list, mean_tau } => {
                fused_queries += 1;
                write_run(&mut run_out, list, &tag);
                eprintln!(
                    "note: query {qid}: mean tau {mean_tau} <= {}, fused with combmnz",
                    args.tau_fallback.expect("gate fired")
                );
            }
            QueryOutcome::Skipped { reason } => {
                let judged = match &qrels {
                    Some(q) if q.contains_query(qid) => " (query has judgments)",
                    Some(_) => " (query unjudged)",
                    None => "",
                };
                eprintln!("note: query {qid} skipped: {reason}{judged}");
            }
        }
    }

    if fused_queries == 0 {
        bail!("no query is covered by at least 2 runs; nothing to fuse");
    }
    fs::write(&args.output, run_out)
        .with_context(|| format!("writing {}", args.output.display()))?;
    if let Some(path) = &args.trace {
        if args.method.has_trace() {
            fs::write(path, trace_out).with_context(|| format!("writing {}", path.display()))?;
        } else {
            eprintln!(
                "note: --trace ignored: method {} records no fusion cycles",
                args.method.name()
            );
        }
    }
    eprintln!(
        "fused {fused_queries} of {} queries with {}",
        query_ids.len(),
        args.method.name()
    );
    Ok(())
}

fn fuse_query(
    qid: &str,
    runs: &[RunList],
    method: Method,
    queries: Option<&QuerySet>,
    matches: Option<&TermMatchTable>,
    args: &FuseArgs,
    tunables: &Tunables,
) -> Result<QueryOutcome> {
    let universe = match build_universe(runs, qid) {
        Ok(u) => u,
        Err(UniverseError::InsufficientCoverage { covered, total, .. }) => {
            return Ok(QueryOutcome::Skipped {
                reason: format!("covered by {covered} of {total} runs"),
            });
        }
    };
    if universe.m() < 2 {
        // A one-document universe carries no order to fuse or correlate.
        return Ok(QueryOutcome::Skipped {
            reason: "universe holds a single document".to_string(),
        });
    }
    let tables = tables_for_universe(&universe)?;

    let relevance = if method.needs_query_context() {
        let queries = queries.expect("validated in cmd_fuse");
        Some(
            Relevance::for_query(&universe, queries, matches)
                .with_context(|| format!("query {qid}"))?,
        )
    } else {
        None
    };

    if let Some(threshold) = args.tau_fallback {
        if method.is_nonlinear() {
            let gate = tau_fallback_gate(&tables, threshold)?;
            if gate.route == FusionRoute::Linear {
                let list = baselines::comb_mnz(&universe, &tables)?;
                return Ok(QueryOutcome::FellBack {
                    list,
                    mean_tau: gate.mean_tau,
                });
            }
        }
    }

    let outcome = match method {
        Method::Nested(kernel) => {
            let (list, trace) =
                nested_fuse(&universe, &tables, kernel, relevance.as_ref(), tunables)?;
            QueryOutcome::Fused {
                list,
                trace: Some(trace),
            }
        }
        Method::CombMnz => QueryOutcome::Fused {
            list: baselines::comb_mnz(&universe, &tables)?,
            trace: None,
        },
        Method::Isr => QueryOutcome::Fused {
            list: baselines::isr(&universe)?,
            trace: None,
        },
        Method::Rbc => QueryOutcome::Fused {
            list: baselines::rbc(&universe, args.rbc_phi)?,
            trace: None,
        },
        Method::PairwiseAvg(kernel) => QueryOutcome::Fused {
            list: baselines::pairwise_average(
                &universe,
                &tables,
                kernel,
                relevance.as_ref(),
                tunables,
            )?,
            trace: None,
        },
    };
    Ok(outcome)
}

fn write_run(out: &mut String, list: &FusedList, tag: &str) {
    for entry in &list.entries {
        writeln!(
            out,
            "{} Q0 {} {} {} {}",
            list.query_id, entry.doc_id, entry.rank, entry.score, tag
        )
        .expect("writing to String cannot fail");
    }
}

fn write_trace(out: &mut String, trace: &FusionTrace) {
    for c in &trace.cycles {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            trace.query_id,
            c.cycle,
            c.left_id,
            c.right_id,
            c.tau,
            c.theta_g,
            c.theta_p_min,
            c.theta_p_median,
            c.theta_p_max
        )
        .expect("writing to String cannot fail");
    }
}

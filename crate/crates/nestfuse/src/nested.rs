//! Greedy nested fusion of `n` lists per query.
//!
//! Each cycle measures Kendall's tau for every pair of current lists, picks
//! the most concordant pair, fuses it document-by-document with the chosen
//! kernel, and reinserts the fused score vector as a new list, until a single
//! list remains (`n - 1` cycles). Fused scores are reinserted verbatim, not
//! re-normalized: tau only depends on the induced order, so the monotone
//! distortion of the kernel does not affect later concordance estimates.
//!
//! Pair selection maximizes theta (equivalently tau, the mapping being
//! monotone); ties break toward the lexicographically smallest sorted pair of
//! list ids, and a fused list's id is built from its parents' ids, so the
//! outcome does not depend on input order.

use thiserror::Error;

use crate::concordance::{kendall_tau, theta_from_tau, ConcordanceError};
use crate::kernel::{estimate_relevance, modulate_theta, FusionKernel, KernelError, KernelParams};
use crate::marginals::MarginalTable;
use crate::runs::{DocumentUniverse, QuerySet, TermMatchTable};
use crate::Tunables;

#[derive(Debug, Error, PartialEq)]
pub enum NestedError {
    #[error("at least 2 lists required, got {n}")]
    TooFewLists { n: usize },
    #[error("list {source_id} covers {got} documents, universe has {expected}")]
    UniverseMismatch {
        source_id: String,
        expected: usize,
        got: usize,
    },
    #[error("list {source_id} belongs to query {got}, universe to {expected}")]
    QueryMismatch {
        source_id: String,
        expected: String,
        got: String,
    },
    #[error("kernel {kernel} needs query context to estimate relevance")]
    MissingRelevance { kernel: &'static str },
    #[error("query {query_id} not present in the query set")]
    UnknownQuery { query_id: String },
    #[error(transparent)]
    Concordance(#[from] ConcordanceError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Per-document relevance input for the composition kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Relevance {
    /// Estimate per document from query coverage and rank consistency.
    /// `match_counts` is aligned to the universe document order.
    Estimated {
        query_length: u32,
        match_counts: Vec<u32>,
    },
    /// Force the same relevance for every document. `Fixed(1.0)` makes the
    /// composition kernels coincide with their copula counterparts.
    Fixed(f64),
}

impl Relevance {
    /// Assemble per-document relevance inputs for one query from parsed
    /// query text and the optional term-match sidecar. Documents without a
    /// sidecar entry get a match count of zero.
    pub fn for_query(
        universe: &DocumentUniverse,
        queries: &QuerySet,
        matches: Option<&TermMatchTable>,
    ) -> Result<Self, NestedError> {
        let query = queries
            .get(&universe.query_id)
            .ok_or_else(|| NestedError::UnknownQuery {
                query_id: universe.query_id.clone(),
            })?;
        let match_counts = universe
            .docs
            .iter()
            .map(|doc| matches.map_or(0, |t| t.count(&universe.query_id, doc)))
            .collect();
        Ok(Self::Estimated {
            query_length: query.length,
            match_counts,
        })
    }
}

/// Final ranking of one query: universe documents ordered by fused score
/// descending, ties broken by ascending document id.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedList {
    pub query_id: String,
    pub entries: Vec<FusedEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEntry {
    pub doc_id: String,
    pub score: f64,
    /// Dense rank, 1-based.
    pub rank: u32,
}

impl FusedList {
    /// Build a list from universe-aligned scores, applying the ordering and
    /// tie-break rules.
    pub fn from_scores(universe: &DocumentUniverse, scores: &[f64]) -> Self {
        debug_assert_eq!(scores.len(), universe.m());
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // universe.docs is sorted, so a stable sort on descending score
        // leaves ties in ascending id order.
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let entries = order
            .into_iter()
            .enumerate()
            .map(|(i, j)| FusedEntry {
                doc_id: universe.docs[j].clone(),
                score: scores[j],
                rank: i as u32 + 1,
            })
            .collect();
        Self {
            query_id: universe.query_id.clone(),
            entries,
        }
    }
}

/// One fusion cycle of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionCycle {
    /// 1-based cycle index.
    pub cycle: usize,
    pub left_id: String,
    pub right_id: String,
    pub tau: f64,
    pub theta_g: f64,
    pub theta_p_min: f64,
    pub theta_p_median: f64,
    pub theta_p_max: f64,
}

/// Diagnostic record of a nested fusion: one entry per cycle, `n - 1` total.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrace {
    pub query_id: String,
    pub cycles: Vec<FusionCycle>,
}

struct WorkingList {
    id: String,
    scores: Vec<f64>,
}

/// Fuse `n >= 2` marginal tables over a shared universe into one list.
///
/// Composition kernels require `relevance`; copula kernels ignore it.
pub fn nested_fuse(
    universe: &DocumentUniverse,
    marginals: &[MarginalTable],
    kernel: FusionKernel,
    relevance: Option<&Relevance>,
    tunables: &Tunables,
) -> Result<(FusedList, FusionTrace), NestedError> {
    if marginals.len() < 2 {
        return Err(NestedError::TooFewLists { n: marginals.len() });
    }
    for table in marginals {
        if table.m() != universe.m() {
            return Err(NestedError::UniverseMismatch {
                source_id: table.source_id.clone(),
                expected: universe.m(),
                got: table.m(),
            });
        }
        if table.query_id != universe.query_id {
            return Err(NestedError::QueryMismatch {
                source_id: table.source_id.clone(),
                expected: universe.query_id.clone(),
                got: table.query_id.clone(),
            });
        }
    }
    if !kernel.is_copula() && relevance.is_none() {
        return Err(NestedError::MissingRelevance {
            kernel: kernel.name(),
        });
    }

    let mut lists: Vec<WorkingList> = marginals
        .iter()
        .map(|t| WorkingList {
            id: t.source_id.clone(),
            scores: t.scores.clone(),
        })
        .collect();

    let mut cycles = Vec::with_capacity(lists.len() - 1);
    while lists.len() > 1 {
        let (i, j, tau) = select_pair(&lists)?;
        let estimate = theta_from_tau(tau, kernel.family(), tunables);
        let theta_g = estimate.theta_g;

        let m = lists[i].scores.len();
        let mut fused = Vec::with_capacity(m);
        let mut theta_ps = Vec::with_capacity(m);
        for k in 0..m {
            let u = lists[i].scores[k];
            let v = lists[j].scores[k];
            let params = if kernel.is_copula() {
                KernelParams::copula(theta_g)
            } else {
                let rel_d = match relevance.expect("checked above") {
                    Relevance::Fixed(r) => *r,
                    Relevance::Estimated {
                        query_length,
                        match_counts,
                    } => estimate_relevance(u, v, match_counts[k], *query_length)?.rel_d,
                };
                modulate_theta(theta_g, rel_d, tunables.epsilon_p)
            };
            theta_ps.push(params.theta_p);
            fused.push(kernel.evaluate(u, v, params)?);
        }

        let (min, median, max) = summarize(&mut theta_ps);
        let (left_id, right_id) = sorted_ids(&lists[i].id, &lists[j].id);
        let (left_id, right_id) = (left_id.to_string(), right_id.to_string());
        cycles.push(FusionCycle {
            cycle: cycles.len() + 1,
            left_id: left_id.clone(),
            right_id: right_id.clone(),
            tau,
            theta_g,
            theta_p_min: min,
            theta_p_median: median,
            theta_p_max: max,
        });

        let merged_id = format!("({left_id}+{right_id})");
        // j > i, so remove j first.
        lists.remove(j);
        lists.remove(i);
        lists.push(WorkingList {
            id: merged_id,
            scores: fused,
        });
    }

    let final_scores = &lists[0].scores;
    Ok((
        FusedList::from_scores(universe, final_scores),
        FusionTrace {
            query_id: universe.query_id.clone(),
            cycles,
        },
    ))
}

/// Most concordant pair of current lists: maximal tau, ties broken by the
/// smallest sorted id pair.
fn select_pair(lists: &[WorkingList]) -> Result<(usize, usize, f64), ConcordanceError> {
    let mut best: Option<(usize, usize, f64, (String, String))> = None;
    for i in 0..lists.len() {
        for j in (i + 1)..lists.len() {
            let tau = kendall_tau(&lists[i].scores, &lists[j].scores)?;
            let (a, b) = sorted_ids(&lists[i].id, &lists[j].id);
            let key = (a.to_string(), b.to_string());
            let better = match &best {
                None => true,
                Some((_, _, best_tau, best_key)) => {
                    tau > *best_tau || (tau == *best_tau && key < *best_key)
                }
            };
            if better {
                best = Some((i, j, tau, key));
            }
        }
    }
    let (i, j, tau, _) = best.expect("at least one pair");
    Ok((i, j, tau))
}

fn sorted_ids<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn summarize(values: &mut [f64]) -> (f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    (values[0], median, values[n - 1])
}

/// Outcome of one consecutive-cycle nesting check.
#[derive(Debug, Clone, PartialEq)]
pub struct NestingCheck {
    pub earlier_cycle: usize,
    pub later_cycle: usize,
    /// `theta_g` of the earlier (inner) cycle.
    pub theta_inner: f64,
    /// Largest per-document `theta_p` of the later (outer) cycle.
    pub theta_outer_max: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestingReport {
    pub checks: Vec<NestingCheck>,
    pub all_satisfied: bool,
}

/// Check, per consecutive cycle pair, whether the inner parameter dominates
/// the outer one (`theta_g` of the earlier cycle at least every `theta_p` of
/// the later cycle).
///
/// Diagnostic only: greedy max-theta pairing makes the ordering emergent
/// rather than enforced, and weakly concordant data can violate it.
pub fn check_nesting_constraint(trace: &FusionTrace) -> NestingReport {
    let checks: Vec<NestingCheck> = trace
        .cycles
        .windows(2)
        .map(|w| {
            let satisfied = w[0].theta_g >= w[1].theta_p_max;
            NestingCheck {
                earlier_cycle: w[0].cycle,
                later_cycle: w[1].cycle,
                theta_inner: w[0].theta_g,
                theta_outer_max: w[1].theta_p_max,
                satisfied,
            }
        })
        .collect();
    let all_satisfied = checks.iter().all(|c| c.satisfied);
    NestingReport {
        checks,
        all_satisfied,
    }
}

/// Default threshold of the concordance gate: at or below this mean pairwise
/// tau, linear fusion is preferable.
pub const DEFAULT_TAU_THRESHOLD: f64 = 0.4;

/// Routing decision of the concordance gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionRoute {
    /// Weak concordance: a linear method (CombMNZ) is preferable.
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    pub mean_tau: f64,
    pub route: FusionRoute,
}

/// Route a query by its mean pairwise tau: at or below the threshold the
/// nonlinear kernels have little to exploit and the query should fall back
/// to linear fusion.
pub fn tau_fallback_gate(
    marginals: &[MarginalTable],
    threshold: f64,
) -> Result<GateDecision, NestedError> {
    if marginals.len() < 2 {
        return Err(NestedError::TooFewLists { n: marginals.len() });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..marginals.len() {
        for j in (i + 1)..marginals.len() {
            sum += kendall_tau(&marginals[i].scores, &marginals[j].scores)?;
            count += 1;
        }
    }
    let mean_tau = sum / count as f64;
    let route = if mean_tau <= threshold {
        FusionRoute::Linear
    } else {
        FusionRoute::Nonlinear
    };
    Ok(GateDecision { mean_tau, route })
}

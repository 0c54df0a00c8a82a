//! Linear and rank-based fusion baselines.
//!
//! All baselines score only a system's native entries: the padding that the
//! universe construction adds for the nonlinear methods would otherwise leak
//! scores into lists that never retrieved the document. CombMNZ shares the
//! same rank-derived normalized scores as the nonlinear methods, which keeps
//! comparisons normalization-neutral.

use thiserror::Error;

use crate::concordance::theta_from_tau;
use crate::kernel::{estimate_relevance, modulate_theta, FusionKernel, KernelParams};
use crate::marginals::MarginalTable;
use crate::nested::{FusedList, NestedError, Relevance};
use crate::runs::DocumentUniverse;
use crate::Tunables;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("at least 2 lists required, got {n}")]
    TooFewLists { n: usize },
    #[error("{count} marginal tables for {expected} systems")]
    TableMismatch { count: usize, expected: usize },
    #[error("persistence must lie in (0, 1), got {phi}")]
    InvalidPhi { phi: f64 },
    #[error(transparent)]
    Nested(#[from] NestedError),
}

fn check_lists(universe: &DocumentUniverse) -> Result<(), BaselineError> {
    let n = universe.systems.len();
    if n < 2 {
        return Err(BaselineError::TooFewLists { n });
    }
    Ok(())
}

/// Sum in value order: float addition is not associative, so summing in
/// input-list order would make scores depend on the order the runs were
/// passed in.
fn stable_sum(addends: &mut [f64]) -> f64 {
    addends.sort_by(f64::total_cmp);
    addends.iter().sum()
}

/// CombMNZ: sum of normalized scores over the lists natively containing the
/// document, multiplied by the number of such lists.
pub fn comb_mnz(
    universe: &DocumentUniverse,
    marginals: &[MarginalTable],
) -> Result<FusedList, BaselineError> {
    check_lists(universe)?;
    if marginals.len() != universe.systems.len() {
        return Err(BaselineError::TableMismatch {
            count: marginals.len(),
            expected: universe.systems.len(),
        });
    }
    let m = universe.m();
    let mut scores = vec![0.0f64; m];
    let mut addends = Vec::new();
    for (j, score) in scores.iter_mut().enumerate() {
        addends.clear();
        for (s, table) in marginals.iter().enumerate() {
            if universe.native(s)[j] {
                addends.push(table.scores[j]);
            }
        }
        *score = stable_sum(&mut addends) * addends.len() as f64;
    }
    Ok(FusedList::from_scores(universe, &scores))
}

/// Inverse square rank: sum of `1 / rank^2` over native lists, multiplied by
/// the native hit count.
pub fn isr(universe: &DocumentUniverse) -> Result<FusedList, BaselineError> {
    check_lists(universe)?;
    let m = universe.m();
    let mut scores = vec![0.0f64; m];
    let mut addends = Vec::new();
    for (j, score) in scores.iter_mut().enumerate() {
        addends.clear();
        for s in 0..universe.systems.len() {
            if universe.native(s)[j] {
                let rank = f64::from(universe.ranks(s)[j]);
                addends.push(1.0 / (rank * rank));
            }
        }
        *score = stable_sum(&mut addends) * addends.len() as f64;
    }
    Ok(FusedList::from_scores(universe, &scores))
}

/// Rank-biased centroid: geometrically decaying weight
/// `(1 - phi) * phi^(rank - 1)` summed over native lists.
pub fn rbc(universe: &DocumentUniverse, phi: f64) -> Result<FusedList, BaselineError> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(BaselineError::InvalidPhi { phi });
    }
    check_lists(universe)?;
    let m = universe.m();
    let mut scores = vec![0.0f64; m];
    let mut addends = Vec::new();
    for (j, score) in scores.iter_mut().enumerate() {
        addends.clear();
        for s in 0..universe.systems.len() {
            if universe.native(s)[j] {
                addends.push((1.0 - phi) * phi.powi(universe.ranks(s)[j] as i32 - 1));
            }
        }
        *score = stable_sum(&mut addends);
    }
    Ok(FusedList::from_scores(universe, &scores))
}

/// Fuse every pair of lists with the kernel, then average the pairwise fused
/// scores per document.
///
/// Each pair gets its own theta from that pair's tau; composition kernels
/// additionally modulate `theta_p` per document and therefore need
/// `relevance`.
pub fn pairwise_average(
    universe: &DocumentUniverse,
    marginals: &[MarginalTable],
    kernel: FusionKernel,
    relevance: Option<&Relevance>,
    tunables: &Tunables,
) -> Result<FusedList, BaselineError> {
    check_lists(universe)?;
    if marginals.len() != universe.systems.len() {
        return Err(BaselineError::TableMismatch {
            count: marginals.len(),
            expected: universe.systems.len(),
        });
    }
    if !kernel.is_copula() && relevance.is_none() {
        return Err(NestedError::MissingRelevance {
            kernel: kernel.name(),
        }
        .into());
    }

    let n = marginals.len();
    let m = universe.m();
    let mut per_doc: Vec<Vec<f64>> = vec![Vec::with_capacity(n * (n - 1) / 2); m];
    for i in 0..n {
        for j in (i + 1)..n {
            let tau = crate::concordance::kendall_tau(&marginals[i].scores, &marginals[j].scores)
                .map_err(NestedError::from)?;
            let theta_g = theta_from_tau(tau, kernel.family(), tunables).theta_g;
            for k in 0..m {
                let u = marginals[i].scores[k];
                let v = marginals[j].scores[k];
                let params = if kernel.is_copula() {
                    KernelParams::copula(theta_g)
                } else {
                    let rel_d = match relevance.expect("checked above") {
                        Relevance::Fixed(r) => *r,
                        Relevance::Estimated {
                            query_length,
                            match_counts,
                        } => {
                            estimate_relevance(u, v, match_counts[k], *query_length)
                                .map_err(NestedError::from)?
                                .rel_d
                        }
                    };
                    modulate_theta(theta_g, rel_d, tunables.epsilon_p)
                };
                per_doc[k].push(kernel.evaluate(u, v, params).map_err(NestedError::from)?);
            }
        }
    }

    let pair_count = (n * (n - 1) / 2) as f64;
    let scores: Vec<f64> = per_doc
        .iter_mut()
        .map(|addends| stable_sum(addends) / pair_count)
        .collect();
    Ok(FusedList::from_scores(universe, &scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::clayton;
    use crate::marginals::tables_for_universe;
    use crate::runs::{build_universe, RunList};

    fn setup(runs: &[&str], qid: &str) -> (DocumentUniverse, Vec<MarginalTable>) {
        let lists: Vec<RunList> = runs
            .iter()
            .map(|c| RunList::parse_str(c, "test").unwrap())
            .collect();
        let u = build_universe(&lists, qid).unwrap();
        let tables = tables_for_universe(&u).unwrap();
        (u, tables)
    }

    // A = [D1, D2], B = [D2, D3]; universe m = 3.
    // u_A = (D1: 0.75, D2: 0.5, D3: 0.25 padded)
    // u_B = (D2: 0.75, D3: 0.5, D1: 0.25 padded)
    const RUN_A: &str = "Q1 Q0 D1 1 2.0 a\nQ1 Q0 D2 2 1.0 a";
    const RUN_B: &str = "Q1 Q0 D2 1 2.0 b\nQ1 Q0 D3 2 1.0 b";

    fn score_of(list: &FusedList, doc: &str) -> f64 {
        list.entries.iter().find(|e| e.doc_id == doc).unwrap().score
    }

    #[test]
    fn comb_mnz_counts_native_lists_only() {
        let (u, tables) = setup(&[RUN_A, RUN_B], "Q1");
        let fused = comb_mnz(&u, &tables).unwrap();
        // D2 native to both: (0.5 + 0.75) * 2; D1/D3 native to one.
        assert!((score_of(&fused, "D2") - 2.5).abs() < 1e-12);
        assert!((score_of(&fused, "D1") - 0.75).abs() < 1e-12);
        assert!((score_of(&fused, "D3") - 0.5).abs() < 1e-12);
        assert_eq!(fused.entries[0].doc_id, "D2");
    }

    #[test]
    fn comb_mnz_identical_lists_keep_order() {
        let run2 = RUN_A.replace(" a", " b");
        let (u, tables) = setup(&[RUN_A, &run2], "Q1");
        let fused = comb_mnz(&u, &tables).unwrap();
        let docs: Vec<&str> = fused.entries.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(docs, vec!["D1", "D2"]);
    }

    #[test]
    fn isr_values() {
        let (u, _) = setup(&[RUN_A, RUN_B], "Q1");
        let fused = isr(&u).unwrap();
        // D2: rank 2 in A, rank 1 in B -> 2 * (1/4 + 1)
        assert!((score_of(&fused, "D2") - 2.5).abs() < 1e-12);
        // D1: rank 1 in A only -> 1 * 1
        assert!((score_of(&fused, "D1") - 1.0).abs() < 1e-12);
        // D3: rank 2 in B only -> 1 * 1/4
        assert!((score_of(&fused, "D3") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rbc_values_and_ratio() {
        let phi = 0.98;
        let (u, _) = setup(&[RUN_A, RUN_B], "Q1");
        let fused = rbc(&u, phi).unwrap();
        // D1 at rank 1 in one list
        assert!((score_of(&fused, "D1") - 0.02).abs() < 1e-12);
        // D2: rank 2 in A + rank 1 in B
        assert!((score_of(&fused, "D2") - (0.02 * phi + 0.02)).abs() < 1e-12);
        // consecutive-rank weight ratio is exactly phi
        let w1 = (1.0 - phi) * phi.powi(0);
        let w2 = (1.0 - phi) * phi.powi(1);
        assert_eq!(w2 / w1, phi);
    }

    #[test]
    fn rbc_rejects_bad_phi() {
        let (u, _) = setup(&[RUN_A, RUN_B], "Q1");
        assert_eq!(
            rbc(&u, 1.2).unwrap_err(),
            BaselineError::InvalidPhi { phi: 1.2 }
        );
        assert_eq!(
            rbc(&u, 0.0).unwrap_err(),
            BaselineError::InvalidPhi { phi: 0.0 }
        );
    }

    #[test]
    fn pairwise_average_two_lists_is_single_fusion() {
        let (u, tables) = setup(&[RUN_A, RUN_B], "Q1");
        let tun = Tunables::default();
        let avg = pairwise_average(&u, &tables, FusionKernel::Clayton, None, &tun).unwrap();
        let (single, _) =
            crate::nested::nested_fuse(&u, &tables, FusionKernel::Clayton, None, &tun).unwrap();
        assert_eq!(avg, single);
    }

    #[test]
    fn pairwise_average_three_lists_matches_brute_force() {
        let a = "Q1 Q0 D1 1 3.0 a\nQ1 Q0 D2 2 2.0 a\nQ1 Q0 D3 3 1.0 a";
        let b = "Q1 Q0 D1 1 3.0 b\nQ1 Q0 D3 2 2.0 b\nQ1 Q0 D2 3 1.0 b";
        let c = "Q1 Q0 D2 1 3.0 c\nQ1 Q0 D1 2 2.0 c\nQ1 Q0 D3 3 1.0 c";
        let (u, tables) = setup(&[a, b, c], "Q1");
        let tun = Tunables::default();
        let avg = pairwise_average(&u, &tables, FusionKernel::Clayton, None, &tun).unwrap();

        for (j, doc) in u.docs.iter().enumerate() {
            let mut sum = 0.0;
            for (i, k) in [(0usize, 1usize), (0, 2), (1, 2)] {
                let tau =
                    crate::concordance::kendall_tau(&tables[i].scores, &tables[k].scores).unwrap();
                let theta = theta_from_tau(tau, crate::KernelFamily::Clayton, &tun).theta_g;
                sum += clayton(tables[i].scores[j], tables[k].scores[j], theta).unwrap();
            }
            assert!((score_of(&avg, doc) - sum / 3.0).abs() < 1e-12, "doc {doc}");
        }
    }

    #[test]
    fn pairwise_average_identical_lists_keep_order() {
        let a = "Q1 Q0 D1 1 3.0 a\nQ1 Q0 D2 2 2.0 a\nQ1 Q0 D3 3 1.0 a";
        let b = a.replace(" a", " b");
        let c = a.replace(" a", " c");
        let (u, tables) = setup(&[a, &b, &c], "Q1");
        let avg = pairwise_average(
            &u,
            &tables,
            FusionKernel::Gumbel,
            None,
            &Tunables::default(),
        )
        .unwrap();
        let docs: Vec<&str> = avg.entries.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(docs, vec!["D1", "D2", "D3"]);
    }
}

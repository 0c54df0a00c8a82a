//! Property-based invariants across the fusion pipeline.

use proptest::prelude::*;

use nestfuse::baselines::{comb_mnz, isr, rbc};
use nestfuse::kernel::{f_el, f_pf, FusionKernel, KernelParams};
use nestfuse::marginals::{normalize_ranks, tables_for_universe};
use nestfuse::nested::{nested_fuse, Relevance};
use nestfuse::runs::{build_universe, RunList};
use nestfuse::{kendall_tau, Tunables};

/// Brute-force signed pair count: the quadratic definition of Kendall's tau.
fn tau_sign_sum(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len();
    let mut sum: i64 = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            let sx = match x[i].partial_cmp(&x[j]).unwrap() {
                std::cmp::Ordering::Less => -1i64,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            };
            let sy = match y[i].partial_cmp(&y[j]).unwrap() {
                std::cmp::Ordering::Less => -1i64,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            };
            sum += sx * sy;
        }
    }
    sum as f64 / (m * (m - 1) / 2) as f64
}

fn permutation(m: usize) -> impl Strategy<Value = Vec<u32>> {
    Just((1..=m as u32).collect::<Vec<u32>>()).prop_shuffle()
}

fn two_permutations() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (2usize..60).prop_flat_map(|m| (permutation(m), permutation(m)))
}

fn as_f64(v: &[u32]) -> Vec<f64> {
    v.iter().map(|&r| r as f64).collect()
}

proptest! {
    #[test]
    fn kendall_fast_path_matches_sign_sum((x, y) in two_permutations()) {
        let xf = as_f64(&x);
        let yf = as_f64(&y);
        prop_assert_eq!(kendall_tau(&xf, &yf).unwrap(), tau_sign_sum(&xf, &yf));
    }

    #[test]
    fn kendall_handles_ties_like_sign_sum(
        x in proptest::collection::vec(0u8..6, 2..40),
        seed in any::<u64>(),
    ) {
        // Duplicated small values force ties in both vectors.
        let m = x.len();
        let y: Vec<f64> = (0..m).map(|i| ((seed >> (i % 32)) & 7) as f64).collect();
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        prop_assert_eq!(kendall_tau(&xf, &y).unwrap(), tau_sign_sum(&xf, &y));
    }

    #[test]
    fn kendall_identity_and_reversal(x in (2usize..80).prop_flat_map(permutation)) {
        let xf = as_f64(&x);
        let reversed: Vec<f64> = {
            let m = x.len() as u32;
            x.iter().map(|&r| (m + 1 - r) as f64).collect()
        };
        prop_assert_eq!(kendall_tau(&xf, &xf).unwrap(), 1.0);
        prop_assert_eq!(kendall_tau(&xf, &reversed).unwrap(), -1.0);
    }

    #[test]
    fn kendall_symmetric_and_monotone_invariant((x, y) in two_permutations()) {
        let xf = as_f64(&x);
        let yf = as_f64(&y);
        let tau = kendall_tau(&xf, &yf).unwrap();
        prop_assert_eq!(kendall_tau(&yf, &xf).unwrap(), tau);
        // Any strictly increasing relabeling of the values preserves tau.
        let gx: Vec<f64> = xf.iter().map(|&v| (v * 3.0 + 1.0).ln()).collect();
        let gy: Vec<f64> = yf.iter().map(|&v| v.exp()).collect();
        prop_assert_eq!(kendall_tau(&gx, &gy).unwrap(), tau);
    }

    #[test]
    fn marginals_are_the_inverse_rank_ecdf(ranks in (1usize..120).prop_flat_map(permutation)) {
        let m = ranks.len();
        let u = normalize_ranks(&ranks).unwrap();
        // Multiset of scores is exactly {k/(m+1)}.
        let mut sorted = u.clone();
        sorted.sort_by(f64::total_cmp);
        for (k, &v) in sorted.iter().enumerate() {
            prop_assert_eq!(v, (k + 1) as f64 / (m + 1) as f64);
        }
        // Strictly decreasing in rank, never touching 0 or 1.
        for i in 0..m {
            prop_assert!(u[i] > 0.0 && u[i] < 1.0);
            for j in 0..m {
                if ranks[i] < ranks[j] {
                    prop_assert!(u[i] > u[j]);
                }
            }
        }
    }

    #[test]
    fn kernels_monotone_in_each_argument(
        u in 0.05f64..0.9,
        v in 0.05f64..0.9,
        // Above theta ~ 8 the smaller score dominates the generator sum by
        // more than 2^52, and a 1e-4 perturbation of the other argument
        // drops below one ulp: the kernel is flat in f64 there, so strict
        // inequality is only testable in the resolvable range.
        theta_g in 0.2f64..8.0,
        frac in 0.05f64..1.0,
    ) {
        let delta = 1e-4;
        let tunables = Tunables::default();
        for kernel in [
            FusionKernel::Clayton,
            FusionKernel::Gumbel,
            FusionKernel::PowerFunction,
            FusionKernel::ExpLog,
        ] {
            let tg = match kernel.family() {
                nestfuse::KernelFamily::Clayton => theta_g,
                nestfuse::KernelFamily::Gumbel => theta_g.max(1.0),
            };
            let params = if kernel.is_copula() {
                KernelParams::copula(tg)
            } else {
                KernelParams { theta_g: tg, theta_p: (tg * frac).max(tunables.epsilon_p) }
            };
            let base = kernel.evaluate(u, v, params).unwrap();
            prop_assert!(base > 0.0 && base <= 1.0);
            prop_assert!(kernel.evaluate(u + delta, v, params).unwrap() > base);
            prop_assert!(kernel.evaluate(u, v + delta, params).unwrap() > base);
            prop_assert_eq!(kernel.evaluate(v, u, params).unwrap(), base);
        }
    }

    #[test]
    fn composition_kernels_reduce_to_copulas(
        u in 0.01f64..0.99,
        v in 0.01f64..0.99,
        theta in 0.1f64..40.0,
    ) {
        let params = KernelParams::copula(theta);
        prop_assert_eq!(
            f_pf(u, v, params).unwrap(),
            nestfuse::kernel::clayton(u, v, theta).unwrap()
        );
        if theta >= 1.0 {
            prop_assert_eq!(
                f_el(u, v, params).unwrap(),
                nestfuse::kernel::gumbel(u, v, theta).unwrap()
            );
        }
    }
}

fn run_from_order(system: &str, qid: &str, docs: &[String]) -> String {
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            format!(
                "{qid} Q0 {d} {} {} {system}",
                i + 1,
                (docs.len() - i) as f64
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn doc_orders(n_lists: usize, m: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    let docs: Vec<String> = (0..m).map(|j| format!("D{j:03}")).collect();
    proptest::collection::vec(Just(docs).prop_shuffle(), n_lists)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn run_parsing_round_trips(orders in doc_orders(1, 12)) {
        let content = run_from_order("sys", "Q1", &orders[0]);
        let parsed = RunList::parse_str(&content, "prop").unwrap();
        let reparsed = RunList::parse_str(&parsed.to_run_format(), "prop2").unwrap();
        prop_assert_eq!(parsed, reparsed);
    }

    #[test]
    fn universe_build_is_deterministic(orders in doc_orders(3, 8)) {
        let runs: Vec<RunList> = orders
            .iter()
            .enumerate()
            .map(|(i, order)| {
                // Each run retrieves a prefix, so universes need padding.
                let prefix = &order[..(3 + i * 2).min(order.len())];
                RunList::parse_str(&run_from_order(&format!("s{i}"), "Q1", prefix), "p")
                    .unwrap()
            })
            .collect();
        let a = build_universe(&runs, "Q1").unwrap();
        let b = build_universe(&runs, "Q1").unwrap();
        prop_assert_eq!(&a, &b);
        for s in 0..a.systems.len() {
            let mut ranks = a.ranks(s).to_vec();
            ranks.sort_unstable();
            let expected: Vec<u32> = (1..=a.m() as u32).collect();
            prop_assert_eq!(ranks, expected);
        }
    }

    #[test]
    fn nested_fusion_is_permutation_invariant(
        orders in doc_orders(4, 7),
        rotate in 0usize..4,
    ) {
        let runs: Vec<RunList> = orders
            .iter()
            .enumerate()
            .map(|(i, order)| {
                RunList::parse_str(&run_from_order(&format!("s{i}"), "Q1", order), "p").unwrap()
            })
            .collect();
        let tunables = Tunables::default();

        let universe = build_universe(&runs, "Q1").unwrap();
        let tables = tables_for_universe(&universe).unwrap();
        let (fused_a, trace_a) =
            nested_fuse(&universe, &tables, FusionKernel::Gumbel, None, &tunables).unwrap();

        let mut shuffled = runs.clone();
        shuffled.rotate_left(rotate);
        shuffled.swap(0, 1);
        let universe_b = build_universe(&shuffled, "Q1").unwrap();
        let tables_b = tables_for_universe(&universe_b).unwrap();
        let (fused_b, trace_b) =
            nested_fuse(&universe_b, &tables_b, FusionKernel::Gumbel, None, &tunables).unwrap();

        prop_assert_eq!(fused_a, fused_b);
        prop_assert_eq!(trace_a.cycles, trace_b.cycles);
    }

    #[test]
    fn baselines_are_permutation_invariant(orders in doc_orders(3, 6), rotate in 0usize..3) {
        let runs: Vec<RunList> = orders
            .iter()
            .enumerate()
            .map(|(i, order)| {
                let prefix = &order[..4.min(order.len())];
                RunList::parse_str(&run_from_order(&format!("s{i}"), "Q1", prefix), "p")
                    .unwrap()
            })
            .collect();
        let universe = build_universe(&runs, "Q1").unwrap();
        let tables = tables_for_universe(&universe).unwrap();

        let mut shuffled = runs.clone();
        shuffled.rotate_left(rotate);
        let universe_b = build_universe(&shuffled, "Q1").unwrap();
        let tables_b = tables_for_universe(&universe_b).unwrap();

        prop_assert_eq!(
            comb_mnz(&universe, &tables).unwrap(),
            comb_mnz(&universe_b, &tables_b).unwrap()
        );
        prop_assert_eq!(isr(&universe).unwrap(), isr(&universe_b).unwrap());
        prop_assert_eq!(
            rbc(&universe, 0.98).unwrap(),
            rbc(&universe_b, 0.98).unwrap()
        );
        for entry in &comb_mnz(&universe, &tables).unwrap().entries {
            prop_assert!(entry.score >= 0.0);
        }
    }

    #[test]
    fn dominating_documents_never_rank_below(
        orders in doc_orders(3, 9),
        kernel_pick in 0usize..4,
    ) {
        let kernel = [
            FusionKernel::Clayton,
            FusionKernel::Gumbel,
            FusionKernel::PowerFunction,
            FusionKernel::ExpLog,
        ][kernel_pick];
        let runs: Vec<RunList> = orders
            .iter()
            .enumerate()
            .map(|(i, order)| {
                RunList::parse_str(&run_from_order(&format!("s{i}"), "Q1", order), "p").unwrap()
            })
            .collect();
        let universe = build_universe(&runs, "Q1").unwrap();
        let tables = tables_for_universe(&universe).unwrap();
        // Equal relevance for every document isolates the score monotonicity.
        let relevance = Relevance::Fixed(0.6);
        let (fused, _) = nested_fuse(
            &universe,
            &tables,
            kernel,
            Some(&relevance),
            &Tunables::default(),
        )
        .unwrap();

        let score_of = |doc: &str| {
            fused
                .entries
                .iter()
                .find(|e| e.doc_id == doc)
                .unwrap()
                .score
        };
        for a in 0..universe.m() {
            for b in 0..universe.m() {
                let dominates = (0..tables.len())
                    .all(|s| tables[s].scores[a] > tables[s].scores[b]);
                if dominates {
                    prop_assert!(
                        score_of(&universe.docs[a]) >= score_of(&universe.docs[b]),
                        "dominating {} scored below {}",
                        universe.docs[a],
                        universe.docs[b]
                    );
                }
            }
        }
    }

    #[test]
    fn nested_fuse_is_deterministic(orders in doc_orders(3, 8)) {
        let runs: Vec<RunList> = orders
            .iter()
            .enumerate()
            .map(|(i, order)| {
                RunList::parse_str(&run_from_order(&format!("s{i}"), "Q1", order), "p").unwrap()
            })
            .collect();
        let universe = build_universe(&runs, "Q1").unwrap();
        let tables = tables_for_universe(&universe).unwrap();
        let relevance = Relevance::Estimated {
            query_length: 3,
            match_counts: (0..universe.m() as u32).map(|j| j % 4).collect(),
        };
        let tunables = Tunables::default();
        let first = nested_fuse(&universe, &tables, FusionKernel::ExpLog, Some(&relevance), &tunables)
            .unwrap();
        let second = nested_fuse(&universe, &tables, FusionKernel::ExpLog, Some(&relevance), &tunables)
            .unwrap();
        prop_assert_eq!(first, second);
    }
}

/// The marginal construction line by line: one fused cycle of two identical
/// rankings keeps the identical order for every kernel.
#[test]
fn identical_tables_fuse_to_input_order() {
    let docs: Vec<String> = (0..10).map(|j| format!("D{j:02}")).collect();
    let a = RunList::parse_str(&run_from_order("a", "Q1", &docs), "p").unwrap();
    let b = RunList::parse_str(&run_from_order("b", "Q1", &docs), "p").unwrap();
    let universe = build_universe(&[a, b], "Q1").unwrap();
    let tables = tables_for_universe(&universe).unwrap();
    for kernel in [
        FusionKernel::Clayton,
        FusionKernel::Gumbel,
        FusionKernel::PowerFunction,
        FusionKernel::ExpLog,
    ] {
        let relevance = Relevance::Fixed(1.0);
        let (fused, _) = nested_fuse(
            &universe,
            &tables,
            kernel,
            Some(&relevance),
            &Tunables::default(),
        )
        .unwrap();
        let got: Vec<&str> = fused.entries.iter().map(|e| e.doc_id.as_str()).collect();
        let expected: Vec<&str> = docs.iter().map(String::as_str).collect();
        assert_eq!(got, expected, "{kernel:?}");
    }
}

/// Tie handling in later cycles: lists built to produce equal fused scores
/// still order deterministically by document id.
#[test]
fn equal_scores_break_ties_by_doc_id() {
    // Two lists that are reverses of each other: every document ends up with
    // the same (u, v) multiset {u, 1-ish mirror}, so many fused scores tie.
    let docs: Vec<String> = (0..5).map(|j| format!("D{j}")).collect();
    let mut reversed = docs.clone();
    reversed.reverse();
    let a = RunList::parse_str(&run_from_order("a", "Q1", &docs), "p").unwrap();
    let b = RunList::parse_str(&run_from_order("b", "Q1", &reversed), "p").unwrap();
    let universe = build_universe(&[a, b], "Q1").unwrap();
    let tables = tables_for_universe(&universe).unwrap();
    let (fused, _) = nested_fuse(
        &universe,
        &tables,
        FusionKernel::Gumbel,
        None,
        &Tunables::default(),
    )
    .unwrap();
    // Mirror pairs (D0, D4) and (D1, D3) tie; ties resolve ascending by id.
    let pos = |d: &str| fused.entries.iter().position(|e| e.doc_id == d).unwrap();
    assert!(pos("D0") < pos("D4"));
    assert!(pos("D1") < pos("D3"));
    for w in fused.entries.windows(2) {
        if w[0].score == w[1].score {
            assert!(w[0].doc_id < w[1].doc_id);
        }
    }
}

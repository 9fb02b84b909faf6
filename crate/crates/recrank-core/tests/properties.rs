//! Property tests for structural invariants: probability vectors sum to
//! one, rankers emit permutations in sorted order, metrics stay bounded,
//! and the listwise parser inverts rendered rankings.

use proptest::prelude::*;
use recrank_core::dataset::Catalog;
use recrank_core::eval;
use recrank_core::ids::{ItemId, UserId};
use recrank_core::parse::{self, ParseStatus};
use recrank_core::ranker::{self, UtilityWeights};
use recrank_core::ranklist::{Phase, RankingList};
use recrank_core::sampling;
use std::collections::{BTreeMap, BTreeSet};

proptest! {
    #[test]
    fn importance_probabilities_form_a_distribution(
        counts in prop::collection::btree_map(0usize..40, 1usize..500, 2..30)
    ) {
        let counts: BTreeMap<UserId, usize> = counts
            .into_iter()
            .map(|(u, c)| (UserId::new(format!("u{u}")), c))
            .collect();
        let probs = sampling::importance_probabilities(&counts).unwrap();
        let total: f64 = probs.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for p in probs.values() {
            prop_assert!(*p > 0.0 && *p <= 1.0);
        }
    }

    #[test]
    fn penalty_probabilities_form_a_distribution(
        reps in prop::collection::vec(1usize..6, 2..15),
        c in 0.05f64..0.95
    ) {
        let mut merged = sampling::SampledUserSet::default();
        for (i, r) in reps.iter().enumerate() {
            for _ in 0..*r {
                merged.draws.push(UserId::new(format!("u{i}")));
            }
        }
        let probs = sampling::penalty_probabilities(&merged, c).unwrap();
        let total: f64 = probs.values().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hybrid_combine_emits_a_sorted_permutation(
        rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..12),
        a1 in 0.01f64..1.0,
        a2 in 0.01f64..1.0,
        a3 in 0.01f64..1.0
    ) {
        // normalize three free parameters into a valid weight simplex point
        let s = a1 + a2 + a3;
        let w = UtilityWeights {
            alpha_point: a1 / s,
            alpha_pair: a2 / s,
            alpha_list: a3 / s,
            ..UtilityWeights::default()
        };
        let inputs: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, (up, upair, ul))| {
                (ItemId::new(format!("i{i:02}")), i + 1, rows.len() - i, *up, *upair, *ul)
            })
            .collect();
        let out = ranker::hybrid_combine(&inputs, &w).unwrap();
        prop_assert_eq!(out.len(), inputs.len());
        let in_ids: BTreeSet<_> = inputs.iter().map(|r| r.0.clone()).collect();
        let out_ids: BTreeSet<_> = out.iter().map(|r| r.item_id.clone()).collect();
        prop_assert_eq!(in_ids, out_ids);
        for pair in out.windows(2) {
            prop_assert!(pair[0].u_hybrid >= pair[1].u_hybrid - 1e-12);
        }
    }

    #[test]
    fn metrics_stay_bounded_and_consistent(
        len in 1usize..10,
        pos in 0usize..12,
        k in 1usize..8
    ) {
        let ranking: Vec<ItemId> = (0..len).map(|i| ItemId::new(format!("x{i}"))).collect();
        let truth = if pos < len {
            ranking[pos].clone()
        } else {
            ItemId::new("absent")
        };
        let hr = eval::hit_ratio_at_k(&ranking, &truth, k);
        let ndcg = eval::ndcg_at_k(&ranking, &truth, k);
        prop_assert!(hr == 0.0 || hr == 1.0);
        prop_assert!((0.0..=1.0).contains(&ndcg));
        prop_assert_eq!(hr > 0.0, ndcg > 0.0);
    }

    #[test]
    fn listwise_parser_inverts_rendered_permutations(perm in prop::sample::subsequence(
        (0usize..8).collect::<Vec<_>>(), 2..8
    )) {
        // a clean numbered rendering of any candidate permutation parses
        // back to exactly that permutation
        let mut catalog = Catalog::new();
        let items: Vec<ItemId> = (0..8).map(|i| ItemId::new(format!("i{i}"))).collect();
        for (i, it) in items.iter().enumerate() {
            catalog.insert(it.clone(), format!("Wholly Distinct Title {i} ({})", 1990 + i));
        }
        let chosen: Vec<ItemId> = perm.iter().map(|&i| items[i].clone()).collect();
        let list = RankingList {
            user_id: UserId::new("u"),
            items: chosen.clone(),
            phase: Phase::Infer,
            positives: BTreeSet::new(),
            hint_order: chosen.clone(),
            gold_order: Vec::new(),
        };
        let mut shuffled = chosen.clone();
        shuffled.reverse();
        let raw = shuffled
            .iter()
            .enumerate()
            .map(|(i, it)| format!("{}. {}", i + 1, catalog.title(it).unwrap()))
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = parse::parse_listwise(&raw, &list, &catalog).unwrap();
        prop_assert_eq!(parsed.status, ParseStatus::Ok);
        prop_assert_eq!(parsed.ranking, shuffled);
    }
}

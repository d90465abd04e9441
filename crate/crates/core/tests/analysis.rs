mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use simaudit_core::analysis::{
    between_model_matrix, pearson, per_class_rbo, predicate_importance, spearman, ClassMeansCell, PredicateHops,
};
use simaudit_core::embedding::{all_embedding_neighbors, EmbeddingMatrix};
use simaudit_core::kg::build_graph;
use simaudit_core::neighborhood::NeighborhoodOptions;
use simaudit_core::{ClassId, Hop, NeighborhoodSets};

/// Tie-free Spearman through the squared rank-difference formula.
fn spearman_by_rank_differences(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in order.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn distinct_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::sample::subsequence((0..200).map(f64::from).collect::<Vec<_>>(), len).prop_shuffle()
}

proptest! {
    #[test]
    fn spearman_agrees_with_rank_difference_formula(
        (x, y) in (3usize..40).prop_flat_map(|n| (distinct_values(n), distinct_values(n)))
    ) {
        let r = spearman(&x, &y).unwrap();
        prop_assert!((r - spearman_by_rank_differences(&x, &y)).abs() < 1e-9);
        prop_assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let reversed: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((spearman(&reversed, &y).unwrap() + r).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_symmetric_and_bounded(
        x in prop::collection::vec(-50.0f64..50.0, 3..30),
        noise in prop::collection::vec(-5.0f64..5.0, 30),
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| 0.5 * a + b).collect();
        if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn class_means_reconstruct_the_global_mean(
        labels in prop::collection::vec(0u32..5, 2..40),
        values in prop::collection::vec(0.0f64..=1.0, 40),
    ) {
        let n = labels.len();
        let triples: Vec<_> = (0..n)
            .map(|i| simaudit_core::kg::LabeledTriple::new(format!("e{i}"), "p", format!("e{}", (i + 1) % n)))
            .collect();
        let types: Vec<(String, String)> = labels.iter().enumerate().map(|(i, c)| (format!("e{i}"), format!("c{c}"))).collect();
        let (graph, _) = build_graph(&triples, &[], &[], &types);
        let per_entity = &values[..n];
        let rows = per_class_rbo(&graph, per_entity, "d", "m", 3, Hop::One).unwrap();
        let weighted: f64 = rows.iter().map(|r| r.mean_rbo * r.support as f64).sum();
        let global: f64 = per_entity.iter().sum::<f64>() / n as f64;
        prop_assert!((weighted / n as f64 - global).abs() < 1e-9);
        prop_assert_eq!(rows.iter().map(|r| r.support).sum::<usize>(), n);
        let ranks: Vec<usize> = rows.iter().map(|r| r.rank_within_model).collect();
        prop_assert_eq!(ranks, (1..=rows.len()).collect::<Vec<_>>());
    }
}

#[test]
fn predicate_weights_form_a_distribution() {
    let graph = common::random_kg(21, 150, 7, 700, 6);
    let sets = NeighborhoodSets::build(&graph, NeighborhoodOptions::default()).unwrap();
    let matrix = common::random_matrix(21, graph.num_entities(), 12);
    let lists = all_embedding_neighbors(&matrix, 10).unwrap();
    for hops in [PredicateHops::First, PredicateHops::Both] {
        for c in 0..graph.num_classes() as u32 {
            let table = predicate_importance(&graph, &sets, &lists, ClassId(c), "d", "m", 10, hops).unwrap();
            if table.shared_elements == 0 {
                assert!(table.weights.is_empty() && table.warning.is_some());
                continue;
            }
            let total: f64 = table.weights.iter().map(|w| w.weight).sum();
            assert!((total - 1.0).abs() < 1e-9, "class {c}: {total}");
            assert!(table.weights.iter().all(|w| w.weight > 0.0));
            assert!(table.weights.windows(2).all(|w| w[0].weight >= w[1].weight));
            let counted: u64 = table.weights.iter().map(|w| w.count).sum();
            let per_element = if hops == PredicateHops::Both { 2 } else { 1 };
            assert_eq!(counted, table.shared_elements * per_element);
        }
    }
}

#[test]
fn people_are_explained_by_residence_and_friendship() {
    let graph = common::bob_julie();
    let sets = NeighborhoodSets::build(&graph, NeighborhoodOptions::default()).unwrap();
    let n = graph.num_entities();
    let mut rows = vec![vec![0.0; n + 2]; n];
    for (e, row) in rows.iter_mut().enumerate() {
        row[e + 2] = 1.0;
    }
    for (label, x, y) in [
        ("Bob", 1.0, 0.05),
        ("Julie", 1.0, 0.1),
        ("Anna", 0.05, 1.0),
        ("Roger", 0.1, 1.0),
    ] {
        let row = &mut rows[common::id(&graph, label).index()];
        row.iter_mut().for_each(|v| *v = 0.0);
        row[0] = x;
        row[1] = y;
    }
    let lists = all_embedding_neighbors(&EmbeddingMatrix::from_rows(rows).unwrap(), 3).unwrap();
    let person = graph.class_id("Person").unwrap();
    let table = predicate_importance(&graph, &sets, &lists, person, "toy", "m", 1, PredicateHops::First).unwrap();
    assert_eq!(table.pairs, 4);
    assert_eq!(table.shared_elements, 8);
    let weights: Vec<(&str, f64, u64)> = table
        .weights
        .iter()
        .map(|w| (w.predicate.as_str(), w.weight, w.count))
        .collect();
    assert_eq!(weights, vec![("friend", 0.5, 4), ("livesIn", 0.5, 4)]);

    let both = predicate_importance(&graph, &sets, &lists, person, "toy", "m", 1, PredicateHops::Both).unwrap();
    let counts: BTreeMap<&str, u64> = both.weights.iter().map(|w| (w.predicate.as_str(), w.count)).collect();
    assert_eq!(counts["livesIn"], 4);
    assert_eq!(counts["inCountry"], 2);
    assert_eq!(counts["staffMember"], 2);
    assert_eq!(counts["plays"], 2);
}

#[test]
fn model_matrix_is_symmetric_with_unit_diagonal() {
    let mut rng = common::rng(4);
    let cells: Vec<ClassMeansCell> = (0..6)
        .map(|_| {
            ["A", "B", "C"]
                .iter()
                .map(|m| {
                    let means = (0..8)
                        .map(|c| (format!("c{c}"), rand::Rng::gen_range(&mut rng, 0.0..1.0)))
                        .collect();
                    (m.to_string(), means)
                })
                .collect()
        })
        .collect();
    let matrix = between_model_matrix(Hop::Two, &cells);
    assert_eq!(matrix.models, vec!["A", "B", "C"]);
    for i in 0..3 {
        assert_eq!(matrix.values[i][i], Some(1.0));
        for j in 0..3 {
            let (a, b) = (matrix.values[i][j].unwrap(), matrix.values[j][i].unwrap());
            assert!((a - b).abs() <= 1e-12);
            assert_eq!(matrix.cells_used[i][j], 6);
        }
    }
}

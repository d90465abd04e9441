mod common;

use std::fs;
use std::path::Path;

use common::ModelFixture;
use simaudit_core::analysis::report::{diff_reports, emit_report, Report};
use simaudit_core::config::RunConfig;
use simaudit_core::neighborhood::NeighborhoodOptions;
use simaudit_core::pipeline::{self, run_report, DatasetRun};
use simaudit_core::{Hop, NeighborhoodSets};

fn three_dataset_config(dir: &Path) -> RunConfig {
    let mut datasets = Vec::new();
    for (i, (entities, triples)) in [(60, 300), (80, 500), (50, 200)].into_iter().enumerate() {
        let graph = common::random_kg(100 + i as u64, entities, 5, triples, 4);
        let a = common::random_matrix(200 + i as u64, graph.num_entities(), 8);
        let b = common::random_matrix(300 + i as u64, graph.num_entities(), 8);
        let ranks = |offset: usize| Some((1..=20).map(|r| ((r * (i + 2) + offset) % 17 + 1) as f64).collect());
        datasets.push(common::write_dataset(
            dir,
            &format!("ds{i}"),
            &graph,
            &[
                ModelFixture {
                    name: "A",
                    matrix: &a,
                    ranks: ranks(0),
                },
                ModelFixture {
                    name: "B",
                    matrix: &b,
                    ranks: ranks(5),
                },
            ],
        ));
    }
    let mut cfg =
        RunConfig::from_json(r#"{"datasets": [], "k": [3, 10], "n": 10, "predicate_importance_k": [3]}"#).unwrap();
    cfg.datasets = datasets;
    cfg.out = dir.join("out");
    cfg
}

fn bundle(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn report_bundle_is_reproducible_with_and_without_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = three_dataset_config(tmp.path());
    cfg.validate(true).unwrap();
    let cache = tmp.path().join("cache");

    let cold = run_report(&cfg, None).unwrap();
    let warm_fill = run_report(&cfg, Some(&cache)).unwrap();
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 3);
    let warm = run_report(&cfg, Some(&cache)).unwrap();
    assert_eq!(cold, warm_fill);
    assert_eq!(cold, warm);

    emit_report(&cold, &tmp.path().join("r1")).unwrap();
    emit_report(&warm, &tmp.path().join("r2")).unwrap();
    let (b1, b2) = (bundle(&tmp.path().join("r1")), bundle(&tmp.path().join("r2")));
    assert_eq!(b1.len(), 6);
    assert_eq!(b1, b2);

    let reloaded = Report::load(&tmp.path().join("r1/report.json")).unwrap();
    assert_eq!(reloaded, cold);
    assert!(diff_reports(&cold, &reloaded, 0.0).is_empty());
}

#[test]
fn report_contents_follow_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = three_dataset_config(tmp.path());
    let report = run_report(&cfg, None).unwrap();

    assert_eq!(report.global.len(), 6);
    assert_eq!(report.model_correlations.len(), 2);
    assert_eq!(report.mrr_rbo.len(), 2 * 2 * 2);
    assert!(report.mrr_rbo.iter().all(|r| r.datasets.len() == 3));
    assert!(report
        .mrr_rbo
        .iter()
        .all(|r| r.pearson.is_some_and(|p| (-1.0..=1.0).contains(&p))));
    assert!(report.metadata.datasets.iter().all(|d| d.content_hash.len() == 64));

    let ds = &cfg.datasets[0];
    let run = DatasetRun::prepare(ds, &cfg, None).unwrap();
    let audit = run.audit_model("A", &ds.models["A"], &cfg).unwrap();
    let row = report
        .global
        .iter()
        .find(|g| g.dataset == "ds0" && g.model == "A")
        .unwrap();
    for hop in Hop::BOTH {
        for k in [3, 10] {
            let per_entity = &audit.per_entity[&(hop, k)];
            let mean = per_entity.iter().sum::<f64>() / per_entity.len() as f64;
            assert!((row.rbo(hop, k).unwrap() - mean).abs() < 1e-12);
        }
    }
    let expected_mrr = (1..=20usize).map(|r| 1.0 / ((r * 2) % 17 + 1) as f64).sum::<f64>() / 20.0;
    assert!((row.mrr.unwrap() - expected_mrr).abs() < 1e-12);
    assert_eq!(row.rank_records, Some(20));
}

#[test]
fn graph_lists_can_stand_in_for_embedding_lists() {
    let graph = common::bob_julie();
    let sets = NeighborhoodSets::build(&graph, NeighborhoodOptions::default()).unwrap();
    let n = graph.num_entities() - 1;
    let lists = pipeline::graph_neighbor_lists(&sets, &Hop::BOTH, n).unwrap();
    for hop in Hop::BOTH {
        let single = std::collections::BTreeMap::from([(hop, lists[&hop].clone())]);
        let values = pipeline::per_entity_rbo(&lists[&hop], &single, &[1, 3, n]).unwrap();
        assert!(values.values().flatten().all(|&v| v == 1.0));
    }
}

#[test]
fn indicator_embeddings_reproduce_graph_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let graph = common::regular_likes();
    let matrix = common::one_hop_indicators(&graph);
    let ds = common::write_dataset(
        tmp.path(),
        "likes",
        &graph,
        &[ModelFixture {
            name: "ind",
            matrix: &matrix,
            ranks: None,
        }],
    );
    let mut cfg =
        RunConfig::from_json(r#"{"datasets": [], "k": [3, 10], "n": 11, "hops": [1], "predicate_importance_k": []}"#)
            .unwrap();
    cfg.datasets = vec![ds];
    let report = run_report(&cfg, None).unwrap();
    let row = &report.global[0];
    assert_eq!(row.rbo(Hop::One, 3), Some(1.0));
    assert_eq!(row.rbo(Hop::One, 10), Some(1.0));
    assert!(report.per_class.iter().all(|r| r.mean_rbo == 1.0));
    assert_eq!(row.mrr, None);
}

#[test]
fn stale_and_corrupt_caches_are_rebuilt() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    let cfg = three_dataset_config(tmp.path());
    let ds_cfg = &cfg.datasets[0];
    let options = NeighborhoodOptions::default();

    let data = pipeline::load_dataset(ds_cfg).unwrap();
    let fresh = NeighborhoodSets::build(&data.graph, options).unwrap();
    assert_eq!(pipeline::neighborhoods(&data, options, Some(&cache)).unwrap(), fresh);
    let cached: Vec<_> = fs::read_dir(&cache).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(cached.len(), 1);
    assert_eq!(pipeline::neighborhoods(&data, options, Some(&cache)).unwrap(), fresh);

    fs::write(&cached[0], b"KGNH1 garbage").unwrap();
    assert_eq!(pipeline::neighborhoods(&data, options, Some(&cache)).unwrap(), fresh);

    let mut train = fs::read_to_string(&ds_cfg.train).unwrap();
    train.push_str("e0\tp0\te1\ne1\tpNew\te2\n");
    fs::write(&ds_cfg.train, train).unwrap();
    let changed = pipeline::load_dataset(ds_cfg).unwrap();
    assert_ne!(changed.content_hash, data.content_hash);
    let rebuilt = pipeline::neighborhoods(&changed, options, Some(&cache)).unwrap();
    assert_eq!(rebuilt, NeighborhoodSets::build(&changed.graph, options).unwrap());
    assert_ne!(rebuilt, fresh);

    let backtracking = NeighborhoodOptions {
        include_backtracking: true,
    };
    let with_walks = pipeline::neighborhoods(&changed, backtracking, Some(&cache)).unwrap();
    assert_eq!(
        with_walks,
        NeighborhoodSets::build(&changed.graph, backtracking).unwrap()
    );
}

#[test]
fn diff_reports_flags_changed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = three_dataset_config(tmp.path());
    let left = run_report(&cfg, None).unwrap();
    let mut right = left.clone();
    right.global[0].mrr = right.global[0].mrr.map(|m| m + 0.01);
    right.per_class.pop();
    let diffs = diff_reports(&left, &right, 1e-9);
    assert_eq!(diffs.len(), 4, "{diffs:?}");
    assert!(diffs.iter().any(|d| d.table == "global" && d.key.ends_with("mrr")));
    assert_eq!(
        diffs
            .iter()
            .filter(|d| d.table == "per_class_rbo" && d.right.is_none())
            .count(),
        3
    );
    assert!(diff_reports(&left, &right, 0.02).len() == 3);
}

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simaudit_core::config::{DatasetConfig, ModelFiles};
use simaudit_core::embedding::EmbeddingMatrix;
use simaudit_core::kg::{build_graph, LabeledTriple, Split};
use simaudit_core::{EntityId, KnowledgeGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn graph_from(triples: &[(&str, &str, &str)], types: &[(&str, &str)]) -> KnowledgeGraph {
    let train: Vec<LabeledTriple> = triples.iter().map(|&(s, p, o)| LabeledTriple::new(s, p, o)).collect();
    let types: Vec<(String, String)> = types.iter().map(|&(e, c)| (e.to_owned(), c.to_owned())).collect();
    build_graph(&train, &[], &[], &types).0
}

/// Two people with a shared instrument, sibling cities in the same
/// country and region, and friends employed by the same company.
pub const BOB_JULIE: &[(&str, &str, &str)] = &[
    ("Bob", "plays", "Guitar"),
    ("Bob", "livesIn", "Mannheim"),
    ("Bob", "friend", "Anna"),
    ("Julie", "plays", "Guitar"),
    ("Julie", "livesIn", "Karlsruhe"),
    ("Julie", "friend", "Roger"),
    ("Mannheim", "inCountry", "Germany"),
    ("Mannheim", "inRegion", "Baden-Württemberg"),
    ("Karlsruhe", "inCountry", "Germany"),
    ("Karlsruhe", "inRegion", "Baden-Württemberg"),
    ("Vodafone", "staffMember", "Anna"),
    ("Vodafone", "staffMember", "Roger"),
    ("Anna", "hasHobby", "Chess"),
];

pub const BOB_JULIE_TYPES: &[(&str, &str)] = &[
    ("Bob", "Person"),
    ("Julie", "Person"),
    ("Anna", "Person"),
    ("Roger", "Person"),
    ("Mannheim", "City"),
    ("Karlsruhe", "City"),
    ("Germany", "Country"),
    ("Vodafone", "Company"),
];

pub fn bob_julie() -> KnowledgeGraph {
    graph_from(BOB_JULIE, BOB_JULIE_TYPES)
}

pub fn id(graph: &KnowledgeGraph, label: &str) -> EntityId {
    graph.entity_id(label).unwrap_or_else(|| panic!("no entity {label}"))
}

/// Uniform random graph; every entity label is used so ids are dense.
/// Each entity gets one or two of `classes` types.
pub fn random_kg(seed: u64, entities: usize, predicates: usize, triples: usize, classes: usize) -> KnowledgeGraph {
    let mut rng = rng(seed);
    let mut train = Vec::with_capacity(triples + entities);
    for e in 0..entities {
        let o = rng.gen_range(0..entities);
        train.push(LabeledTriple::new(
            format!("e{e}"),
            format!("p{}", rng.gen_range(0..predicates)),
            format!("e{o}"),
        ));
    }
    while train.len() < triples.max(entities) {
        let (s, o) = (rng.gen_range(0..entities), rng.gen_range(0..entities));
        train.push(LabeledTriple::new(
            format!("e{s}"),
            format!("p{}", rng.gen_range(0..predicates)),
            format!("e{o}"),
        ));
    }
    let mut types = Vec::new();
    if classes > 0 {
        for e in 0..entities {
            types.push((format!("e{e}"), format!("c{}", rng.gen_range(0..classes))));
            if rng.gen_bool(0.3) {
                types.push((format!("e{e}"), format!("c{}", rng.gen_range(0..classes))));
            }
        }
    }
    build_graph(&train, &[], &[], &types).0
}

pub fn random_matrix(seed: u64, n: usize, dim: usize) -> EmbeddingMatrix {
    let mut rng = rng(seed);
    let rows = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    EmbeddingMatrix::from_rows(rows).unwrap()
}

pub fn embedding_text(graph: &KnowledgeGraph, matrix: &EmbeddingMatrix) -> String {
    let mut out = format!("{} {}\n", matrix.n_entities(), matrix.dim());
    for e in 0..matrix.n_entities() {
        let id = EntityId(e as u32);
        out.push_str(graph.entity_label(id));
        out.push('\t');
        let row: Vec<String> = matrix.row(id).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn ranks_text(ranks: &[f64]) -> String {
    let mut out = String::from("# tie_policy=realistic protocol=filtered\n");
    for (i, r) in ranks.iter().enumerate() {
        let side = if i % 2 == 0 { "head" } else { "tail" };
        writeln!(out, "h{i}\tr\tt{i}\t{side}\t{r}\tfiltered").unwrap();
    }
    out
}

pub struct ModelFixture<'a> {
    pub name: &'a str,
    pub matrix: &'a EmbeddingMatrix,
    pub ranks: Option<Vec<f64>>,
}

/// Writes graph splits, types, embeddings and ranks under `dir` and
/// returns the matching dataset entry.
pub fn write_dataset(dir: &Path, name: &str, graph: &KnowledgeGraph, models: &[ModelFixture<'_>]) -> DatasetConfig {
    fs::create_dir_all(dir).unwrap();
    let train = dir.join(format!("{name}.train.tsv"));
    let mut buf = Vec::new();
    graph.write_split(Split::Train, &mut buf).unwrap();
    fs::write(&train, buf).unwrap();
    let types = dir.join(format!("{name}.types.tsv"));
    let mut buf = Vec::new();
    graph.write_types(&mut buf).unwrap();
    fs::write(&types, buf).unwrap();

    let mut files = BTreeMap::new();
    for m in models {
        let embeddings = dir.join(format!("{name}.{}.emb", m.name));
        fs::write(&embeddings, embedding_text(graph, m.matrix)).unwrap();
        let ranks = m.ranks.as_ref().map(|r| {
            let path = dir.join(format!("{name}.{}.ranks.tsv", m.name));
            fs::write(&path, ranks_text(r)).unwrap();
            path
        });
        files.insert(m.name.to_owned(), ModelFiles { embeddings, ranks });
    }
    DatasetConfig {
        name: name.to_owned(),
        train,
        valid: None,
        test: None,
        types: Some(types),
        models: files,
    }
}

/// Six people each liking three of six items (every item liked three
/// times), so all 1-hop sets have size 3.
pub fn regular_likes() -> KnowledgeGraph {
    let mut rows = Vec::new();
    for p in 0..6 {
        for d in [0, 1, 3] {
            rows.push((format!("P{p}"), "likes".to_owned(), format!("I{}", (p + d) % 6)));
        }
    }
    let rows: Vec<(&str, &str, &str)> = rows
        .iter()
        .map(|(s, p, o)| (s.as_str(), p.as_str(), o.as_str()))
        .collect();
    graph_from(
        &rows,
        &[
            ("P0", "Person"),
            ("P1", "Person"),
            ("P2", "Person"),
            ("I0", "Item"),
            ("I1", "Item"),
        ],
    )
}

/// Indicator vectors of 1-hop element sets. With equal set sizes, cosine
/// and Jaccard order candidates identically.
pub fn one_hop_indicators(graph: &KnowledgeGraph) -> EmbeddingMatrix {
    use simaudit_core::neighborhood::NeighborhoodOptions;
    let sets = simaudit_core::NeighborhoodSets::build(graph, NeighborhoodOptions::default()).unwrap();
    let mut dims: Vec<u64> = sets
        .universe(simaudit_core::Hop::One)
        .iter()
        .flatten()
        .copied()
        .collect();
    dims.sort_unstable();
    dims.dedup();
    let rows = sets
        .universe(simaudit_core::Hop::One)
        .iter()
        .map(|keys| {
            dims.iter()
                .map(|d| if keys.binary_search(d).is_ok() { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    EmbeddingMatrix::from_rows(rows).unwrap()
}

//! Python bindings for the audit toolkit.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use simaudit_core::analysis::report::{diff_reports as diff_core, emit_report, Report};
use simaudit_core::config::{DatasetConfig, RunConfig};
use simaudit_core::embedding::{self, EmbeddingMatrix};
use simaudit_core::kg::{build_graph, LabeledTriple};
use simaudit_core::neighborhood::{InvertedIndex, NeighborhoodOptions};
use simaudit_core::rank_metrics::RankRecord;
use simaudit_core::{analysis, pipeline, rank_metrics, rbo as rbo_core, similarity};
use simaudit_core::{EntityId, Hop, NeighborhoodSets};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn hop_of(hop: u8) -> PyResult<Hop> {
    Hop::try_from(hop).map_err(value_err)
}

/// List items accepted from Python: ints or strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, FromPyObject)]
enum Item {
    Int(i64),
    Str(String),
}

#[pyclass(name = "KnowledgeGraph", module = "kge_simaudit", frozen)]
struct PyGraph {
    graph: Arc<simaudit_core::KnowledgeGraph>,
    sets: NeighborhoodSets,
    indexes: [InvertedIndex; 2],
}

impl PyGraph {
    fn wrap(graph: simaudit_core::KnowledgeGraph, include_backtracking: bool) -> PyResult<Self> {
        let options = NeighborhoodOptions { include_backtracking };
        let sets = NeighborhoodSets::build(&graph, options).map_err(value_err)?;
        let indexes = [
            InvertedIndex::build(&sets, Hop::One),
            InvertedIndex::build(&sets, Hop::Two),
        ];
        Ok(Self {
            graph: Arc::new(graph),
            sets,
            indexes,
        })
    }

    fn entity(&self, label: &str) -> PyResult<EntityId> {
        self.graph
            .entity_id(label)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown entity {label:?}")))
    }
}

#[pymethods]
impl PyGraph {
    #[staticmethod]
    #[pyo3(signature = (triples, types = None, include_backtracking = false))]
    fn from_triples(
        triples: Vec<(String, String, String)>,
        types: Option<Vec<(String, String)>>,
        include_backtracking: bool,
    ) -> PyResult<Self> {
        let train: Vec<LabeledTriple> = triples
            .into_iter()
            .map(|(s, p, o)| LabeledTriple::new(s, p, o))
            .collect();
        let (graph, _) = build_graph(&train, &[], &[], &types.unwrap_or_default());
        Self::wrap(graph, include_backtracking)
    }

    /// Loads TSV splits from disk; only the train split feeds similarity.
    #[staticmethod]
    #[pyo3(signature = (train, valid = None, test = None, types = None, include_backtracking = false))]
    fn load(
        train: PathBuf,
        valid: Option<PathBuf>,
        test: Option<PathBuf>,
        types: Option<PathBuf>,
        include_backtracking: bool,
    ) -> PyResult<Self> {
        let cfg = DatasetConfig {
            name: "py".into(),
            train,
            valid,
            test,
            types,
            models: Default::default(),
        };
        let data = pipeline::load_dataset(&cfg).map_err(value_err)?;
        Self::wrap(data.graph, include_backtracking)
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.graph.num_entities()
    }

    #[getter]
    fn num_predicates(&self) -> usize {
        self.graph.num_predicates()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.graph.num_classes()
    }

    fn entities(&self) -> Vec<String> {
        self.graph.entities().labels().to_vec()
    }

    fn classes_of(&self, label: &str) -> PyResult<Vec<String>> {
        let e = self.entity(label)?;
        Ok(self
            .graph
            .classes_of(e)
            .iter()
            .map(|&c| self.graph.class_label(c).to_owned())
            .collect())
    }

    fn entities_of_class(&self, class: &str) -> PyResult<Vec<String>> {
        let c = self
            .graph
            .class_id(class)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown class {class:?}")))?;
        let members = self.graph.entities_of_class(c).map_err(value_err)?;
        Ok(members
            .into_iter()
            .map(|e| self.graph.entity_label(e).to_owned())
            .collect())
    }

    /// Human-readable neighbourhood elements of one entity.
    #[pyo3(signature = (label, hop = 1))]
    fn elements(&self, label: &str, hop: u8) -> PyResult<Vec<String>> {
        let e = self.entity(label)?;
        Ok(self
            .sets
            .elements(hop_of(hop)?, e)
            .map(|el| el.describe(&self.graph))
            .collect())
    }

    #[pyo3(signature = (a, b, hop = 1))]
    fn jaccard(&self, a: &str, b: &str, hop: u8) -> PyResult<f64> {
        let hop = hop_of(hop)?;
        Ok(similarity::jaccard(
            self.sets.keys(hop, self.entity(a)?),
            self.sets.keys(hop, self.entity(b)?),
        ))
    }

    /// Top-`n` graph neighbours as `(label, score)` pairs.
    #[pyo3(signature = (label, n, hop = 1))]
    fn neighbors(&self, label: &str, n: usize, hop: u8) -> PyResult<Vec<(String, f64)>> {
        let hop = hop_of(hop)?;
        let index = &self.indexes[hop.as_u8() as usize - 1];
        let list =
            similarity::top_n_graph_neighbors(self.entity(label)?, &self.sets, index, n, hop).map_err(value_err)?;
        Ok(list
            .entries
            .iter()
            .map(|nb| (self.graph.entity_label(nb.entity).to_owned(), nb.score))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeGraph(entities={}, predicates={}, classes={})",
            self.graph.num_entities(),
            self.graph.num_predicates(),
            self.graph.num_classes()
        )
    }
}

#[pyclass(name = "Embeddings", module = "kge_simaudit", frozen)]
struct PyEmbeddings {
    graph: Arc<simaudit_core::KnowledgeGraph>,
    matrix: EmbeddingMatrix,
}

#[pymethods]
impl PyEmbeddings {
    /// Reads an embedding file aligned to `graph`'s entities.
    #[staticmethod]
    fn load(path: PathBuf, graph: &PyGraph) -> PyResult<Self> {
        let matrix = pipeline::load_model(&path, &graph.graph).map_err(value_err)?;
        Ok(Self {
            graph: graph.graph.clone(),
            matrix,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn zero_norm_entities(&self) -> Vec<String> {
        self.matrix
            .zero_rows()
            .iter()
            .map(|&e| self.graph.entity_label(e).to_owned())
            .collect()
    }

    fn neighbors(&self, label: &str, n: usize) -> PyResult<Vec<(String, f64)>> {
        let e = self
            .graph
            .entity_id(label)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown entity {label:?}")))?;
        let list = embedding::top_n_embedding_neighbors(e, &self.matrix, n).map_err(value_err)?;
        Ok(list
            .entries
            .iter()
            .map(|nb| (self.graph.entity_label(nb.entity).to_owned(), nb.score))
            .collect())
    }
}

/// Jaccard similarity of two collections treated as sets.
#[pyfunction]
fn jaccard(a: Vec<Item>, b: Vec<Item>) -> f64 {
    let norm = |mut v: Vec<Item>| {
        v.sort();
        v.dedup();
        v
    };
    similarity::jaccard(&norm(a), &norm(b))
}

/// RBO at persistence 1 over the first `k` items (default: full length).
#[pyfunction]
#[pyo3(signature = (s, t, k = None))]
fn rbo(s: Vec<Item>, t: Vec<Item>, k: Option<usize>) -> PyResult<f64> {
    let k = k.unwrap_or(s.len());
    rbo_core::rbo_at(&s, &t, k).map_err(value_err)
}

#[pyfunction]
fn agreement_at_depth(s: Vec<Item>, t: Vec<Item>, d: usize) -> PyResult<f64> {
    rbo_core::agreement_at_depth(&s, &t, d).map_err(value_err)
}

fn records(ranks: Vec<f64>) -> PyResult<Vec<RankRecord>> {
    if let Some(bad) = ranks.iter().find(|r| !r.is_finite() || **r < 1.0) {
        return Err(value_err(format!("ranks must be >= 1, got {bad}")));
    }
    Ok(ranks.into_iter().map(RankRecord::with_rank).collect())
}

#[pyfunction]
fn mrr(ranks: Vec<f64>) -> PyResult<f64> {
    rank_metrics::mrr(&records(ranks)?).map_err(value_err)
}

#[pyfunction]
fn hits_at(ranks: Vec<f64>, k: usize) -> PyResult<f64> {
    rank_metrics::hits_at(&records(ranks)?, k).map_err(value_err)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    analysis::spearman(&x, &y).map_err(value_err)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    analysis::pearson(&x, &y).map_err(value_err)
}

#[pyfunction]
fn cosine(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    embedding::cosine(&u, &v).map_err(value_err)
}

/// Runs the full pipeline for a JSON config file and returns the report
/// JSON. With `out`, the CSV/JSON bundle is also written there.
#[pyfunction]
#[pyo3(signature = (config, out = None))]
fn run_report(py: Python<'_>, config: PathBuf, out: Option<PathBuf>) -> PyResult<String> {
    py.detach(|| {
        let cfg = RunConfig::load(&config).map_err(value_err)?;
        cfg.validate(true).map_err(value_err)?;
        let report = pipeline::run_report(&cfg, pipeline::cache_dir(&cfg).as_deref()).map_err(value_err)?;
        if let Some(dir) = &out {
            emit_report(&report, dir).map_err(value_err)?;
        }
        report.to_json().map_err(value_err)
    })
}

type DiffRow = (String, String, Option<String>, Option<String>);

/// Differing cells between two `report.json` files as
/// `(table, key, left, right)` tuples.
#[pyfunction]
#[pyo3(signature = (left, right, tolerance = 0.0))]
fn diff_reports(left: PathBuf, right: PathBuf, tolerance: f64) -> PyResult<Vec<DiffRow>> {
    let load = |p: &Path| Report::load(p).map_err(value_err);
    Ok(diff_core(&load(&left)?, &load(&right)?, tolerance)
        .into_iter()
        .map(|d| (d.table, d.key, d.left, d.right))
        .collect())
}

#[pymodule]
fn kge_simaudit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", simaudit_core::VERSION)?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyEmbeddings>()?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(rbo, m)?)?;
    m.add_function(wrap_pyfunction!(agreement_at_depth, m)?)?;
    m.add_function(wrap_pyfunction!(mrr, m)?)?;
    m.add_function(wrap_pyfunction!(hits_at, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(run_report, m)?)?;
    m.add_function(wrap_pyfunction!(diff_reports, m)?)?;
    Ok(())
}

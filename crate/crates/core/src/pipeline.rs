//! End-to-end orchestration shared by the CLI and the Python bindings.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::report::{DatasetMeta, GlobalRboCell, GlobalRow, Report, ReportMetadata};
use crate::analysis::{
    between_model_matrix, mrr_rbo_pearson, per_class_rbo, predicate_importance, ClassMeansCell, MrrRboRow,
    PredicateHops, PredicateImportanceTable,
};
use crate::config::{DatasetConfig, ModelFiles, RunConfig};
use crate::embedding::{all_embedding_neighbors, load_embeddings, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::kg::{build_graph, parse_triples, parse_types, ClassId, EntityId, KnowledgeGraph, LoadReport};
use crate::neighborhood::{cache, Hop, InvertedIndex, NeighborhoodOptions, NeighborhoodSets};
use crate::rank_metrics::{parse_ranks, summarize, RankSummary};
use crate::rbo::rbo_at;
use crate::similarity::{all_graph_neighbors, write_neighbor_dump, RankedNeighborList};

/// Environment variable overriding the neighbourhood cache directory.
pub const CACHE_DIR_ENV: &str = "KGE_SIMAUDIT_CACHE_DIR";

pub const RANK_TIE_POLICY: &str = "as exported (the bundled exporter writes realistic, filtered ranks)";

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// A loaded dataset plus the hashes used for caching and report metadata.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub graph: KnowledgeGraph,
    pub load: LoadReport,
    pub train_hash: cache::ContentHash,
    pub content_hash: String,
}

pub fn load_dataset(cfg: &DatasetConfig) -> Result<LoadedDataset> {
    let mut content = Sha256::new();
    let mut read_split = |path: Option<&PathBuf>| -> Result<(Vec<u8>, Vec<crate::kg::LabeledTriple>)> {
        let Some(path) = path else {
            content.update(b"\0-");
            return Ok((Vec::new(), Vec::new()));
        };
        let bytes = read_file(path)?;
        content.update(b"\0+");
        content.update(&bytes);
        let triples = parse_triples(bytes.as_slice()).map_err(|e| Error::from(e).in_file(path))?;
        Ok((bytes, triples))
    };
    let (train_bytes, train) = read_split(Some(&cfg.train))?;
    let (_, valid) = read_split(cfg.valid.as_ref())?;
    let (_, test) = read_split(cfg.test.as_ref())?;
    let types = match &cfg.types {
        Some(path) => {
            let bytes = read_file(path)?;
            content.update(b"\0+");
            content.update(&bytes);
            parse_types(bytes.as_slice()).map_err(|e| Error::from(e).in_file(path))?
        }
        None => Vec::new(),
    };
    let (graph, load) = build_graph(&train, &valid, &test, &types);
    let train_hash: cache::ContentHash = Sha256::digest(&train_bytes).into();
    Ok(LoadedDataset {
        name: cfg.name.clone(),
        graph,
        load,
        train_hash,
        content_hash: hex::encode(content.finalize()),
    })
}

/// Cache location: `$KGE_SIMAUDIT_CACHE_DIR`, else `<out>/cache`.
pub fn cache_dir(cfg: &RunConfig) -> Option<PathBuf> {
    if !cfg.cache {
        return None;
    }
    Some(match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.out.join("cache"),
    })
}

fn cache_path(dir: &Path, ds: &LoadedDataset, options: NeighborhoodOptions) -> PathBuf {
    let tag = &hex::encode(ds.train_hash)[..16];
    let safe: String = ds
        .name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{safe}-{tag}-bt{}.kgnh", options.include_backtracking as u8))
}

/// Builds neighbourhood sets, reading and refreshing the cache when enabled.
pub fn neighborhoods(
    ds: &LoadedDataset,
    options: NeighborhoodOptions,
    cache_dir: Option<&Path>,
) -> Result<NeighborhoodSets> {
    let path = cache_dir.map(|d| cache_path(d, ds, options));
    if let Some(path) = &path {
        if let Ok(file) = fs::File::open(path) {
            match cache::read(
                std::io::BufReader::new(file),
                &ds.train_hash,
                options,
                ds.graph.num_entities(),
            ) {
                Ok(Some(sets)) => {
                    log::info!("neighbourhood cache hit: {}", path.display());
                    return Ok(sets);
                }
                Ok(None) => log::info!("stale neighbourhood cache: {}", path.display()),
                Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
            }
        }
    }
    let sets = NeighborhoodSets::build(&ds.graph, options)?;
    if let Some(path) = &path {
        let write = || -> std::io::Result<()> {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let tmp = path.with_extension("kgnh.tmp");
            cache::write(BufWriter::new(fs::File::create(&tmp)?), &sets, &ds.train_hash)?;
            fs::rename(&tmp, path)
        };
        if let Err(e) = write() {
            log::warn!("could not write neighbourhood cache {}: {e}", path.display());
        }
    }
    Ok(sets)
}

/// Top-`n` graph neighbours of every entity for each requested hop.
pub fn graph_neighbor_lists(
    sets: &NeighborhoodSets,
    hops: &[Hop],
    n: usize,
) -> Result<BTreeMap<Hop, Vec<RankedNeighborList>>> {
    let mut out = BTreeMap::new();
    for &hop in hops {
        let index = InvertedIndex::build(sets, hop);
        out.insert(hop, all_graph_neighbors(sets, &index, n, hop)?);
    }
    Ok(out)
}

pub fn load_model(path: &Path, graph: &KnowledgeGraph) -> Result<EmbeddingMatrix> {
    let bytes = read_file(path)?;
    load_embeddings(bytes.as_slice(), graph).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_rank_summary(path: &Path) -> Result<RankSummary> {
    let bytes = read_file(path)?;
    let records = parse_ranks(bytes.as_slice()).map_err(|e| Error::from(e).in_file(path))?;
    summarize(&records).map_err(|e| Error::from(e).in_file(path))
}

/// Per-entity RBO for every (hop, K), indexed by entity id.
pub type PerEntityRbo = BTreeMap<(Hop, usize), Vec<f64>>;

pub fn per_entity_rbo(
    embedding_lists: &[RankedNeighborList],
    graph_lists: &BTreeMap<Hop, Vec<RankedNeighborList>>,
    ks: &[usize],
) -> Result<PerEntityRbo> {
    let emb_ids: Vec<Vec<EntityId>> = embedding_lists.iter().map(RankedNeighborList::ids).collect();
    let mut out = BTreeMap::new();
    for (&hop, lists) in graph_lists {
        if lists.len() != emb_ids.len() {
            return Err(Error::Invariant(format!(
                "{} graph lists vs {} embedding lists",
                lists.len(),
                emb_ids.len()
            )));
        }
        let graph_ids: Vec<Vec<EntityId>> = lists.iter().map(RankedNeighborList::ids).collect();
        for &k in ks {
            let values = emb_ids
                .par_iter()
                .zip(&graph_ids)
                .map(|(s, t)| rbo_at(s, t, k))
                .collect::<Result<Vec<f64>, _>>()?;
            out.insert((hop, k), values);
        }
    }
    Ok(out)
}

/// Writes `entity<TAB>hop<TAB>K<TAB>rbo` rows, entity-major.
pub fn write_rbo_dump<W: Write>(mut w: W, graph: &KnowledgeGraph, values: &PerEntityRbo) -> std::io::Result<()> {
    for e in 0..graph.num_entities() {
        let label = graph.entity_label(EntityId(e as u32));
        for (&(hop, k), per_entity) in values {
            writeln!(w, "{label}\t{hop}\t{k}\t{}", per_entity[e])?;
        }
    }
    w.flush()
}

/// Everything computed for one dataset and model.
#[derive(Debug, Clone)]
pub struct ModelAudit {
    pub model: String,
    pub embedding_lists: Vec<RankedNeighborList>,
    pub per_entity: PerEntityRbo,
    pub rank_summary: Option<RankSummary>,
    pub zero_norm_entities: Vec<EntityId>,
}

impl ModelAudit {
    pub fn global_mean(&self, hop: Hop, k: usize) -> Option<f64> {
        self.per_entity
            .get(&(hop, k))
            .and_then(|v| crate::stats::mean(v.iter().copied()))
    }
}

/// Shared graph-side state for auditing any number of models on one dataset.
#[derive(Debug, Clone)]
pub struct DatasetRun {
    pub data: LoadedDataset,
    pub sets: NeighborhoodSets,
    pub graph_lists: BTreeMap<Hop, Vec<RankedNeighborList>>,
}

impl DatasetRun {
    pub fn prepare(cfg: &DatasetConfig, run: &RunConfig, cache_dir: Option<&Path>) -> Result<Self> {
        let data = load_dataset(cfg)?;
        let options = NeighborhoodOptions {
            include_backtracking: run.include_backtracking,
        };
        let sets = neighborhoods(&data, options, cache_dir)?;
        let graph_lists = graph_neighbor_lists(&sets, &run.hops, run.n)?;
        Ok(Self {
            data,
            sets,
            graph_lists,
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.data.graph
    }

    pub fn audit_model(&self, model: &str, files: &ModelFiles, run: &RunConfig) -> Result<ModelAudit> {
        let matrix = load_model(&files.embeddings, self.graph())?;
        self.audit_matrix(model, &matrix, files.ranks.as_deref(), run)
    }

    pub fn audit_matrix(
        &self,
        model: &str,
        matrix: &EmbeddingMatrix,
        ranks: Option<&Path>,
        run: &RunConfig,
    ) -> Result<ModelAudit> {
        let embedding_lists = all_embedding_neighbors(matrix, run.n)?;
        let per_entity = per_entity_rbo(&embedding_lists, &self.graph_lists, &run.k)?;
        let rank_summary = ranks.map(load_rank_summary).transpose()?;
        Ok(ModelAudit {
            model: model.to_owned(),
            embedding_lists,
            per_entity,
            rank_summary,
            zero_norm_entities: matrix.zero_rows().iter().copied().collect(),
        })
    }

    pub fn predicate_tables(
        &self,
        audit: &ModelAudit,
        ks: &[usize],
        hops: PredicateHops,
    ) -> Result<Vec<PredicateImportanceTable>> {
        let graph = self.graph();
        let classes: Vec<ClassId> = graph
            .class_members()
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_empty())
            .map(|(c, _)| ClassId(c as u32))
            .collect();
        let mut tables = Vec::new();
        for &k in ks {
            let mut batch = classes
                .par_iter()
                .map(|&c| {
                    predicate_importance(
                        graph,
                        &self.sets,
                        &audit.embedding_lists,
                        c,
                        &self.data.name,
                        &audit.model,
                        k,
                        hops,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            batch.sort_by(|a, b| a.class.cmp(&b.class));
            tables.append(&mut batch);
        }
        Ok(tables)
    }
}

/// Runs every analysis for every configured dataset and model.
pub fn run_report(cfg: &RunConfig, cache_dir: Option<&Path>) -> Result<Report> {
    let mut global = Vec::new();
    let mut per_class = Vec::new();
    let mut predicate = Vec::new();
    let mut datasets_meta = Vec::new();
    let mut warnings = Vec::new();
    // hop -> [(dataset, K) cell]
    let mut cells: BTreeMap<Hop, Vec<ClassMeansCell>> = BTreeMap::new();

    for ds_cfg in &cfg.datasets {
        let run = DatasetRun::prepare(ds_cfg, cfg, cache_dir)?;
        let graph = run.graph();
        let mut ds_cells: BTreeMap<(Hop, usize), ClassMeansCell> = BTreeMap::new();
        let mut zero_norm = BTreeMap::new();

        for (model, files) in &ds_cfg.models {
            log::info!("auditing {} / {model}", ds_cfg.name);
            let audit = run.audit_model(model, files, cfg)?;
            if !audit.zero_norm_entities.is_empty() {
                warnings.push(format!(
                    "{}/{model}: {} zero-norm embeddings",
                    ds_cfg.name,
                    audit.zero_norm_entities.len()
                ));
            }
            zero_norm.insert(
                model.clone(),
                audit
                    .zero_norm_entities
                    .iter()
                    .map(|&e| graph.entity_label(e).to_owned())
                    .collect(),
            );

            let mut rbo_cells = Vec::new();
            for (&(hop, k), values) in &audit.per_entity {
                rbo_cells.push(GlobalRboCell {
                    hop,
                    k,
                    mean_rbo: crate::stats::mean(values.iter().copied()).unwrap_or(0.0),
                });
                let rows = per_class_rbo(graph, values, &ds_cfg.name, model, k, hop)?;
                let cell = ds_cells.entry((hop, k)).or_default();
                cell.insert(
                    model.clone(),
                    rows.iter().map(|r| (r.class.clone(), r.mean_rbo)).collect(),
                );
                per_class.extend(rows);
            }
            let ranks = audit.rank_summary.as_ref();
            global.push(GlobalRow {
                dataset: ds_cfg.name.clone(),
                model: model.clone(),
                entities: graph.num_entities(),
                mrr: ranks.map(|r| r.mrr),
                hits_at_1: ranks.map(|r| r.hits_at_1),
                hits_at_3: ranks.map(|r| r.hits_at_3),
                hits_at_10: ranks.map(|r| r.hits_at_10),
                rank_records: ranks.map(|r| r.records),
                rbo: rbo_cells,
            });

            let tables = run.predicate_tables(&audit, &cfg.predicate_importance_k, cfg.predicate_hops)?;
            let empty = tables.iter().filter(|t| t.warning.is_some()).count();
            if empty > 0 {
                warnings.push(format!(
                    "{}/{model}: {empty} predicate-importance tables have no shared 2-hop elements",
                    ds_cfg.name
                ));
            }
            predicate.extend(tables);
        }

        for ((hop, _), cell) in ds_cells {
            cells.entry(hop).or_default().push(cell);
        }
        let empty_neighborhoods = Hop::BOTH
            .iter()
            .map(|&hop| {
                let count = run.sets.universe(hop).iter().filter(|s| s.is_empty()).count();
                (format!("hop{hop}"), count)
            })
            .collect();
        datasets_meta.push(DatasetMeta {
            name: ds_cfg.name.clone(),
            content_hash: run.data.content_hash.clone(),
            load: run.data.load.clone(),
            zero_norm_entities: zero_norm,
            empty_neighborhoods,
        });
    }

    let model_correlations = cells
        .iter()
        .filter(|(_, c)| !c.is_empty())
        .map(|(&hop, c)| between_model_matrix(hop, c))
        .collect();
    let mrr_rbo = mrr_rbo_table(&global, cfg);

    let mut config_value = serde_json::to_value(cfg).map_err(|e| Error::Invariant(e.to_string()))?;
    // absolute locations would make reports machine-dependent
    strip_paths(&mut config_value);
    let report = Report {
        metadata: ReportMetadata {
            version: crate::VERSION.to_owned(),
            config: config_value,
            datasets: datasets_meta,
            rank_tie_policy: RANK_TIE_POLICY.to_owned(),
        },
        global,
        per_class,
        model_correlations,
        mrr_rbo,
        predicate_importance: predicate,
        warnings,
    };
    if !report.has_analyses() {
        return Err(crate::analysis::AnalysisError::EmptyReport.into());
    }
    Ok(report)
}

fn strip_paths(value: &mut serde_json::Value) {
    if let Some(obj) = value.as_object_mut() {
        obj.remove("out");
        obj.remove("threads");
        if let Some(datasets) = obj.get_mut("datasets").and_then(|d| d.as_array_mut()) {
            for d in datasets {
                let Some(d) = d.as_object_mut() else { continue };
                for key in ["train", "valid", "test", "types"] {
                    if let Some(p) = d.get_mut(key) {
                        *p = file_name(p);
                    }
                }
                if let Some(models) = d.get_mut("models").and_then(|m| m.as_object_mut()) {
                    for files in models.values_mut().filter_map(|f| f.as_object_mut()) {
                        for p in files.values_mut() {
                            *p = file_name(p);
                        }
                    }
                }
            }
        }
    }
}

fn file_name(v: &serde_json::Value) -> serde_json::Value {
    v.as_str()
        .and_then(|s| Path::new(s).file_name())
        .map(|f| serde_json::Value::String(f.to_string_lossy().into_owned()))
        .unwrap_or_else(|| v.clone())
}

fn mrr_rbo_table(global: &[GlobalRow], cfg: &RunConfig) -> Vec<MrrRboRow> {
    let mut models: Vec<&str> = global.iter().map(|g| g.model.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    let mut rows = Vec::new();
    for model in models {
        for &hop in &cfg.hops {
            for &k in &cfg.k {
                let mut names = Vec::new();
                let (mut mrr, mut rbo) = (Vec::new(), Vec::new());
                for g in global.iter().filter(|g| g.model == model) {
                    if let (Some(m), Some(r)) = (g.mrr, g.rbo(hop, k)) {
                        names.push(g.dataset.clone());
                        mrr.push(m);
                        rbo.push(r);
                    }
                }
                let (pearson, note) = match mrr_rbo_pearson(&mrr, &rbo) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                rows.push(MrrRboRow {
                    model: model.to_owned(),
                    hop,
                    k,
                    datasets: names,
                    pearson,
                    note,
                });
            }
        }
    }
    rows
}

/// Writes `<dir>/<dataset>.load_report.json`.
pub fn write_load_report(dir: &Path, ds: &LoadedDataset) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}.load_report.json", ds.name));
    let mut text = serde_json::to_string_pretty(&ds.load).map_err(|e| Error::Invariant(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn write_neighbor_file(path: &Path, graph: &KnowledgeGraph, lists: &[RankedNeighborList]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_neighbor_dump(BufWriter::new(file), graph, lists).map_err(|e| Error::io(path, e))
}

pub fn write_rbo_file(path: &Path, graph: &KnowledgeGraph, values: &PerEntityRbo) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rbo_dump(BufWriter::new(file), graph, values).map_err(|e| Error::io(path, e))
}

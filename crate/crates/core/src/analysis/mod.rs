//! Per-class RBO tables, between-model rank correlations, MRR/RBO Pearson
//! correlations and predicate importance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{ClassId, KnowledgeGraph, PredicateId};
use crate::neighborhood::{Hop, HopElement, NeighborhoodSets};
use crate::similarity::RankedNeighborList;
use crate::stats::{compensated_sum, mean};

pub mod report;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} shared classes, found {found}")]
    InsufficientClasses { needed: usize, found: usize },
    #[error("need at least {needed} paired observations, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("series has zero variance; correlation is undefined")]
    ConstantSeries,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("class {0:?} has no entities")]
    EmptyClass(String),
    #[error("unknown class id {0}")]
    UnknownClass(u32),
    #[error("per-entity values cover {values} entities, graph has {entities}")]
    ValueCountMismatch { values: usize, entities: usize },
    #[error("nothing to report: no analysis was computed")]
    EmptyReport,
}

/// Mean RBO of one class for one (model, K, hop).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRboRow {
    pub dataset: String,
    pub class: String,
    pub model: String,
    pub k: usize,
    pub hop: Hop,
    pub mean_rbo: f64,
    /// 1-based rank of this class by descending mean within (model, K, hop).
    pub rank_within_model: usize,
    pub support: usize,
}

/// Class means of per-entity values. An entity counts once in every class
/// it belongs to; classes without members are omitted. Rows come back
/// ordered by rank.
pub fn per_class_rbo(
    graph: &KnowledgeGraph,
    per_entity: &[f64],
    dataset: &str,
    model: &str,
    k: usize,
    hop: Hop,
) -> Result<Vec<ClassRboRow>, AnalysisError> {
    if per_entity.len() != graph.num_entities() {
        return Err(AnalysisError::ValueCountMismatch {
            values: per_entity.len(),
            entities: graph.num_entities(),
        });
    }
    let mut rows: Vec<ClassRboRow> = graph
        .class_members()
        .into_iter()
        .enumerate()
        .filter(|(_, members)| !members.is_empty())
        .map(|(c, members)| ClassRboRow {
            dataset: dataset.to_owned(),
            class: graph.class_label(ClassId(c as u32)).to_owned(),
            model: model.to_owned(),
            k,
            hop,
            mean_rbo: mean(members.iter().map(|e| per_entity[e.index()])).unwrap_or(0.0),
            rank_within_model: 0,
            support: members.len(),
        })
        .collect();
    rows.sort_by(|a, b| b.mean_rbo.total_cmp(&a.mean_rbo).then_with(|| a.class.cmp(&b.class)));
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank_within_model = i + 1;
    }
    Ok(rows)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share ranks i+1..=j+1
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson's r; needs at least three pairs and non-constant series.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::InsufficientData {
            needed: 3,
            found: x.len(),
        });
    }
    let mx = mean(x.iter().copied()).unwrap();
    let my = mean(y.iter().copied()).unwrap();
    let cov = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let vx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let vy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if vx == 0.0 || vy == 0.0 {
        return Err(AnalysisError::ConstantSeries);
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho as Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::InsufficientClasses {
            needed: 3,
            found: x.len(),
        });
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Spearman correlation of two models' per-class means over the classes
/// both of them report.
pub fn model_rank_correlation(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<f64, AnalysisError> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(class, &va)| b.get(class).map(|&vb| (va, vb)))
        .unzip();
    if xs.len() < 3 {
        return Err(AnalysisError::InsufficientClasses {
            needed: 3,
            found: xs.len(),
        });
    }
    spearman(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    SpearmanBetweenModels,
    PearsonMrrRbo,
}

/// Symmetric model x model matrix; `None` where no cell was computable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub kind: CorrelationKind,
    pub hop: Hop,
    pub models: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    /// Number of (dataset, K) cells averaged into each entry.
    pub cells_used: Vec<Vec<usize>>,
    /// (dataset, K) cells skipped across all model pairs.
    pub cells_skipped: usize,
}

/// One (dataset, K) cell of per-class means: model -> class -> mean RBO.
pub type ClassMeansCell = BTreeMap<String, BTreeMap<String, f64>>;

/// Unweighted mean over cells of the per-cell Spearman matrices.
pub fn between_model_matrix(hop: Hop, cells: &[ClassMeansCell]) -> CorrelationMatrix {
    let mut models: Vec<String> = cells.iter().flat_map(|c| c.keys().cloned()).collect();
    models.sort();
    models.dedup();
    let m = models.len();
    let mut values = vec![vec![None; m]; m];
    let mut cells_used = vec![vec![0; m]; m];
    let mut skipped = 0;
    for i in 0..m {
        values[i][i] = Some(1.0);
        cells_used[i][i] = cells.iter().filter(|c| c.contains_key(&models[i])).count();
        for j in i + 1..m {
            let mut coefficients = Vec::new();
            for cell in cells {
                match (cell.get(&models[i]), cell.get(&models[j])) {
                    (Some(a), Some(b)) => match model_rank_correlation(a, b) {
                        Ok(r) => coefficients.push(r),
                        Err(_) => skipped += 1,
                    },
                    _ => skipped += 1,
                }
            }
            let avg = mean(coefficients.iter().copied());
            values[i][j] = avg;
            values[j][i] = avg;
            cells_used[i][j] = coefficients.len();
            cells_used[j][i] = coefficients.len();
        }
    }
    CorrelationMatrix {
        kind: CorrelationKind::SpearmanBetweenModels,
        hop,
        models,
        values,
        cells_used,
        cells_skipped: skipped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrrRboRow {
    pub model: String,
    pub hop: Hop,
    pub k: usize,
    pub datasets: Vec<String>,
    /// `None` when undefined (too few datasets or a constant series).
    pub pearson: Option<f64>,
    pub note: Option<String>,
}

/// Pearson r between dataset-level MRR and mean RBO for one model/metric.
pub fn mrr_rbo_pearson(mrr: &[f64], rbo: &[f64]) -> Result<f64, AnalysisError> {
    pearson(mrr, rbo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredicateHops {
    /// Count only the predicate adjacent to the center.
    #[default]
    First,
    /// Count both predicates of each shared 2-hop element.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateWeight {
    pub predicate: String,
    pub weight: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateImportanceTable {
    pub dataset: String,
    pub class: String,
    pub model: String,
    pub k: usize,
    pub pairs: usize,
    pub shared_elements: u64,
    /// Weight descending, then predicate label ascending.
    pub weights: Vec<PredicateWeight>,
    pub warning: Option<String>,
}

/// Pools, over every class member `e` and each of its top-`k` embedding
/// neighbours `e'`, the predicates of the 2-hop elements shared by `e` and
/// `e'`, then normalises the counts into weights.
#[allow(clippy::too_many_arguments)]
pub fn predicate_importance(
    graph: &KnowledgeGraph,
    sets: &NeighborhoodSets,
    embedding_lists: &[RankedNeighborList],
    class: ClassId,
    dataset: &str,
    model: &str,
    k: usize,
    hops: PredicateHops,
) -> Result<PredicateImportanceTable, AnalysisError> {
    if class.index() >= graph.num_classes() {
        return Err(AnalysisError::UnknownClass(class.0));
    }
    let label = graph.class_label(class).to_owned();
    let members = graph
        .entities_of_class(class)
        .map_err(|_| AnalysisError::UnknownClass(class.0))?;
    if members.is_empty() {
        return Err(AnalysisError::EmptyClass(label));
    }

    let mut counts = vec![0u64; graph.num_predicates()];
    let mut pairs = 0usize;
    let mut shared = 0u64;
    for e in members {
        let own = sets.keys(Hop::Two, e);
        let list = &embedding_lists[e.index()];
        for nb in list.entries.iter().take(k) {
            pairs += 1;
            for key in sorted_intersection(own, sets.keys(Hop::Two, nb.entity)) {
                shared += 1;
                if let HopElement::TwoHop { first, second, .. } = HopElement::decode(key, Hop::Two) {
                    counts[first.predicate.index()] += 1;
                    if hops == PredicateHops::Both {
                        counts[second.predicate.index()] += 1;
                    }
                }
            }
        }
    }

    let total: u64 = counts.iter().sum();
    let mut weights: Vec<PredicateWeight> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(p, &c)| PredicateWeight {
            predicate: graph.predicate_label(PredicateId(p as u32)).to_owned(),
            weight: c as f64 / total as f64,
            count: c,
        })
        .collect();
    weights.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.predicate.cmp(&b.predicate)));
    let warning = (total == 0).then(|| {
        log::warn!("class {label:?}, model {model}: no shared 2-hop elements among top-{k} neighbours");
        "no shared 2-hop elements".to_owned()
    });
    Ok(PredicateImportanceTable {
        dataset: dataset.to_owned(),
        class: label,
        model: model.to_owned(),
        k,
        pairs,
        shared_elements: shared,
        weights,
        warning,
    })
}

fn sorted_intersection<'a>(a: &'a [u64], b: &'a [u64]) -> impl Iterator<Item = u64> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                    return Some(a[i - 1]);
                }
            }
        }
        None
    })
}

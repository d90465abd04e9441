//! Entity embedding matrices and exact cosine nearest neighbours.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use rayon::prelude::*;
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph};
use crate::similarity::{list_len, select_top, Neighbor, RankedNeighborList, SimilarityError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("embedding header must be `n dim`, got {0:?}")]
    BadHeader(String),
    #[error("line {line}: malformed embedding row")]
    MalformedRow { line: usize },
    #[error("graph entity {0:?} has no embedding row")]
    MissingEntity(String),
    #[error("embedding row for {0:?} which is not a graph entity")]
    UnknownEntity(String),
    #[error("duplicate embedding row for {0:?}")]
    DuplicateEntity(String),
    #[error("line {line}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-finite value")]
    NonFiniteValue { line: usize },
    #[error("header announces {expected} rows, file has {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("vectors have different dimensions ({0} vs {1})")]
    VectorLengthMismatch(usize, usize),
    #[error("line {line}: input is not valid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("read failed: {0}")]
    Read(String),
    #[error("unknown entity id {0}")]
    UnknownEntityId(u32),
}

/// Row-major `n x dim` matrix; row `i` belongs to entity id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    values: Vec<f64>,
    norms: Vec<f64>,
    zero_rows: BTreeSet<EntityId>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from rows already in entity-id order.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    line: i + 1,
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFiniteValue { line: i + 1 });
            }
            values.extend_from_slice(row);
        }
        Ok(Self::from_flat(dim, values))
    }

    fn from_flat(dim: usize, values: Vec<f64>) -> Self {
        let n = values.len().checked_div(dim).unwrap_or(0);
        let norms: Vec<f64> = (0..n)
            .map(|i| values[i * dim..(i + 1) * dim].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let zero_rows = norms
            .iter()
            .enumerate()
            .filter(|(_, &norm)| norm == 0.0)
            .map(|(i, _)| EntityId(i as u32))
            .collect();
        Self {
            dim,
            values,
            norms,
            zero_rows,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.norms.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, e: EntityId) -> &[f64] {
        &self.values[e.index() * self.dim..(e.index() + 1) * self.dim]
    }

    pub fn norm(&self, e: EntityId) -> f64 {
        self.norms[e.index()]
    }

    pub fn zero_rows(&self) -> &BTreeSet<EntityId> {
        &self.zero_rows
    }

    /// Returns a copy with row `e` multiplied by `factor`.
    pub fn with_scaled_row(&self, e: EntityId, factor: f64) -> Self {
        let mut values = self.values.clone();
        for v in &mut values[e.index() * self.dim..(e.index() + 1) * self.dim] {
            *v *= factor;
        }
        Self::from_flat(self.dim, values)
    }

    fn cosine_rows(&self, a: EntityId, b: EntityId) -> f64 {
        let (na, nb) = (self.norm(a), self.norm(b));
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (dot(self.row(a), self.row(b)) / (na * nb)).clamp(-1.0, 1.0)
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `u·v / (‖u‖‖v‖)`, 0 when either norm is 0, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::VectorLengthMismatch(u.len(), v.len()));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Reads `n dim` followed by `label<TAB>f1 f2 ... f_dim` rows and permutes
/// them into the graph's entity-id order.
pub fn load_embeddings<R: BufRead>(reader: R, graph: &KnowledgeGraph) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut lines = reader.split(b'\n').enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>, EmbeddingError> {
        for (i, raw) in lines.by_ref() {
            let raw = raw.map_err(|e| EmbeddingError::Read(e.to_string()))?;
            let text = String::from_utf8(raw).map_err(|_| EmbeddingError::InvalidUtf8 { line: i + 1 })?;
            let text = text.trim_end_matches('\r');
            if !text.trim().is_empty() {
                return Ok(Some((i + 1, text.to_owned())));
            }
        }
        Ok(None)
    };

    let (_, header) = next_line()?.ok_or_else(|| EmbeddingError::BadHeader(String::new()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (declared, dim) = match parts.as_slice() {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) if d > 0 => (n, d),
            _ => return Err(EmbeddingError::BadHeader(header.clone())),
        },
        _ => return Err(EmbeddingError::BadHeader(header.clone())),
    };

    let n = graph.num_entities();
    let mut values = vec![0.0; n * dim];
    let mut filled = vec![false; n];
    let mut seen_rows = 0usize;
    let mut by_label: HashMap<&str, EntityId> = HashMap::new();
    for (i, label) in graph.entities().labels().iter().enumerate() {
        by_label.insert(label, EntityId(i as u32));
    }

    while let Some((line, text)) = next_line()? {
        seen_rows += 1;
        let (label, rest) = text.split_once('\t').ok_or(EmbeddingError::MalformedRow { line })?;
        let label = label.trim();
        let id = *by_label
            .get(label)
            .ok_or_else(|| EmbeddingError::UnknownEntity(label.to_owned()))?;
        if filled[id.index()] {
            return Err(EmbeddingError::DuplicateEntity(label.to_owned()));
        }
        let row = &mut values[id.index() * dim..(id.index() + 1) * dim];
        let mut found = 0usize;
        for token in rest.split_whitespace() {
            let v: f64 = token.parse().map_err(|_| EmbeddingError::MalformedRow { line })?;
            if !v.is_finite() {
                return Err(EmbeddingError::NonFiniteValue { line });
            }
            if found < dim {
                row[found] = v;
            }
            found += 1;
        }
        if found != dim {
            return Err(EmbeddingError::DimensionMismatch {
                line,
                expected: dim,
                found,
            });
        }
        filled[id.index()] = true;
    }

    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(EmbeddingError::MissingEntity(
            graph.entity_label(EntityId(missing as u32)).to_owned(),
        ));
    }
    if seen_rows != declared {
        return Err(EmbeddingError::RowCountMismatch {
            expected: declared,
            found: seen_rows,
        });
    }
    let matrix = EmbeddingMatrix::from_flat(dim, values);
    if !matrix.zero_rows.is_empty() {
        log::warn!("{} entities have zero-norm embeddings", matrix.zero_rows.len());
    }
    Ok(matrix)
}

/// Exact top-N by cosine over a full scan of all other rows.
pub fn top_n_embedding_neighbors(
    e: EntityId,
    matrix: &EmbeddingMatrix,
    n: usize,
) -> Result<RankedNeighborList, SimilarityError> {
    if e.index() >= matrix.n_entities() {
        return Err(SimilarityError::UnknownEntity(e.0));
    }
    let len = list_len(n, matrix.n_entities())?;
    let scored: Vec<Neighbor> = (0..matrix.n_entities() as u32)
        .map(EntityId)
        .filter(|&other| other != e)
        .map(|other| Neighbor {
            entity: other,
            score: matrix.cosine_rows(e, other),
        })
        .collect();
    Ok(RankedNeighborList {
        center: e,
        entries: select_top(scored, len),
        degenerate: matrix.norm(e) == 0.0,
    })
}

pub fn all_embedding_neighbors(matrix: &EmbeddingMatrix, n: usize) -> Result<Vec<RankedNeighborList>, SimilarityError> {
    list_len(n, matrix.n_entities())?;
    (0..matrix.n_entities() as u32)
        .into_par_iter()
        .map(|e| top_n_embedding_neighbors(EntityId(e), matrix, n))
        .collect()
}

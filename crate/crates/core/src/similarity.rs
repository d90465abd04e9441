//! Jaccard similarity over neighbourhood sets and exact top-N graph neighbours.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph};
use crate::neighborhood::{Hop, InvertedIndex, NeighborhoodSets};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("unknown entity id {0}")]
    UnknownEntity(u32),
    #[error("neighbour depth must be at least 1")]
    ZeroDepth,
    #[error("a graph with {entities} entities has no neighbours to rank")]
    InsufficientUniverse { entities: usize },
    #[error("index was built for hop {built}, requested hop {requested}")]
    HopMismatch { built: Hop, requested: Hop },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub entity: EntityId,
    pub score: f64,
}

/// Ordered top-N list: score descending, then entity id ascending; the
/// center is never included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedNeighborList {
    pub center: EntityId,
    pub entries: Vec<Neighbor>,
    /// The center carries no information (empty element set or zero vector),
    /// so the list is pure id-order padding.
    #[serde(default)]
    pub degenerate: bool,
}

impl RankedNeighborList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<EntityId> {
        self.entries.iter().map(|n| n.entity).collect()
    }

    /// First `k` entries as a new list.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            center: self.center,
            entries: self.entries[..k.min(self.entries.len())].to_vec(),
            degenerate: self.degenerate,
        }
    }
}

pub(crate) fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.score.total_cmp(&a.score).then(a.entity.cmp(&b.entity))
}

/// Effective list length for a universe of `n_entities`: `min(n, n_entities - 1)`.
pub(crate) fn list_len(n: usize, n_entities: usize) -> Result<usize, SimilarityError> {
    if n == 0 {
        return Err(SimilarityError::ZeroDepth);
    }
    if n_entities < 2 {
        return Err(SimilarityError::InsufficientUniverse { entities: n_entities });
    }
    Ok(n.min(n_entities - 1))
}

/// Keeps the best `len` entries of `scored` in rank order.
pub(crate) fn select_top(mut scored: Vec<Neighbor>, len: usize) -> Vec<Neighbor> {
    if scored.len() > len {
        scored.select_nth_unstable_by(len, rank_order);
        scored.truncate(len);
    }
    scored.sort_unstable_by(rank_order);
    scored
}

fn intersection_size<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

fn jaccard_from_counts(intersection: usize, len_a: usize, len_b: usize) -> f64 {
    let union = len_a + len_b - intersection;
    if union == 0 {
        0.0
    } else {
        intersection as f64 / union as f64
    }
}

/// `|A ∩ B| / |A ∪ B|` over sorted, duplicate-free slices; 0 when both are empty.
pub fn jaccard<T: Ord>(a: &[T], b: &[T]) -> f64 {
    jaccard_from_counts(intersection_size(a, b), a.len(), b.len())
}

fn check_center(sets: &NeighborhoodSets, e: EntityId) -> Result<(), SimilarityError> {
    if e.index() >= sets.num_entities() {
        return Err(SimilarityError::UnknownEntity(e.0));
    }
    Ok(())
}

/// Pads `entries` with zero-score entities in ascending id order.
fn pad(center: EntityId, mut entries: Vec<Neighbor>, len: usize, n_entities: usize) -> Vec<Neighbor> {
    if entries.len() >= len {
        return entries;
    }
    let mut listed: Vec<EntityId> = entries.iter().map(|n| n.entity).collect();
    listed.sort_unstable();
    let mut candidate = 0u32;
    while entries.len() < len && (candidate as usize) < n_entities {
        let id = EntityId(candidate);
        if id != center && listed.binary_search(&id).is_err() {
            entries.push(Neighbor { entity: id, score: 0.0 });
        }
        candidate += 1;
    }
    entries
}

/// Reusable per-worker buffers for index-based candidate generation.
#[derive(Debug, Default)]
pub struct Scratch {
    counts: Vec<u32>,
    touched: Vec<u32>,
}

impl Scratch {
    pub fn new(n_entities: usize) -> Self {
        Self {
            counts: vec![0; n_entities],
            touched: Vec::new(),
        }
    }
}

/// Exact top-N by Jaccard using the inverted index for candidate
/// generation: every entity sharing at least one element with `e` is
/// reached through a posting list, and the co-occurrence counts are exactly
/// the intersection sizes.
pub fn top_n_graph_neighbors(
    e: EntityId,
    sets: &NeighborhoodSets,
    index: &InvertedIndex,
    n: usize,
    hop: Hop,
) -> Result<RankedNeighborList, SimilarityError> {
    let mut scratch = Scratch::new(sets.num_entities());
    top_n_with_scratch(e, sets, index, n, hop, &mut scratch)
}

pub fn top_n_with_scratch(
    e: EntityId,
    sets: &NeighborhoodSets,
    index: &InvertedIndex,
    n: usize,
    hop: Hop,
    scratch: &mut Scratch,
) -> Result<RankedNeighborList, SimilarityError> {
    check_center(sets, e)?;
    if let Some(built) = index.hop() {
        if built != hop {
            return Err(SimilarityError::HopMismatch { built, requested: hop });
        }
    }
    let n_entities = sets.num_entities();
    let len = list_len(n, n_entities)?;
    if scratch.counts.len() != n_entities {
        *scratch = Scratch::new(n_entities);
    }

    let own = sets.keys(hop, e);
    for &key in own {
        for &other in index.posting(key) {
            if other == e {
                continue;
            }
            let slot = &mut scratch.counts[other.index()];
            if *slot == 0 {
                scratch.touched.push(other.0);
            }
            *slot += 1;
        }
    }
    let scored: Vec<Neighbor> = scratch
        .touched
        .drain(..)
        .map(|other| {
            let inter = std::mem::take(&mut scratch.counts[other as usize]) as usize;
            let other = EntityId(other);
            Neighbor {
                entity: other,
                score: jaccard_from_counts(inter, own.len(), sets.keys(hop, other).len()),
            }
        })
        .collect();

    let entries = pad(e, select_top(scored, len), len, n_entities);
    Ok(RankedNeighborList {
        center: e,
        entries,
        degenerate: own.is_empty(),
    })
}

/// Full-scan reference: exact Jaccard against every other entity.
pub fn brute_force_neighbors(
    e: EntityId,
    sets: &NeighborhoodSets,
    n: usize,
    hop: Hop,
) -> Result<RankedNeighborList, SimilarityError> {
    check_center(sets, e)?;
    let n_entities = sets.num_entities();
    let len = list_len(n, n_entities)?;
    let own = sets.keys(hop, e);
    let scored: Vec<Neighbor> = (0..n_entities as u32)
        .map(EntityId)
        .filter(|&other| other != e)
        .map(|other| Neighbor {
            entity: other,
            score: jaccard(own, sets.keys(hop, other)),
        })
        .collect();
    Ok(RankedNeighborList {
        center: e,
        entries: select_top(scored, len),
        degenerate: own.is_empty(),
    })
}

/// Top-N graph neighbours of every entity, computed in parallel.
pub fn all_graph_neighbors(
    sets: &NeighborhoodSets,
    index: &InvertedIndex,
    n: usize,
    hop: Hop,
) -> Result<Vec<RankedNeighborList>, SimilarityError> {
    let n_entities = sets.num_entities();
    list_len(n, n_entities)?;
    (0..n_entities as u32)
        .into_par_iter()
        .map_init(
            || Scratch::new(n_entities),
            |scratch, e| top_n_with_scratch(EntityId(e), sets, index, n, hop, scratch),
        )
        .collect()
}

/// Writes `center<TAB>rank<TAB>neighbor<TAB>score` rows, rank 1-based.
pub fn write_neighbor_dump<W: Write>(
    mut w: W,
    graph: &KnowledgeGraph,
    lists: &[RankedNeighborList],
) -> std::io::Result<()> {
    for list in lists {
        let center = graph.entity_label(list.center);
        for (rank, nb) in list.entries.iter().enumerate() {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                center,
                rank + 1,
                graph.entity_label(nb.entity),
                nb.score
            )?;
        }
    }
    w.flush()
}

//! Masked 1-hop and 2-hop neighbourhood element sets.
//!
//! For a center entity `e`, a 1-hop element is an incident train triple with
//! `e` replaced by a dummy token; the slot records which side `e` was on. A
//! 2-hop element is a length-2 walk from `e` over the inverse-augmented
//! graph with the intermediate entity dropped: `(p1*, p2*, terminal)`, where
//! `p*` carries an inverse marker when the hop follows a reversed edge.
//!
//! Elements are packed into a `u64` key. The packing is injective, so set
//! operations on keys are exact set operations on elements:
//!
//! ```text
//! 1-hop  [slot:1][predicate:31][other:32]
//! 2-hop  [p1*:16][p2*:16][terminal:32]      p* = predicate << 1 | inverse
//! ```
//!
//! `other`/`terminal` equal to [`MASKED`] stands for the center itself
//! (self-loops, and backtracking walks when those are enabled).

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, KgError, KnowledgeGraph, PredicateId};

pub mod cache;

/// Entity slot value that stands for the masked center.
pub const MASKED: u32 = u32::MAX;

/// Largest predicate count the 2-hop packing can represent.
pub const MAX_PREDICATES: usize = 1 << 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NeighborhoodError {
    #[error("{predicates} predicates exceed the 2-hop element encoding limit of {limit}")]
    TooManyPredicates { predicates: usize, limit: usize },
    #[error("{entities} entities exceed the element encoding limit")]
    TooManyEntities { entities: usize },
    #[error(transparent)]
    Graph(#[from] KgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Hop {
    One,
    Two,
}

impl Hop {
    pub const BOTH: [Hop; 2] = [Hop::One, Hop::Two];

    pub fn as_u8(self) -> u8 {
        match self {
            Hop::One => 1,
            Hop::Two => 2,
        }
    }
}

impl From<Hop> for u8 {
    fn from(h: Hop) -> u8 {
        h.as_u8()
    }
}

impl TryFrom<u8> for Hop {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Hop::One),
            2 => Ok(Hop::Two),
            other => Err(format!("hop must be 1 or 2, got {other}")),
        }
    }
}

impl fmt::Display for Hop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Which side of a 1-hop triple the center occupied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    SubjectIsCenter,
    ObjectIsCenter,
}

/// A predicate together with the traversal direction of its edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedPredicate {
    pub predicate: PredicateId,
    pub inverse: bool,
}

impl DirectedPredicate {
    pub fn forward(predicate: PredicateId) -> Self {
        Self {
            predicate,
            inverse: false,
        }
    }

    pub fn inverse(predicate: PredicateId) -> Self {
        Self {
            predicate,
            inverse: true,
        }
    }

    fn code(self) -> u32 {
        self.predicate.0 << 1 | self.inverse as u32
    }

    fn from_code(code: u32) -> Self {
        Self {
            predicate: PredicateId(code >> 1),
            inverse: code & 1 == 1,
        }
    }
}

/// Either the masked center or a concrete entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Center,
    Entity(EntityId),
}

impl Endpoint {
    fn code(self) -> u32 {
        match self {
            Endpoint::Center => MASKED,
            Endpoint::Entity(e) => e.0,
        }
    }

    fn from_code(code: u32) -> Self {
        if code == MASKED {
            Endpoint::Center
        } else {
            Endpoint::Entity(EntityId(code))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HopElement {
    OneHop {
        slot: Slot,
        predicate: PredicateId,
        other: Endpoint,
    },
    TwoHop {
        first: DirectedPredicate,
        second: DirectedPredicate,
        terminal: Endpoint,
    },
}

impl HopElement {
    pub fn hop(&self) -> Hop {
        match self {
            HopElement::OneHop { .. } => Hop::One,
            HopElement::TwoHop { .. } => Hop::Two,
        }
    }

    /// Packs the element into its `u64` key. Callers guarantee the id
    /// ranges checked by [`NeighborhoodSets::build`].
    pub fn encode(&self) -> u64 {
        match *self {
            HopElement::OneHop { slot, predicate, other } => {
                debug_assert!(predicate.0 < 1 << 31);
                let slot_bit = matches!(slot, Slot::ObjectIsCenter) as u64;
                slot_bit << 63 | (predicate.0 as u64) << 32 | other.code() as u64
            }
            HopElement::TwoHop {
                first,
                second,
                terminal,
            } => {
                debug_assert!(first.code() < 1 << 16 && second.code() < 1 << 16);
                (first.code() as u64) << 48 | (second.code() as u64) << 32 | terminal.code() as u64
            }
        }
    }

    pub fn decode(key: u64, hop: Hop) -> Self {
        let low = Endpoint::from_code(key as u32);
        match hop {
            Hop::One => HopElement::OneHop {
                slot: if key >> 63 == 1 {
                    Slot::ObjectIsCenter
                } else {
                    Slot::SubjectIsCenter
                },
                predicate: PredicateId(((key >> 32) as u32) & 0x7fff_ffff),
                other: low,
            },
            Hop::Two => HopElement::TwoHop {
                first: DirectedPredicate::from_code((key >> 48) as u32),
                second: DirectedPredicate::from_code(((key >> 32) & 0xffff) as u32),
                terminal: low,
            },
        }
    }

    /// Human-readable form, e.g. `(:dummy, livesIn, □, inCountry, Germany)`.
    pub fn describe(&self, graph: &KnowledgeGraph) -> String {
        let endpoint = |ep: Endpoint| match ep {
            Endpoint::Center => ":dummy".to_owned(),
            Endpoint::Entity(e) => graph.entity_label(e).to_owned(),
        };
        let directed = |dp: DirectedPredicate| {
            let label = graph.predicate_label(dp.predicate);
            if dp.inverse {
                format!("{label}^-1")
            } else {
                label.to_owned()
            }
        };
        match *self {
            HopElement::OneHop {
                slot: Slot::SubjectIsCenter,
                predicate,
                other,
            } => {
                format!("(:dummy, {}, {})", graph.predicate_label(predicate), endpoint(other))
            }
            HopElement::OneHop {
                slot: Slot::ObjectIsCenter,
                predicate,
                other,
            } => {
                format!("({}, {}, :dummy)", endpoint(other), graph.predicate_label(predicate))
            }
            HopElement::TwoHop {
                first,
                second,
                terminal,
            } => format!(
                "(:dummy, {}, □, {}, {})",
                directed(first),
                directed(second),
                endpoint(terminal)
            ),
        }
    }
}

/// Inverse-augmented adjacency over the train split, in CSR layout.
///
/// Every train triple `(s, p, o)` contributes `s -> o` labelled `p` and
/// `o -> s` labelled `p^-1`.
#[derive(Debug, Clone)]
pub struct AugmentedAdjacency {
    offsets: Vec<usize>,
    edges: Vec<(DirectedPredicate, EntityId)>,
}

impl AugmentedAdjacency {
    pub fn out_edges(&self, e: EntityId) -> &[(DirectedPredicate, EntityId)] {
        &self.edges[self.offsets[e.index()]..self.offsets[e.index() + 1]]
    }

    pub fn out_degree(&self, e: EntityId) -> usize {
        self.offsets[e.index() + 1] - self.offsets[e.index()]
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }
}

pub fn augment_with_inverses(graph: &KnowledgeGraph) -> AugmentedAdjacency {
    let n = graph.num_entities();
    let train = graph.train_triples();
    let mut degree = vec![0usize; n];
    for t in train {
        degree[t.subject.index()] += 1;
        degree[t.object.index()] += 1;
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    for d in &degree {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut cursor = offsets[..n].to_vec();
    let placeholder = (DirectedPredicate::forward(PredicateId(0)), EntityId(0));
    let mut edges = vec![placeholder; offsets[n]];
    for t in train {
        edges[cursor[t.subject.index()]] = (DirectedPredicate::forward(t.predicate), t.object);
        cursor[t.subject.index()] += 1;
        edges[cursor[t.object.index()]] = (DirectedPredicate::inverse(t.predicate), t.subject);
        cursor[t.object.index()] += 1;
    }
    AugmentedAdjacency { offsets, edges }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NeighborhoodOptions {
    /// Keep 2-hop walks that end back at the center (masked terminal).
    pub include_backtracking: bool,
}

fn check_encodable(graph: &KnowledgeGraph) -> Result<(), NeighborhoodError> {
    if graph.num_predicates() > MAX_PREDICATES {
        return Err(NeighborhoodError::TooManyPredicates {
            predicates: graph.num_predicates(),
            limit: MAX_PREDICATES,
        });
    }
    if graph.num_entities() >= MASKED as usize {
        return Err(NeighborhoodError::TooManyEntities {
            entities: graph.num_entities(),
        });
    }
    Ok(())
}

fn check_entity(adj: &AugmentedAdjacency, e: EntityId) -> Result<(), NeighborhoodError> {
    if e.index() >= adj.num_nodes() {
        return Err(KgError::UnknownEntity(e.0).into());
    }
    Ok(())
}

fn one_hop_keys(adj: &AugmentedAdjacency, e: EntityId) -> Vec<u64> {
    let mut keys: Vec<u64> = adj
        .out_edges(e)
        .iter()
        .map(|&(dp, other)| {
            let other = if other == e {
                Endpoint::Center
            } else {
                Endpoint::Entity(other)
            };
            // a self-loop masks both positions, so its two slots coincide
            let slot = if dp.inverse && other != Endpoint::Center {
                Slot::ObjectIsCenter
            } else {
                Slot::SubjectIsCenter
            };
            HopElement::OneHop {
                slot,
                predicate: dp.predicate,
                other,
            }
            .encode()
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

fn two_hop_keys(adj: &AugmentedAdjacency, e: EntityId, options: NeighborhoodOptions) -> Vec<u64> {
    let mut keys = Vec::new();
    for &(first, mid) in adj.out_edges(e) {
        for &(second, terminal) in adj.out_edges(mid) {
            let terminal = if terminal == e {
                if !options.include_backtracking {
                    continue;
                }
                Endpoint::Center
            } else {
                Endpoint::Entity(terminal)
            };
            keys.push(
                HopElement::TwoHop {
                    first,
                    second,
                    terminal,
                }
                .encode(),
            );
        }
    }
    keys.sort_unstable();
    keys.dedup();
    keys
}

/// `T1(e)` as decoded elements.
pub fn one_hop_elements(
    graph: &KnowledgeGraph,
    adj: &AugmentedAdjacency,
    e: EntityId,
) -> Result<Vec<HopElement>, NeighborhoodError> {
    check_encodable(graph)?;
    check_entity(adj, e)?;
    Ok(one_hop_keys(adj, e)
        .into_iter()
        .map(|k| HopElement::decode(k, Hop::One))
        .collect())
}

/// `T2(e)` as decoded elements.
pub fn two_hop_elements(
    graph: &KnowledgeGraph,
    adj: &AugmentedAdjacency,
    e: EntityId,
    options: NeighborhoodOptions,
) -> Result<Vec<HopElement>, NeighborhoodError> {
    check_encodable(graph)?;
    check_entity(adj, e)?;
    Ok(two_hop_keys(adj, e, options)
        .into_iter()
        .map(|k| HopElement::decode(k, Hop::Two))
        .collect())
}

/// Sorted element-key sets for every entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodSets {
    pub(crate) one_hop: Vec<Vec<u64>>,
    pub(crate) two_hop: Vec<Vec<u64>>,
    pub(crate) options: NeighborhoodOptions,
}

impl NeighborhoodSets {
    pub fn build(graph: &KnowledgeGraph, options: NeighborhoodOptions) -> Result<Self, NeighborhoodError> {
        check_encodable(graph)?;
        let adj = augment_with_inverses(graph);
        let n = graph.num_entities();
        let one_hop = (0..n)
            .into_par_iter()
            .map(|i| one_hop_keys(&adj, EntityId(i as u32)))
            .collect();
        let two_hop = (0..n)
            .into_par_iter()
            .map(|i| two_hop_keys(&adj, EntityId(i as u32), options))
            .collect();
        Ok(Self {
            one_hop,
            two_hop,
            options,
        })
    }

    pub fn from_parts(one_hop: Vec<Vec<u64>>, two_hop: Vec<Vec<u64>>, options: NeighborhoodOptions) -> Self {
        debug_assert_eq!(one_hop.len(), two_hop.len());
        Self {
            one_hop,
            two_hop,
            options,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.one_hop.len()
    }

    pub fn options(&self) -> NeighborhoodOptions {
        self.options
    }

    pub fn keys(&self, hop: Hop, e: EntityId) -> &[u64] {
        match hop {
            Hop::One => &self.one_hop[e.index()],
            Hop::Two => &self.two_hop[e.index()],
        }
    }

    pub fn universe(&self, hop: Hop) -> &[Vec<u64>] {
        match hop {
            Hop::One => &self.one_hop,
            Hop::Two => &self.two_hop,
        }
    }

    pub fn elements(&self, hop: Hop, e: EntityId) -> impl Iterator<Item = HopElement> + '_ {
        self.keys(hop, e).iter().map(move |&k| HopElement::decode(k, hop))
    }
}

/// Element key -> ascending posting list of entities.
#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    hop: Option<Hop>,
    slots: HashMap<u64, u32>,
    offsets: Vec<usize>,
    postings: Vec<EntityId>,
}

impl InvertedIndex {
    pub fn build(sets: &NeighborhoodSets, hop: Hop) -> Self {
        let universe = sets.universe(hop);
        let mut pairs: Vec<(u64, u32)> = universe
            .iter()
            .enumerate()
            .flat_map(|(e, keys)| keys.iter().map(move |&k| (k, e as u32)))
            .collect();
        pairs.par_sort_unstable();

        let mut slots = HashMap::new();
        let mut offsets = vec![0];
        let mut postings = Vec::with_capacity(pairs.len());
        let mut current = None;
        for (key, e) in pairs {
            if current != Some(key) {
                if current.is_some() {
                    offsets.push(postings.len());
                }
                slots.insert(key, slots.len() as u32);
                current = Some(key);
            }
            postings.push(EntityId(e));
        }
        if current.is_some() {
            offsets.push(postings.len());
        }
        Self {
            hop: Some(hop),
            slots,
            offsets,
            postings,
        }
    }

    pub fn hop(&self) -> Option<Hop> {
        self.hop
    }

    pub fn posting(&self, key: u64) -> &[EntityId] {
        match self.slots.get(&key) {
            Some(&slot) => &self.postings[self.offsets[slot as usize]..self.offsets[slot as usize + 1]],
            None => &[],
        }
    }

    pub fn num_elements(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[EntityId])> + '_ {
        self.slots.iter().map(|(&k, &slot)| {
            (
                k,
                &self.postings[self.offsets[slot as usize]..self.offsets[slot as usize + 1]],
            )
        })
    }
}

//! Graph-vs-embedding entity similarity audit for knowledge graph embeddings.
//!
//! The crate answers one question: do the nearest neighbours of an entity in
//! an embedding space agree with its most similar entities in the graph it
//! was trained on? Graph similarity is the Jaccard overlap of masked 1-hop
//! and 2-hop neighbourhoods, embedding similarity is cosine, and the two
//! top-K rankings are compared with rank-biased overlap at persistence 1.
//!
//! Module map:
//!
//! - [`kg`]: triple/type ingestion and interning
//! - [`neighborhood`]: masked 1-hop / 2-hop element sets and inverted indexes
//! - [`similarity`]: Jaccard and exact top-N graph neighbours
//! - [`embedding`]: embedding matrices and exact top-N cosine neighbours
//! - [`rbo`]: rank-biased overlap
//! - [`rank_metrics`]: MRR / Hits@K over link-prediction rank records
//! - [`analysis`]: per-class tables, correlations, predicate importance, reports
//! - [`config`] and [`pipeline`]: declarative runs used by the CLI and bindings

pub mod analysis;
pub mod config;
pub mod embedding;
pub mod error;
pub mod kg;
pub mod neighborhood;
pub mod pipeline;
pub mod rank_metrics;
pub mod rbo;
pub mod similarity;
mod stats;

pub use error::{Error, Result};
pub use kg::{ClassId, EntityId, KnowledgeGraph, PredicateId, Split};
pub use neighborhood::{Hop, NeighborhoodSets};
pub use similarity::RankedNeighborList;

/// Version string embedded in report metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

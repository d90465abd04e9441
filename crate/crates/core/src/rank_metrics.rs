//! MRR and Hits@K over link-prediction rank records produced elsewhere.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::compensated_sum;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no rank records")]
    EmptyRecords,
    #[error("Hits@K needs K >= 1")]
    ZeroK,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: input is not valid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("read failed: {0}")]
    Read(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Filtered,
    Raw,
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head" => Ok(Side::Head),
            "tail" => Ok(Side::Tail),
            other => Err(format!("side must be head or tail, got {other:?}")),
        }
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "filtered" => Ok(Protocol::Filtered),
            "raw" => Ok(Protocol::Raw),
            other => Err(format!("protocol must be filtered or raw, got {other:?}")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Head => "head",
            Side::Tail => "tail",
        })
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Filtered => "filtered",
            Protocol::Raw => "raw",
        })
    }
}

/// One head- or tail-side prediction for a test triple. `rank` is at least
/// 1; realistic tie handling can yield half-integer ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub side: Side,
    pub rank: f64,
    pub protocol: Protocol,
}

impl RankRecord {
    pub fn with_rank(rank: f64) -> Self {
        Self {
            head: String::new(),
            relation: String::new(),
            tail: String::new(),
            side: Side::Tail,
            rank,
            protocol: Protocol::Filtered,
        }
    }
}

/// Parses `head<TAB>relation<TAB>tail<TAB>side<TAB>rank<TAB>protocol` rows.
/// Lines starting with `#` carry metadata and are skipped.
pub fn parse_ranks<R: BufRead>(reader: R) -> Result<Vec<RankRecord>, MetricsError> {
    let mut out = Vec::new();
    for (i, raw) in reader.split(b'\n').enumerate() {
        let line = i + 1;
        let raw = raw.map_err(|e| MetricsError::Read(e.to_string()))?;
        let text = String::from_utf8(raw).map_err(|_| MetricsError::InvalidUtf8 { line })?;
        let text = text.trim_end_matches('\r');
        if text.trim().is_empty() || text.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| MetricsError::MalformedLine { line, reason };
        let fields: Vec<&str> = text.split('\t').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(malformed(format!("expected 6 fields, found {}", fields.len())));
        }
        let rank: f64 = fields[4]
            .parse()
            .map_err(|_| malformed(format!("bad rank {:?}", fields[4])))?;
        if !rank.is_finite() || rank < 1.0 {
            return Err(malformed(format!("rank must be >= 1, got {}", fields[4])));
        }
        out.push(RankRecord {
            head: fields[0].to_owned(),
            relation: fields[1].to_owned(),
            tail: fields[2].to_owned(),
            side: fields[3].parse().map_err(malformed)?,
            rank,
            protocol: fields[5].parse().map_err(malformed)?,
        });
    }
    Ok(out)
}

/// Mean of `1/rank`, head and tail predictions pooled.
pub fn mrr(records: &[RankRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    Ok(compensated_sum(records.iter().map(|r| 1.0 / r.rank)) / records.len() as f64)
}

/// Fraction of records with `rank <= k`.
pub fn hits_at(records: &[RankRecord], k: usize) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    if records.is_empty() {
        return Err(MetricsError::EmptyRecords);
    }
    let hits = records.iter().filter(|r| r.rank <= k as f64).count();
    Ok(hits as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub records: usize,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
}

pub fn summarize(records: &[RankRecord]) -> Result<RankSummary, MetricsError> {
    Ok(RankSummary {
        records: records.len(),
        mrr: mrr(records)?,
        hits_at_1: hits_at(records, 1)?,
        hits_at_3: hits_at(records, 3)?,
        hits_at_10: hits_at(records, 10)?,
    })
}

//! Rank-biased overlap at persistence `p = 1`.
//!
//! With `p = 1` RBO reduces to the mean, over depths `1..=k`, of the
//! agreement `|S[..d] ∩ T[..d]| / d`. Matches near the top count at every
//! deeper level too, which is what makes the measure top-weighted.

use std::collections::{BTreeMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::EntityId;
use crate::neighborhood::Hop;
use crate::similarity::RankedNeighborList;
use crate::stats::CompensatedSum;

#[derive(Debug, Error, PartialEq)]
pub enum RboError {
    #[error("depth {depth} outside 1..={max}")]
    DepthOutOfRange { depth: usize, max: usize },
    #[error("list lengths {left} and {right} do not both equal k = {k}")]
    LengthMismatch { left: usize, right: usize, k: usize },
    #[error("ranked lists must be non-empty")]
    EmptyList,
    #[error("ranked list contains duplicate items")]
    DuplicateItem,
    #[error("only persistence p = 1 is supported, got {0}")]
    UnsupportedPersistence(f64),
}

/// A ranked list of distinct entities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedIdList(Vec<EntityId>);

impl RankedIdList {
    pub fn new(ids: Vec<EntityId>) -> Result<Self, RboError> {
        if ids.is_empty() {
            return Err(RboError::EmptyList);
        }
        if has_duplicates(&ids) {
            return Err(RboError::DuplicateItem);
        }
        Ok(Self(ids))
    }

    pub fn as_slice(&self) -> &[EntityId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<&RankedNeighborList> for RankedIdList {
    type Error = RboError;

    fn try_from(list: &RankedNeighborList) -> Result<Self, Self::Error> {
        Self::new(list.ids())
    }
}

/// RBO depth. Persistence is fixed at 1 and cannot be set otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RboConfig {
    pub k: usize,
}

impl RboConfig {
    pub const PERSISTENCE: f64 = 1.0;

    pub fn new(k: usize) -> Result<Self, RboError> {
        if k == 0 {
            return Err(RboError::EmptyList);
        }
        Ok(Self { k })
    }

    /// Accepts an explicit persistence only to reject anything but 1.
    pub fn with_persistence(k: usize, p: f64) -> Result<Self, RboError> {
        if p != Self::PERSISTENCE {
            return Err(RboError::UnsupportedPersistence(p));
        }
        Self::new(k)
    }

    pub fn persistence(&self) -> f64 {
        Self::PERSISTENCE
    }
}

fn has_duplicates<T: Eq + Hash>(items: &[T]) -> bool {
    let mut seen = HashSet::with_capacity(items.len());
    !items.iter().all(|x| seen.insert(x))
}

/// `A(S, T, d) = |S[..d] ∩ T[..d]| / d`.
pub fn agreement_at_depth<T: Eq + Hash>(s: &[T], t: &[T], d: usize) -> Result<f64, RboError> {
    let max = s.len().min(t.len());
    if d == 0 || d > max {
        return Err(RboError::DepthOutOfRange { depth: d, max });
    }
    let prefix: HashSet<&T> = s[..d].iter().collect();
    let overlap = t[..d].iter().filter(|x| prefix.contains(x)).count();
    Ok(overlap as f64 / d as f64)
}

/// `RBO(S, T, k) = (1/k) Σ_{d=1..k} A(S, T, d)`, both lists of length `k`.
///
/// The overlap is maintained incrementally, so this is `O(k)`.
pub fn rbo<T: Eq + Hash>(s: &[T], t: &[T], k: usize) -> Result<f64, RboError> {
    if k == 0 || s.is_empty() || t.is_empty() {
        return Err(RboError::EmptyList);
    }
    if s.len() != k || t.len() != k {
        return Err(RboError::LengthMismatch {
            left: s.len(),
            right: t.len(),
            k,
        });
    }
    if has_duplicates(s) || has_duplicates(t) {
        return Err(RboError::DuplicateItem);
    }
    let mut seen_s: HashSet<&T> = HashSet::with_capacity(k);
    let mut seen_t: HashSet<&T> = HashSet::with_capacity(k);
    let mut overlap = 0usize;
    let mut sum = CompensatedSum::default();
    for (d, (a, b)) in s.iter().zip(t).enumerate() {
        if a == b {
            overlap += 1;
        } else {
            overlap += seen_t.contains(a) as usize + seen_s.contains(b) as usize;
        }
        seen_s.insert(a);
        seen_t.insert(b);
        sum.add(overlap as f64 / (d + 1) as f64);
    }
    Ok(sum.total() / k as f64)
}

/// RBO of the first `k` entries of each list.
pub fn rbo_at<T: Eq + Hash>(s: &[T], t: &[T], k: usize) -> Result<f64, RboError> {
    if k == 0 {
        return Err(RboError::EmptyList);
    }
    if s.len() < k || t.len() < k {
        return Err(RboError::LengthMismatch {
            left: s.len(),
            right: t.len(),
            k,
        });
    }
    rbo(&s[..k], &t[..k], k)
}

/// `R{hop}@{K}` values for one entity: the embedding list against the 1-hop
/// and/or 2-hop graph lists, each truncated to every requested `K`.
pub fn rbo_profile(
    embedding: &[EntityId],
    graph_lists: &[(Hop, &[EntityId])],
    ks: &[usize],
) -> Result<BTreeMap<(Hop, usize), f64>, RboError> {
    let mut out = BTreeMap::new();
    for &(hop, graph) in graph_lists {
        for &k in ks {
            out.insert((hop, k), rbo_at(embedding, graph, k)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agreement_hand_cases() {
        let s = ['a', 'b', 'c'];
        let t = ['b', 'a', 'c'];
        assert_eq!(agreement_at_depth(&s, &t, 1).unwrap(), 0.0);
        assert_eq!(agreement_at_depth(&s, &t, 2).unwrap(), 1.0);
        assert_eq!(agreement_at_depth(&s, &t, 3).unwrap(), 1.0);
        assert_eq!(agreement_at_depth(&s, &s, 2).unwrap(), 1.0);
        assert_eq!(agreement_at_depth(&s, &['x', 'y', 'z'], 3).unwrap(), 0.0);
        assert_eq!(
            agreement_at_depth(&s, &t, 4),
            Err(RboError::DepthOutOfRange { depth: 4, max: 3 })
        );
        assert!(agreement_at_depth(&s, &t, 0).is_err());
    }

    #[test]
    fn rbo_hand_cases() {
        assert_eq!(rbo(&['a', 'b', 'c'], &['b', 'a', 'c'], 3).unwrap(), 2.0 / 3.0);
        assert_eq!(rbo(&['a', 'b', 'c'], &['c', 'b', 'a'], 3).unwrap(), 0.5);
        assert_eq!(rbo(&[1, 2, 3, 4], &[1, 2, 3, 4], 4).unwrap(), 1.0);
        assert_eq!(rbo(&[1, 2, 3], &[4, 5, 6], 3).unwrap(), 0.0);
    }

    #[test]
    fn single_match_top_vs_bottom() {
        let with_match_at = |rank: u32| {
            let s: Vec<u32> = (0..10).map(|i| if i == rank { 99 } else { i }).collect();
            let t: Vec<u32> = (0..10).map(|i| if i == rank { 99 } else { 100 + i }).collect();
            rbo(&s, &t, 10).unwrap()
        };
        let harmonic10: f64 = (1..=10).map(|d| 1.0 / d as f64).sum();
        approx::assert_abs_diff_eq!(with_match_at(0), harmonic10 / 10.0, epsilon = 1e-15);
        approx::assert_abs_diff_eq!(with_match_at(0), 0.292_896_8, epsilon = 1e-7);
        approx::assert_abs_diff_eq!(with_match_at(9), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn rbo_errors() {
        assert_eq!(rbo::<u32>(&[], &[], 0), Err(RboError::EmptyList));
        assert_eq!(
            rbo(&[1, 2], &[1, 2, 3], 2),
            Err(RboError::LengthMismatch {
                left: 2,
                right: 3,
                k: 2
            })
        );
        assert_eq!(rbo(&[1, 1], &[1, 2], 2), Err(RboError::DuplicateItem));
        assert_eq!(RankedIdList::new(vec![]), Err(RboError::EmptyList));
    }

    #[test]
    fn persistence_other_than_one_is_rejected() {
        assert!(RboConfig::with_persistence(10, 1.0).is_ok());
        assert_eq!(
            RboConfig::with_persistence(10, 0.9),
            Err(RboError::UnsupportedPersistence(0.9))
        );
        assert_eq!(RboConfig::new(3).unwrap().persistence(), 1.0);
    }

    #[test]
    fn profile_of_identical_and_reversed_lists() {
        let ids: Vec<EntityId> = (0..10).map(EntityId).collect();
        let profile = rbo_profile(&ids, &[(Hop::One, &ids), (Hop::Two, &ids)], &[3, 5, 10]).unwrap();
        assert_eq!(profile.len(), 6);
        assert!(profile.values().all(|&v| v == 1.0));

        let s = [EntityId(0), EntityId(1), EntityId(2)];
        let t = [EntityId(2), EntityId(1), EntityId(0)];
        let profile = rbo_profile(&s, &[(Hop::One, &t)], &[3]).unwrap();
        assert_eq!(profile[&(Hop::One, 3)], 0.5);
    }

    #[test]
    fn truncation_matches_fresh_short_lists() {
        let s: Vec<u32> = (0..100).collect();
        let t: Vec<u32> = (0..100).map(|i| (i * 37) % 101).collect();
        for k in [3, 10, 100] {
            assert_eq!(rbo_at(&s, &t, k).unwrap(), rbo(&s[..k], &t[..k], k).unwrap());
        }
    }
}

//! Rank-to-score normalization.
//!
//! A padded rank vector over `m` documents becomes a score vector through the
//! empirical distribution function applied to inverse ranks:
//! `u = (m + 1 - r) / (m + 1)`. Rank 1 receives the largest score and every
//! score lies strictly inside `(0, 1)`, which keeps the log- and power-based
//! fusion kernels away from their singularities at 0 and 1.

use thiserror::Error;

use crate::runs::DocumentUniverse;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarginalError {
    #[error("rank vector is empty")]
    Empty,
    #[error("rank vector of length {m} is not a permutation of 1..={m}: {detail}")]
    NotAPermutation { m: usize, detail: String },
}

/// Normalized scores of one list for one query, aligned to the universe
/// document order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub query_id: String,
    /// System id for fresh lists; a synthetic stage id for fused ones.
    pub source_id: String,
    pub scores: Vec<f64>,
}

impl MarginalTable {
    pub fn from_ranks(
        query_id: impl Into<String>,
        source_id: impl Into<String>,
        ranks: &[u32],
    ) -> Result<Self, MarginalError> {
        Ok(Self {
            query_id: query_id.into(),
            source_id: source_id.into(),
            scores: normalize_ranks(ranks)?,
        })
    }

    pub fn m(&self) -> usize {
        self.scores.len()
    }
}

/// Map a padded rank vector (a permutation of `1..=m`) to scores
/// `u = (m + 1 - r) / (m + 1)`.
pub fn normalize_ranks(ranks: &[u32]) -> Result<Vec<f64>, MarginalError> {
    let m = ranks.len();
    if m == 0 {
        return Err(MarginalError::Empty);
    }
    let mut seen = vec![false; m];
    for &r in ranks {
        if r < 1 || r as usize > m {
            return Err(MarginalError::NotAPermutation {
                m,
                detail: format!("rank {r} out of range"),
            });
        }
        if seen[r as usize - 1] {
            return Err(MarginalError::NotAPermutation {
                m,
                detail: format!("rank {r} occurs twice"),
            });
        }
        seen[r as usize - 1] = true;
    }
    let denom = (m + 1) as f64;
    Ok(ranks
        .iter()
        .map(|&r| (m as u32 + 1 - r) as f64 / denom)
        .collect())
}

/// One marginal table per system of a document universe.
pub fn tables_for_universe(
    universe: &DocumentUniverse,
) -> Result<Vec<MarginalTable>, MarginalError> {
    universe
        .systems
        .iter()
        .enumerate()
        .map(|(i, system_id)| {
            MarginalTable::from_ranks(&universe.query_id, system_id, universe.ranks(i))
        })
        .collect()
}

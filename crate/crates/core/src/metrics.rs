//! Pairwise cluster-similarity score between a reference labeling and a
//! federated one.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Labeling;

/// `1 - mismatches / N²`, in `[1/N, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// Ordered node pairs `(i, j)`, `i = j` included, that `global` puts in one
/// cluster and `aggregated` separates.
///
/// Counted from the contingency table: pairs co-labeled by `global` minus pairs
/// co-labeled by both.
pub fn mismatch_count(global: &Labeling, aggregated: &Labeling) -> Result<u64> {
    if global.len() != aggregated.len() {
        return Err(Error::contract(format!(
            "labelings differ in length: {} vs {}",
            global.len(),
            aggregated.len()
        )));
    }
    let mut sizes: HashMap<usize, u64> = HashMap::new();
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    for (&g, &a) in global.as_slice().iter().zip(aggregated.as_slice()) {
        *sizes.entry(g).or_default() += 1;
        *joint.entry((g, a)).or_default() += 1;
    }
    let together: u64 = sizes.values().map(|s| s * s).sum();
    let kept: u64 = joint.values().map(|s| s * s).sum();
    Ok(together - kept)
}

/// Similarity of `aggregated` to the reference `global`. Asymmetric: merging
/// reference clusters costs nothing, splitting them does.
pub fn cluster_similarity(global: &Labeling, aggregated: &Labeling) -> Result<SimilarityScore> {
    if global.is_empty() {
        return Err(Error::contract("cannot score empty labelings"));
    }
    let n = global.len() as f64;
    let mismatches = mismatch_count(global, aggregated)?;
    Ok(SimilarityScore(1.0 - mismatches as f64 / (n * n)))
}

//! Dense numerical kernels used by both protocols and by the reference
//! pipeline.

mod eigen;
mod kmeans;
mod operator;
mod qr;
mod spectral;
mod subspace;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use eigen::{symmetric_eig_reference, SymmetricEigen};
pub use kmeans::{kmeans, kmeans_detailed, KMeansOutcome, MAX_LLOYD_ITERATIONS};
pub use operator::LinearOperator;
pub use qr::{reduced_qr, Qr};
pub(crate) use spectral::cluster_rows;
pub use spectral::{
    global_spectral_clustering, global_spectral_clustering_with, spectral_clustering,
    spectral_embedding, EigenStrategy, SpectralClustering, SpectralEmbedding, SpectralOptions,
};
pub use subspace::{
    bottom_k_eigenpairs, bottom_k_eigenvectors, max_principal_angle, subspace_drift, EigenSubspace,
    SubspaceOptions,
};

/// Dense `N x K` block of candidate eigenvectors, one row per node.
pub type EmbeddingMatrix = Array2<f64>;

/// Cluster id per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labeling(Vec<usize>);

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Labeling(labels)
    }

    /// Checks every label is below `k`.
    pub fn with_clusters(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::contract(format!(
                "label {l} of node {i} outside [0, {k})"
            )));
        }
        Ok(Labeling(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Number of distinct labels in use.
    pub fn distinct(&self) -> usize {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v.len()
    }
}

impl std::ops::Index<usize> for Labeling {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

pub(crate) fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

pub(crate) fn all_finite(a: &Array2<f64>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Flips each column so its first significant entry is positive.
pub(crate) fn canonical_column_signs(v: &mut Array2<f64>) {
    for mut col in v.columns_mut() {
        let scale = col.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
        if scale == 0.0 {
            continue;
        }
        let lead = col
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-8 * scale)
            .unwrap_or(0.0);
        if lead < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Max deviation of `vᵀv` from the identity.
pub fn orthonormality_error(v: &Array2<f64>) -> f64 {
    let g = v.t().dot(v);
    let mut worst = 0.0_f64;
    for ((i, j), &x) in g.indexed_iter() {
        let want = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((x - want).abs());
    }
    worst
}

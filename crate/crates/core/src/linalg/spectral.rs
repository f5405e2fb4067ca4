use ndarray::{s, Array2};

use super::{bottom_k_eigenpairs, kmeans, symmetric_eig_reference, Labeling, SubspaceOptions};
use crate::error::Result;
use crate::graph::{normalized_laplacian, Graph, LaplacianMatrix};

/// Which eigensolver produces the bottom-`k` embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenStrategy {
    /// Dense reference solver up to `dense_limit` nodes, orthogonal iteration above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub strategy: EigenStrategy,
    pub dense_limit: usize,
    /// Scale embedding rows to unit length before k-means. Off by default.
    pub normalize_rows: bool,
    pub subspace: SubspaceOptions,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            strategy: EigenStrategy::Auto,
            dense_limit: 400,
            normalize_rows: false,
            subspace: SubspaceOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub vectors: Array2<f64>,
    pub values: Vec<f64>,
    pub boundary_gap: Option<f64>,
    pub converged: bool,
}

impl SpectralEmbedding {
    pub fn is_degenerate(&self) -> bool {
        self.boundary_gap.is_some_and(|g| g < 1e-8)
    }
}

#[derive(Debug, Clone)]
pub struct SpectralClustering {
    pub labels: Labeling,
    pub embedding: SpectralEmbedding,
}

/// Bottom-`k` eigenvectors of `l` using the configured solver.
pub fn spectral_embedding(
    l: &LaplacianMatrix,
    k: usize,
    seed: u64,
    opts: &SpectralOptions,
) -> Result<SpectralEmbedding> {
    let dense = match opts.strategy {
        EigenStrategy::Dense => true,
        EigenStrategy::Iterative => false,
        EigenStrategy::Auto => l.dim() <= opts.dense_limit,
    };
    if dense {
        if k == 0 || k > l.dim() {
            return Err(crate::Error::contract(format!(
                "need 1 <= k <= N, got k = {k}, N = {}",
                l.dim()
            )));
        }
        let eig = symmetric_eig_reference(l.matrix())?;
        Ok(SpectralEmbedding {
            vectors: eig.vectors.slice(s![.., ..k]).to_owned(),
            boundary_gap: eig.values.get(k).map(|&next| next - eig.values[k - 1]),
            values: eig.values[..k].to_vec(),
            converged: true,
        })
    } else {
        let e = bottom_k_eigenpairs(l, k, seed, &opts.subspace)?;
        Ok(SpectralEmbedding {
            vectors: e.vectors,
            values: e.values,
            boundary_gap: e.boundary_gap,
            converged: e.converged,
        })
    }
}

/// Laplacian -> bottom-`k` eigenvectors -> k-means on node rows.
///
/// `seed` drives k-means directly; the iterative solver's start block uses a
/// stream derived from it.
pub fn spectral_clustering(
    l: &LaplacianMatrix,
    k: usize,
    seed: u64,
    opts: &SpectralOptions,
) -> Result<SpectralClustering> {
    let embedding = spectral_embedding(l, k, seed, opts)?;
    let labels = cluster_rows(&embedding.vectors, k, seed, opts.normalize_rows)?;
    Ok(SpectralClustering { labels, embedding })
}

/// k-means over the rows of an embedding, optionally length-normalized.
pub(crate) fn cluster_rows(
    vectors: &Array2<f64>,
    k: usize,
    seed: u64,
    normalize_rows: bool,
) -> Result<Labeling> {
    if normalize_rows {
        let mut v = vectors.clone();
        for mut row in v.rows_mut() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|x| x / norm);
            }
        }
        kmeans(&v, k, seed)
    } else {
        kmeans(vectors, k, seed)
    }
}

/// Spectral clustering of the whole, undistributed graph: the reference that
/// federated outputs are scored against.
pub fn global_spectral_clustering(g: &Graph, k: usize, seed: u64) -> Result<Labeling> {
    global_spectral_clustering_with(g, k, seed, &SpectralOptions::default()).map(|c| c.labels)
}

pub fn global_spectral_clustering_with(
    g: &Graph,
    k: usize,
    seed: u64,
    opts: &SpectralOptions,
) -> Result<SpectralClustering> {
    spectral_clustering(&normalized_laplacian(g), k, seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> Graph {
        Graph::from_pairs(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    #[test]
    fn disjoint_triangles_split_by_component() {
        for strategy in [EigenStrategy::Dense, EigenStrategy::Iterative] {
            let opts = SpectralOptions {
                strategy,
                ..SpectralOptions::default()
            };
            let c = global_spectral_clustering_with(&two_triangles(), 2, 4, &opts).unwrap();
            let l = c.labels.as_slice();
            assert_eq!(l[0], l[1]);
            assert_eq!(l[1], l[2]);
            assert_eq!(l[3], l[4]);
            assert_eq!(l[4], l[5]);
            assert_ne!(l[0], l[3]);
        }
    }

    #[test]
    fn repeatable() {
        let g = two_triangles();
        assert_eq!(
            global_spectral_clustering(&g, 2, 8).unwrap(),
            global_spectral_clustering(&g, 2, 8).unwrap()
        );
    }

    #[test]
    fn row_normalization_variant_runs() {
        let opts = SpectralOptions {
            normalize_rows: true,
            ..SpectralOptions::default()
        };
        let c = global_spectral_clustering_with(&two_triangles(), 2, 1, &opts).unwrap();
        assert_eq!(c.labels.distinct(), 2);
    }
}

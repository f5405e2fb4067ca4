//! FedSpectral: clients cluster their shards locally and send labels; the
//! server fuses the labelings into a co-membership graph and clusters it.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{normalized_laplacian, LaplacianMatrix};
use crate::linalg::{spectral_clustering, Labeling, SpectralOptions};
use crate::par::{self, Schedule};
use crate::partition::ClientShard;
use crate::seed;

/// What one client reports, plus local diagnostics that never leave the
/// client in a real deployment.
#[derive(Debug, Clone)]
pub struct ClientLabels {
    pub client_id: usize,
    pub labels: Labeling,
    /// The shard holds no edges; its Laplacian is zero.
    pub empty_shard: bool,
    /// Nodes with no edge in this shard.
    pub isolated_nodes: usize,
    /// `λ_{k+1} - λ_k` of the shard Laplacian.
    pub boundary_gap: Option<f64>,
}

impl ClientLabels {
    pub fn is_degenerate(&self) -> bool {
        self.empty_shard || self.boundary_gap.is_some_and(|g| g < 1e-8)
    }
}

/// Local spectral clustering of one shard.
pub fn get_client_labels(
    shard: &ClientShard,
    num_clusters: usize,
    seed: u64,
    opts: &SpectralOptions,
) -> Result<ClientLabels> {
    let l = normalized_laplacian(shard.graph());
    let isolated_nodes = shard
        .graph()
        .degrees()
        .iter()
        .filter(|&&d| d == 0.0)
        .count();
    let c = spectral_clustering(&l, num_clusters, seed, opts)?;
    let empty_shard = shard.edges().is_empty();
    if empty_shard {
        log::warn!("client {}: degenerate shard (no edges)", shard.client_id());
    }
    Ok(ClientLabels {
        client_id: shard.client_id(),
        labels: c.labels,
        empty_shard,
        isolated_nodes,
        boundary_gap: c.embedding.boundary_gap,
    })
}

/// Fraction of clients that put each node pair in the same cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph(Array2<f64>);

impl SimilarityGraph {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Normalized Laplacian of the similarity graph with its diagonal zeroed.
    pub fn laplacian(&self) -> Result<LaplacianMatrix> {
        let mut adj = self.0.clone();
        adj.diag_mut().fill(0.0);
        LaplacianMatrix::from_adjacency(&adj)
    }
}

/// Entry `(i, j)` is the number of labelings with `labels[i] == labels[j]`,
/// divided by `num_clients`. The diagonal is 1.
pub fn build_similarity_graph(
    labelings: &[Labeling],
    num_clients: usize,
) -> Result<SimilarityGraph> {
    if labelings.len() != num_clients || num_clients == 0 {
        return Err(Error::contract(format!(
            "expected {num_clients} labelings, got {}",
            labelings.len()
        )));
    }
    let n = labelings[0].len();
    if let Some(bad) = labelings.iter().find(|l| l.len() != n) {
        return Err(Error::contract(format!(
            "labeling length {} differs from {n}",
            bad.len()
        )));
    }
    let mut counts = Array2::<f64>::zeros((n, n));
    for labeling in labelings {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (node, &label) in labeling.as_slice().iter().enumerate() {
            groups.entry(label).or_default().push(node);
        }
        for members in groups.values() {
            for &i in members {
                for &j in members {
                    counts[[i, j]] += 1.0;
                }
            }
        }
    }
    let scale = num_clients as f64;
    counts.mapv_inplace(|c| c / scale);
    Ok(SimilarityGraph(counts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub num_clusters: usize,
    pub seed: u64,
    pub spectral: SpectralOptions,
    pub schedule: Schedule,
}

impl BaselineConfig {
    pub fn new(num_clusters: usize, seed: u64) -> Self {
        BaselineConfig {
            num_clusters,
            seed,
            spectral: SpectralOptions::default(),
            schedule: Schedule::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub labels: Labeling,
    pub clients: Vec<ClientLabels>,
    /// Spectral gap at the cluster boundary of the similarity-graph Laplacian.
    pub server_boundary_gap: Option<f64>,
}

/// Server side of FedSpectral; returns the global aggregated clustering.
pub fn fedspectral_server(
    shards: &[ClientShard],
    num_clusters: usize,
    seed: u64,
) -> Result<Labeling> {
    run_fedspectral(shards, &BaselineConfig::new(num_clusters, seed)).map(|o| o.labels)
}

/// Collects every client's labels (concurrently when scheduled so), builds
/// the similarity graph and clusters it.
pub fn run_fedspectral(shards: &[ClientShard], cfg: &BaselineConfig) -> Result<BaselineOutcome> {
    let n = shards
        .first()
        .ok_or_else(|| Error::contract("no client shards"))?
        .num_nodes();
    if shards.iter().any(|s| s.num_nodes() != n) {
        return Err(Error::contract("shards disagree on the node universe"));
    }
    let clients: Vec<ClientLabels> = par::map(cfg.schedule, shards, |shard| {
        let s = seed::client_seed(cfg.seed, shard.client_id());
        get_client_labels(shard, cfg.num_clusters, s, &cfg.spectral)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let labelings: Vec<Labeling> = clients.iter().map(|c| c.labels.clone()).collect();
    let similarity = build_similarity_graph(&labelings, shards.len())?;
    let l = similarity.laplacian()?;
    drop(similarity);
    let server = spectral_clustering(&l, cfg.num_clusters, cfg.seed, &cfg.spectral)?;
    Ok(BaselineOutcome {
        labels: server.labels,
        clients,
        server_boundary_gap: server.embedding.boundary_gap,
    })
}

//! Federated spectral clustering simulator.
//!
//! Two protocols are provided over edge-partitioned graphs:
//!
//! * [`baseline`]: every client clusters its shard locally; the server fuses
//!   the labelings into a co-membership graph and clusters that.
//! * [`plus`]: server-coordinated orthogonal iteration. Clients apply power
//!   iterations of `I - L` on their shard; the server averages the returned
//!   blocks and re-orthonormalizes them.
//!
//! Outputs are scored against spectral clustering of the whole graph with
//! [`metrics::cluster_similarity`].

pub mod baseline;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod partition;
pub mod plus;
pub mod seed;

pub use error::{Error, Result};
pub use graph::{normalized_laplacian, parse_edge_list, Edge, Graph, LaplacianMatrix, ParseReport};
pub use linalg::{global_spectral_clustering, EmbeddingMatrix, Labeling};
pub use metrics::{cluster_similarity, SimilarityScore};

pub use par::Schedule;
pub use partition::{distribute_edges, ClientShard, PartitionPlan};

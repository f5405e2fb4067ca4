//! Edge distribution across simulated clients.
//!
//! Each client starts from an empty adjacency over the full node universe;
//! every edge is then handed to `r` distinct clients drawn uniformly at random.

use std::fmt::Write as _;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::seed;

/// How many clients exist and how many of them hold each edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionPlan {
    pub num_clients: usize,
    pub replication: usize,
    pub seed: u64,
}

impl PartitionPlan {
    /// Maps an overlap fraction to a replication count:
    /// `r = max(1, round(overlap * num_clients))`.
    pub fn from_overlap(num_clients: usize, overlap: f64, seed: u64) -> Result<Self> {
        if !(overlap > 0.0 && overlap <= 1.0) {
            return Err(Error::config(format!(
                "overlap must lie in (0, 1], got {overlap}"
            )));
        }
        let replication = ((overlap * num_clients as f64).round() as usize).max(1);
        Self::with_replication(num_clients, replication, seed)
    }

    pub fn with_replication(num_clients: usize, replication: usize, seed: u64) -> Result<Self> {
        if num_clients == 0 {
            return Err(Error::config("need at least one client"));
        }
        if replication == 0 || replication > num_clients {
            return Err(Error::config(format!(
                "replication must lie in [1, {num_clients}], got {replication}"
            )));
        }
        Ok(PartitionPlan {
            num_clients,
            replication,
            seed,
        })
    }

    /// Fraction of clients holding each edge.
    pub fn overlap(&self) -> f64 {
        self.replication as f64 / self.num_clients as f64
    }
}

/// One client's private edges over the full node universe. Nodes with no local
/// edges are simply isolated.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    client_id: usize,
    graph: Graph,
}

impl ClientShard {
    pub fn new(client_id: usize, graph: Graph) -> Self {
        ClientShard { client_id, graph }
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn edges(&self) -> &[Edge] {
        self.graph.edges()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// SNAP edge-list text in original node ids, with a header comment
    /// recording the plan that produced the shard.
    pub fn to_edge_list(&self, plan: &PartitionPlan) -> String {
        let ids = self.graph.original_ids();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# client_id={} num_clients={} replication={} seed={} num_nodes={} num_edges={}",
            self.client_id,
            plan.num_clients,
            plan.replication,
            plan.seed,
            self.num_nodes(),
            self.graph.num_edges()
        );
        for e in self.edges() {
            if e.weight == 1.0 {
                let _ = writeln!(out, "{} {}", ids[e.u], ids[e.v]);
            } else {
                let _ = writeln!(out, "{} {} {}", ids[e.u], ids[e.v], e.weight);
            }
        }
        out
    }
}

/// Distributes `g` over `num_clients` shards with the given overlap fraction.
pub fn distribute_edges(
    g: &Graph,
    num_clients: usize,
    overlap: f64,
    seed: u64,
) -> Result<Vec<ClientShard>> {
    distribute_with_plan(g, &PartitionPlan::from_overlap(num_clients, overlap, seed)?)
}

/// Each edge, in sorted order, goes to `plan.replication` distinct clients
/// sampled without replacement from one seeded stream.
pub fn distribute_with_plan(g: &Graph, plan: &PartitionPlan) -> Result<Vec<ClientShard>> {
    let mut rng = seed::rng(seed::derive_seed(plan.seed, seed::tag::PARTITION, 0));
    let mut buckets: Vec<Vec<Edge>> = vec![Vec::new(); plan.num_clients];
    for &e in g.edges() {
        for c in index::sample(&mut rng, plan.num_clients, plan.replication) {
            buckets[c].push(e);
        }
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(id, edges)| Ok(ClientShard::new(id, g.with_edges(edges)?)))
        .collect()
}

//! FedSpectral+: federated orthogonal iteration.
//!
//! The server owns an `N x K` embedding `v`. Each global round it broadcasts
//! `v`; every client multiplies it `iters` times by `M = I - L` of its own
//! shard and sends the result back; the server averages the replies and
//! re-orthonormalizes with a reduced QR. After the last round the rows of `v`
//! are clustered with k-means.
//!
//! The server talks to clients only through a [`Transport`], whose payloads are
//! [`RoundMessage`]s carrying embeddings. Shard edges stay inside
//! [`PowerIterationClient`].
//!
//! # Wire format
//!
//! [`RoundMessage::encode`] produces, little-endian throughout:
//!
//! | bytes        | field                                             |
//! |--------------|---------------------------------------------------|
//! | 1            | kind: `0` broadcast (server→client), `1` update   |
//! | 8 (`u64`)    | round index (broadcast) or client id (update)     |
//! | 8 (`u64`)    | `N`, rows                                         |
//! | 8 (`u64`)    | `K`, columns                                      |
//! | `8·N·K`      | entries as `f64`, row-major                       |

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::normalized_laplacian;
use crate::linalg::{
    all_finite, cluster_rows, max_abs, orthonormality_error, reduced_qr, subspace_drift,
    EmbeddingMatrix, Labeling, LinearOperator,
};
use crate::par::{self, Schedule};
use crate::partition::ClientShard;
use crate::seed;

/// A payload crossing the client/server boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundMessage {
    Broadcast {
        round: usize,
        embedding: EmbeddingMatrix,
    },
    Update {
        client_id: usize,
        embedding: EmbeddingMatrix,
    },
}

const KIND_BROADCAST: u8 = 0;
const KIND_UPDATE: u8 = 1;
const HEADER_LEN: usize = 25;

impl RoundMessage {
    pub fn embedding(&self) -> &EmbeddingMatrix {
        match self {
            RoundMessage::Broadcast { embedding, .. } | RoundMessage::Update { embedding, .. } => {
                embedding
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (kind, tag) = match self {
            RoundMessage::Broadcast { round, .. } => (KIND_BROADCAST, *round),
            RoundMessage::Update { client_id, .. } => (KIND_UPDATE, *client_id),
        };
        let v = self.embedding();
        let (n, k) = v.dim();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * k);
        out.push(kind);
        out.extend_from_slice(&(tag as u64).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(k as u64).to_le_bytes());
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::contract("message shorter than its header"));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let tag = word(1) as usize;
        let n = word(9) as usize;
        let k = word(17) as usize;
        let body = &bytes[HEADER_LEN..];
        if n.checked_mul(k).and_then(|c| c.checked_mul(8)) != Some(body.len()) {
            return Err(Error::contract(format!(
                "payload of {} bytes does not hold a {n} x {k} block",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let embedding = Array2::from_shape_vec((n, k), data).expect("length checked");
        match bytes[0] {
            KIND_BROADCAST => Ok(RoundMessage::Broadcast {
                round: tag,
                embedding,
            }),
            KIND_UPDATE => Ok(RoundMessage::Update {
                client_id: tag,
                embedding,
            }),
            other => Err(Error::contract(format!("unknown message kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedPlusConfig {
    pub num_clusters: usize,
    /// Power iterations per client per round.
    pub iters: usize,
    pub global_rounds: usize,
    pub seed: u64,
    /// Use `(I + M) / 2` instead of `M` on clients, which maps the spectrum
    /// into `[0, 1]` and removes sign oscillation on bipartite components.
    pub damping: bool,
    pub normalize_rows: bool,
    pub schedule: Schedule,
    /// Keep a copy of `v` after every round in the outcome.
    pub record_history: bool,
}

impl FedPlusConfig {
    pub fn new(num_clusters: usize, iters: usize, global_rounds: usize, seed: u64) -> Self {
        FedPlusConfig {
            num_clusters,
            iters,
            global_rounds,
            seed,
            damping: false,
            normalize_rows: false,
            schedule: Schedule::default(),
            record_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::config("num_clusters must be at least 1"));
        }
        if self.iters == 0 {
            return Err(Error::config("iters must be at least 1"));
        }
        if self.global_rounds == 0 {
            return Err(Error::config("global_rounds must be at least 1"));
        }
        Ok(())
    }
}

/// A client holding its shard's multiplier. Only embeddings go in or out.
#[derive(Debug, Clone)]
pub struct PowerIterationClient {
    client_id: usize,
    iters: usize,
    multiplier: LinearOperator,
}

impl PowerIterationClient {
    /// Builds `M = I - L` of the shard (or `(I + M)/2` when damped). Rows of
    /// shard-isolated nodes are zero in `L`, so `M` passes them through.
    pub fn new(shard: &ClientShard, iters: usize, damping: bool) -> Self {
        let mut m = normalized_laplacian(shard.graph()).into_inner();
        m.mapv_inplace(|x| -x);
        m.diag_mut().mapv_inplace(|x| x + 1.0);
        if damping {
            m.mapv_inplace(|x| 0.5 * x);
            m.diag_mut().mapv_inplace(|x| x + 0.5);
        }
        PowerIterationClient {
            client_id: shard.client_id(),
            iters,
            multiplier: LinearOperator::from_dense(&m),
        }
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    /// `M^iters · v`, no normalization in between.
    pub fn power_iterate(&self, v: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
        let mut out = self.multiplier.apply(v)?;
        for _ in 1..self.iters {
            out = self.multiplier.apply(&out)?;
        }
        Ok(out)
    }

    /// Answers a broadcast with an update.
    pub fn handle(&self, msg: &RoundMessage) -> Result<RoundMessage> {
        match msg {
            RoundMessage::Broadcast { embedding, .. } => Ok(RoundMessage::Update {
                client_id: self.client_id,
                embedding: self.power_iterate(embedding)?,
            }),
            RoundMessage::Update { .. } => Err(Error::contract("clients only accept broadcasts")),
        }
    }
}

/// One client's local step: `(I - L_shard)^iters · v`.
pub fn client_power_iteration(
    shard: &ClientShard,
    iters: usize,
    v: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    if iters == 0 {
        return Err(Error::contract("iters must be at least 1"));
    }
    if v.nrows() != shard.num_nodes() {
        return Err(Error::contract(format!(
            "embedding has {} rows, shard has {} nodes",
            v.nrows(),
            shard.num_nodes()
        )));
    }
    PowerIterationClient::new(shard, iters, false).power_iterate(v)
}

/// How the server reaches its clients.
pub trait Transport {
    fn num_clients(&self) -> usize;

    /// Delivers a broadcast to every client and returns their updates.
    fn exchange(&mut self, broadcast: &RoundMessage) -> Result<Vec<RoundMessage>>;
}

/// Clients living in the same process, driven serially or concurrently.
#[derive(Debug, Clone)]
pub struct InProcessTransport {
    clients: Vec<PowerIterationClient>,
    schedule: Schedule,
}

impl InProcessTransport {
    pub fn new(clients: Vec<PowerIterationClient>, schedule: Schedule) -> Self {
        InProcessTransport { clients, schedule }
    }

    pub fn from_shards(
        shards: &[ClientShard],
        iters: usize,
        damping: bool,
        schedule: Schedule,
    ) -> Self {
        let clients = par::map(schedule, shards, |s| {
            PowerIterationClient::new(s, iters, damping)
        });
        Self::new(clients, schedule)
    }
}

impl Transport for InProcessTransport {
    fn num_clients(&self) -> usize {
        self.clients.len()
    }

    fn exchange(&mut self, broadcast: &RoundMessage) -> Result<Vec<RoundMessage>> {
        par::map(self.schedule, &self.clients, |c| c.handle(broadcast))
            .into_iter()
            .collect()
    }
}

/// Averages client blocks in ascending client-id order and returns the Q factor
/// of the mean.
///
/// The mean is a running one (`m += (x - m) / c`), which leaves `m` bitwise
/// unchanged when every client returns the same block.
pub fn aggregate_round(client_outputs: &[EmbeddingMatrix]) -> Result<EmbeddingMatrix> {
    let first = client_outputs
        .first()
        .ok_or_else(|| Error::contract("no client outputs to aggregate"))?;
    let shape = first.dim();
    let mut mean = first.clone();
    for (c, x) in client_outputs.iter().enumerate().skip(1) {
        if x.dim() != shape {
            return Err(Error::contract(format!(
                "client {c} returned {:?}, expected {shape:?}",
                x.dim()
            )));
        }
        let weight = 1.0 / (c + 1) as f64;
        mean.zip_mut_with(x, |m, &xi| *m += (xi - *m) * weight);
    }
    Ok(reduced_qr(&mean)?.q)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RoundDiagnostics {
    pub round: usize,
    /// `max |v_t - v_{t-1} (v_{t-1}ᵀ v_t)|`.
    pub drift: f64,
    pub orthonormality_error: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone)]
pub struct FedPlusOutcome {
    pub labels: Labeling,
    pub embedding: EmbeddingMatrix,
    pub rounds: Vec<RoundDiagnostics>,
    /// `v` after each round when `record_history` is set.
    pub history: Vec<EmbeddingMatrix>,
}

/// Orthonormalized Gaussian start block.
pub fn initial_embedding(
    num_nodes: usize,
    num_clusters: usize,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    if num_clusters > num_nodes {
        return Err(Error::contract(format!(
            "num_clusters {num_clusters} exceeds node count {num_nodes}"
        )));
    }
    let mut rng = seed::rng(seed::derive_seed(seed, seed::tag::FED_PLUS_INIT, 0));
    let v = Array2::from_shape_simple_fn((num_nodes, num_clusters), || {
        StandardNormal.sample(&mut rng)
    });
    Ok(reduced_qr(&v)?.q)
}

/// The server's round loop. It sees clients only through `transport`.
pub fn run_server<T: Transport>(
    transport: &mut T,
    num_nodes: usize,
    cfg: &FedPlusConfig,
) -> Result<FedPlusOutcome> {
    cfg.validate()?;
    let num_clients = transport.num_clients();
    if num_clients == 0 {
        return Err(Error::contract("no clients"));
    }
    let mut v = initial_embedding(num_nodes, cfg.num_clusters, cfg.seed)?;
    let mut rounds = Vec::with_capacity(cfg.global_rounds);
    let mut history = Vec::new();

    for round in 0..cfg.global_rounds {
        let mut step = || -> Result<EmbeddingMatrix> {
            let broadcast = RoundMessage::Broadcast {
                round,
                embedding: v.clone(),
            };
            let replies = transport.exchange(&broadcast)?;
            let mut slots: Vec<Option<EmbeddingMatrix>> = vec![None; num_clients];
            for reply in replies {
                let RoundMessage::Update {
                    client_id,
                    embedding,
                } = reply
                else {
                    return Err(Error::contract("client replied with a broadcast"));
                };
                if embedding.dim() != v.dim() {
                    return Err(Error::contract(format!(
                        "client {client_id} returned {:?}, expected {:?}",
                        embedding.dim(),
                        v.dim()
                    )));
                }
                if !all_finite(&embedding) {
                    return Err(Error::Numerical(format!(
                        "client {client_id} returned non-finite entries"
                    )));
                }
                match slots.get_mut(client_id) {
                    Some(slot @ None) => *slot = Some(embedding),
                    _ => {
                        return Err(Error::contract(format!(
                            "unexpected reply from client {client_id}"
                        )))
                    }
                }
            }
            let outputs: Vec<EmbeddingMatrix> = slots
                .into_iter()
                .enumerate()
                .map(|(c, s)| s.ok_or_else(|| Error::contract(format!("client {c} did not reply"))))
                .collect::<Result<_>>()?;
            aggregate_round(&outputs)
        };
        let next = step().map_err(|e| Error::Round {
            round,
            source: Box::new(e),
        })?;

        let peak = max_abs(&next);
        if !all_finite(&next) || peak > 1.0 + 1e-12 {
            return Err(Error::Round {
                round,
                source: Box::new(Error::Numerical(format!(
                    "aggregate escaped the unit ball ({peak})"
                ))),
            });
        }
        rounds.push(RoundDiagnostics {
            round,
            drift: subspace_drift(&v, &next),
            orthonormality_error: orthonormality_error(&next),
            max_abs: peak,
        });
        v = next;
        if cfg.record_history {
            history.push(v.clone());
        }
    }

    let labels = cluster_rows(&v, cfg.num_clusters, cfg.seed, cfg.normalize_rows)?;
    Ok(FedPlusOutcome {
        labels,
        embedding: v,
        rounds,
        history,
    })
}

/// Runs FedSpectral+ over in-process clients built from `shards`.
pub fn run_fedspectral_plus(shards: &[ClientShard], cfg: &FedPlusConfig) -> Result<FedPlusOutcome> {
    cfg.validate()?;
    let n = shards
        .first()
        .ok_or_else(|| Error::contract("no client shards"))?
        .num_nodes();
    if shards.iter().any(|s| s.num_nodes() != n) {
        return Err(Error::contract("shards disagree on the node universe"));
    }
    let mut transport =
        InProcessTransport::from_shards(shards, cfg.iters, cfg.damping, cfg.schedule);
    run_server(&mut transport, n, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use ndarray::arr2;

    fn shard(n: usize, pairs: &[(usize, usize)]) -> ClientShard {
        ClientShard::new(0, Graph::from_pairs(n, pairs).unwrap())
    }

    #[test]
    fn single_edge_swaps_rows() {
        let out = client_power_iteration(&shard(2, &[(0, 1)]), 1, &arr2(&[[1.0], [0.0]])).unwrap();
        assert_eq!(out, arr2(&[[0.0], [1.0]]));
    }

    #[test]
    fn isolated_node_passes_through() {
        let s = shard(4, &[(0, 1), (1, 2)]);
        let v = arr2(&[[0.3, -1.0], [0.2, 0.5], [-0.7, 0.1], [1.25, -2.5]]);
        for iters in [1, 2, 7] {
            let out = client_power_iteration(&s, iters, &v).unwrap();
            assert_eq!(out.row(3), v.row(3));
        }
    }

    #[test]
    fn triangle_fixes_constant_vector() {
        // M = A/2 for K3 and A·1 = 2·1.
        let s = shard(3, &[(0, 1), (1, 2), (0, 2)]);
        let v = arr2(&[[1.0], [1.0], [1.0]]);
        for iters in [1, 3, 10] {
            let out = client_power_iteration(&s, iters, &v).unwrap();
            assert!(out.iter().all(|x| (x - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let s = shard(3, &[(0, 1)]);
        assert!(matches!(
            client_power_iteration(&s, 1, &Array2::zeros((2, 1))),
            Err(Error::Contract(_))
        ));
        assert!(client_power_iteration(&s, 0, &Array2::zeros((3, 1))).is_err());
    }

    #[test]
    fn aggregate_of_identical_blocks_is_their_q() {
        let x = arr2(&[[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]]);
        let q = reduced_qr(&x).unwrap().q;
        assert_eq!(
            aggregate_round(&[x.clone(), x.clone(), x.clone()]).unwrap(),
            q
        );
        assert_eq!(aggregate_round(std::slice::from_ref(&x)).unwrap(), q);
    }

    #[test]
    fn cancelling_clients_are_rank_deficient() {
        let x = arr2(&[[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]]);
        assert!(matches!(
            aggregate_round(&[x.clone(), -x]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn rank_error_carries_round_index() {
        struct Cancelling;
        impl Transport for Cancelling {
            fn num_clients(&self) -> usize {
                2
            }
            fn exchange(&mut self, b: &RoundMessage) -> Result<Vec<RoundMessage>> {
                let v = b.embedding().clone();
                Ok(vec![
                    RoundMessage::Update {
                        client_id: 0,
                        embedding: v.clone(),
                    },
                    RoundMessage::Update {
                        client_id: 1,
                        embedding: -v,
                    },
                ])
            }
        }
        let cfg = FedPlusConfig::new(2, 1, 3, 0);
        match run_server(&mut Cancelling, 5, &cfg) {
            Err(Error::Round { round, source }) => {
                assert_eq!(round, 0);
                assert!(matches!(*source, Error::RankDeficient { .. }));
            }
            other => panic!("expected round error, got {other:?}"),
        }
    }

    #[test]
    fn message_round_trip_and_layout() {
        let msg = RoundMessage::Update {
            client_id: 3,
            embedding: arr2(&[[1.5, -2.0], [0.0, 4.25], [7.0, 8.0]]),
        };
        let bytes = msg.encode();
        assert_eq!(bytes.len(), 25 + 8 * 6);
        assert_eq!(bytes[0], 1);
        assert_eq!(&bytes[1..9], &3u64.to_le_bytes());
        assert_eq!(&bytes[9..17], &3u64.to_le_bytes());
        assert_eq!(&bytes[17..25], &2u64.to_le_bytes());
        assert_eq!(&bytes[25..33], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[33..41], &(-2.0f64).to_le_bytes());
        assert_eq!(RoundMessage::decode(&bytes).unwrap(), msg);
        assert!(RoundMessage::decode(&bytes[..30]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FedPlusConfig::new(2, 0, 1, 0).validate().is_err());
        assert!(FedPlusConfig::new(2, 1, 0, 0).validate().is_err());
        assert!(FedPlusConfig::new(0, 1, 1, 0).validate().is_err());
        assert!(FedPlusConfig::new(2, 1, 1, 0).validate().is_ok());
    }

    #[test]
    fn rounds_keep_orthonormal_columns() {
        let g = Graph::from_pairs(
            8,
            &[
                (0, 1),
                (1, 2),
                (2, 3),
                (3, 0),
                (4, 5),
                (5, 6),
                (6, 7),
                (7, 4),
                (3, 4),
            ],
        )
        .unwrap();
        let shards = crate::partition::distribute_edges(&g, 3, 0.4, 2).unwrap();
        let out = run_fedspectral_plus(&shards, &FedPlusConfig::new(2, 2, 5, 9)).unwrap();
        assert_eq!(out.rounds.len(), 5);
        assert!(out.rounds.iter().all(|r| r.orthonormality_error <= 1e-10));
        assert_eq!(out.labels.len(), 8);
    }
}

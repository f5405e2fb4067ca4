//! Deterministic property criteria. Each check returns a one-line summary on
//! success and the first counterexample on failure.

use std::collections::VecDeque;

use fedspectral::baseline::build_similarity_graph;
use fedspectral::linalg::{
    bottom_k_eigenvectors, reduced_qr, symmetric_eig_reference, SymmetricEigen,
};
use fedspectral::metrics::mismatch_count;
use fedspectral::plus::{
    run_fedspectral_plus, run_server, FedPlusConfig, InProcessTransport, RoundMessage, Transport,
};
use fedspectral::{
    cluster_similarity, distribute_edges, global_spectral_clustering, normalized_laplacian,
    ClientShard, Labeling, Result as FsResult, Schedule,
};
use rand::seq::SliceRandom;
use rand::Rng;

use super::*;

pub type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

pub fn qr_round_trip() -> Check {
    let mut rng = rng(0x51);
    let (mut worst_rt, mut worst_orth) = (0.0_f64, 0.0_f64);
    for case in 0..200 {
        let m = rng.random_range(1..=40);
        let n = rng.random_range(1..=m);
        let a = gaussian_matrix(m, n, &mut rng);
        let qr = reduced_qr(&a).map_err(|e| format!("case {case} ({m}x{n}): {e}"))?;
        ensure!(
            qr.q.dim() == (m, n) && qr.r.dim() == (n, n),
            "case {case}: bad factor shapes"
        );
        for i in 0..n {
            ensure!(qr.r[[i, i]] >= 0.0, "case {case}: negative diagonal in R");
            for j in 0..i {
                ensure!(qr.r[[i, j]] == 0.0, "case {case}: R not upper triangular");
            }
        }
        let rt = max_abs_diff(&qr.q.dot(&qr.r), &a);
        let orth = orthonormality_gap(&qr.q);
        ensure!(rt <= 1e-8, "case {case} ({m}x{n}): |QR - A| = {rt:e}");
        ensure!(orth <= 1e-10, "case {case} ({m}x{n}): |QtQ - I| = {orth:e}");
        worst_rt = worst_rt.max(rt);
        worst_orth = worst_orth.max(orth);
    }
    Ok(format!(
        "200 matrices, max |QR-A| = {worst_rt:.1e}, max |QtQ-I| = {worst_orth:.1e}"
    ))
}

fn eigen_residual(a: &Array2<f64>, eig: &SymmetricEigen) -> f64 {
    let av = a.dot(&eig.vectors);
    let mut worst = 0.0_f64;
    for (c, &lambda) in eig.values.iter().enumerate() {
        for r in 0..a.nrows() {
            worst = worst.max((av[[r, c]] - lambda * eig.vectors[[r, c]]).abs());
        }
    }
    worst
}

pub fn eigen_residuals() -> Check {
    let mut rng = rng(0xE16);
    let mut worst = 0.0_f64;
    for case in 0..100 {
        let n = rng.random_range(1..=64);
        let a = random_symmetric(n, &mut rng);
        let eig = symmetric_eig_reference(&a).map_err(|e| format!("case {case}: {e}"))?;
        let res = eigen_residual(&a, &eig);
        ensure!(res <= 1e-8, "case {case} (N={n}): residual {res:e}");
        ensure!(
            eig.values.windows(2).all(|w| w[0] <= w[1]),
            "case {case}: eigenvalues not ascending"
        );
        let orth = orthonormality_gap(&eig.vectors);
        ensure!(
            orth <= 1e-10,
            "case {case}: eigenvectors off orthonormal by {orth:e}"
        );
        let trace: f64 = a.diag().sum();
        let sum: f64 = eig.values.iter().sum();
        ensure!(
            (trace - sum).abs() <= 1e-9 * (1.0 + trace.abs()),
            "case {case}: trace {trace} vs eigenvalue sum {sum}"
        );
        worst = worst.max(res);
    }
    Ok(format!("100 matrices N <= 64, max residual {worst:.1e}"))
}

pub fn bottom_k_agreement() -> Check {
    let mut rng = rng(0xB07);
    let (mut tested, mut skipped, mut worst) = (0, 0, 0.0_f64);
    for case in 0..40 {
        let n = rng.random_range(20..=200);
        let k = rng.random_range(2..=6);
        let g = planted_partition(n, k, 0.3, 0.01, &mut rng);
        let l = normalized_laplacian(&g);
        let eig = symmetric_eig_reference(l.matrix()).map_err(|e| e.to_string())?;
        if eig.values[k] - eig.values[k - 1] < 1e-3 {
            skipped += 1;
            continue;
        }
        let reference = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
        let got = bottom_k_eigenvectors(&l, k, case).map_err(|e| format!("case {case}: {e}"))?;
        let angle = principal_angle_bound(&reference, &got);
        ensure!(
            angle < 1e-6,
            "case {case} (N={n}, k={k}): principal angle {angle:e}"
        );
        worst = worst.max(angle);
        tested += 1;
    }
    ensure!(tested >= 30, "only {tested} graphs had a spectral gap");
    Ok(format!(
        "{tested} graphs N <= 200 ({skipped} without a gap skipped), max angle {worst:.1e}"
    ))
}

/// With one client holding the whole graph, FedSpectral+ is orthogonal
/// iteration on the full multiplier. The damped multiplier preserves the
/// eigenvalue order, so it must match on every graph; the plain `I - L` only
/// converges to the bottom-k subspace when `1 - λ_k` dominates `|1 - λ_max|`,
/// and is required to match on exactly those graphs.
pub fn single_client_equivalence() -> Check {
    let mut rng = rng(0x51C);
    let mut premise = 0;
    for case in 0..20 {
        let n = rng.random_range(12..=60);
        let k = rng.random_range(2..=4);
        let g = planted_partition(n, k, 0.6, 0.02, &mut rng);
        let seed = rng.random();
        let global = global_spectral_clustering(&g, k, seed).map_err(|e| e.to_string())?;
        let values = symmetric_eig_reference(normalized_laplacian(&g).matrix())
            .map_err(|e| e.to_string())?
            .values;
        let bottom = 1.0 - values[k - 1];
        let competitor = (1.0 - values[k]).abs().max((1.0 - values[n - 1]).abs());
        let plain_converges = competitor < 0.95 * bottom;
        premise += usize::from(plain_converges);
        for damping in [true, false] {
            if !damping && !plain_converges {
                continue;
            }
            let cfg = FedPlusConfig {
                damping,
                ..FedPlusConfig::new(k, 1, 200, seed)
            };
            let plus = run_fedspectral_plus(&[ClientShard::new(0, g.clone())], &cfg)
                .map_err(|e| format!("case {case}: {e}"))?;
            ensure!(
                plus.labels == global,
                "case {case} (N={n}, k={k}, damping={damping}): labels differ\n  global {:?}\n  plus   {:?}",
                global.as_slice(),
                plus.labels.as_slice()
            );
        }
    }
    Ok(format!(
        "20 graphs N <= 60, C=1, 200 rounds: damped multiplier identical on 20/20; \
         plain I-L identical on all {premise} graphs where its dominant subspace is the bottom-k one"
    ))
}

pub fn full_overlap_reduction() -> Check {
    let mut rng = rng(0xF0);
    for case in 0..5 {
        let n = rng.random_range(20..=80);
        let k = rng.random_range(2..=4);
        let g = planted_partition(n, k, 0.4, 0.03, &mut rng);
        let shards = distribute_edges(&g, 3, 1.0, case).map_err(|e| e.to_string())?;
        ensure!(
            shards.iter().all(|s| s.edges() == g.edges()),
            "case {case}: full overlap shard differs from the graph"
        );
        let cfg = FedPlusConfig {
            record_history: true,
            ..FedPlusConfig::new(k, 2, 15, 1000 + case)
        };
        let one = run_fedspectral_plus(&[ClientShard::new(0, g.clone())], &cfg)
            .map_err(|e| e.to_string())?;
        let three = run_fedspectral_plus(&shards, &cfg).map_err(|e| e.to_string())?;
        for (r, (a, b)) in one.history.iter().zip(&three.history).enumerate() {
            let same = a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
            ensure!(
                same,
                "case {case}: round {r} differs (max {:e})",
                max_abs_diff(a, b)
            );
        }
        ensure!(
            one.history.len() == 15 && three.history.len() == 15,
            "history length"
        );
        ensure!(one.labels == three.labels, "case {case}: labels differ");
    }
    Ok("5 graphs, C=3 overlap=1.0 vs C=1: every round bitwise equal".into())
}

pub fn metric_oracle() -> Check {
    let mut rng = rng(0x3E7);
    for case in 0..100 {
        let n = rng.random_range(1..=300);
        let a = random_labeling(n, 12, &mut rng);
        let b = random_labeling(n, 12, &mut rng);
        let got = mismatch_count(&a, &b).map_err(|e| e.to_string())?;
        let want = mismatch_oracle(a.as_slice(), b.as_slice());
        ensure!(got == want, "case {case}: mismatch {got} vs oracle {want}");
        let score = cluster_similarity(&a, &b)
            .map_err(|e| e.to_string())?
            .value();
        ensure!(
            score == similarity_oracle(a.as_slice(), b.as_slice()),
            "case {case}: score differs from oracle"
        );
        ensure!(
            score >= 1.0 / n as f64 && score <= 1.0,
            "case {case}: score {score} out of range"
        );
        ensure!(
            cluster_similarity(&a, &a).unwrap().value() == 1.0,
            "case {case}: identity is not 1"
        );
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut rng);
        let relabel =
            |l: &Labeling| Labeling::new(l.as_slice().iter().map(|&x| perm[x] + 100).collect());
        let moved = cluster_similarity(&relabel(&a), &b).unwrap().value();
        let moved2 = cluster_similarity(&a, &relabel(&b)).unwrap().value();
        ensure!(
            moved == score && moved2 == score,
            "case {case}: relabeling changed the score"
        );
    }
    let same = Labeling::new(vec![0; 4]);
    let distinct = Labeling::new(vec![0, 1, 2, 3]);
    let four = cluster_similarity(&same, &distinct).unwrap().value();
    ensure!(four == 0.25, "N=4 example scored {four}");
    let back = cluster_similarity(&distinct, &same).unwrap().value();
    ensure!(back == 1.0, "swapped N=4 example scored {back}");
    Ok("100 pairs N <= 300 match oracle; identity, relabeling, N=4 = 0.25, asymmetry hold".into())
}

pub fn partitioner() -> Check {
    let mut rng = rng(0x9A7);
    for case in 0..50 {
        let n = rng.random_range(2..=120);
        let g = erdos_renyi(n, rng.random_range(0.02..0.3), &mut rng);
        let c = rng.random_range(1..=8);
        let overlap: f64 = rng.random_range(0.05..=1.0);
        let r = ((overlap * c as f64).round() as usize).max(1);
        let seed = rng.random();
        let shards = distribute_edges(&g, c, overlap, seed).map_err(|e| e.to_string())?;
        ensure!(
            shards.len() == c,
            "case {case}: {} shards for C={c}",
            shards.len()
        );
        for (i, s) in shards.iter().enumerate() {
            ensure!(
                s.client_id() == i && s.num_nodes() == n,
                "case {case}: shard {i} header"
            );
        }
        for e in g.edges() {
            let holders = shards
                .iter()
                .filter(|s| {
                    s.edges()
                        .binary_search_by_key(&(e.u, e.v), |x| (x.u, x.v))
                        .is_ok()
                })
                .count();
            ensure!(
                holders == r,
                "case {case}: edge held by {holders} clients, expected {r}"
            );
        }
        let total: usize = shards.iter().map(|s| s.edges().len()).sum();
        ensure!(
            total == r * g.num_edges(),
            "case {case}: replicated total {total}"
        );
        ensure!(
            shards.iter().all(|s| s.edges().iter().all(|e| g
                .edges()
                .binary_search_by_key(&(e.u, e.v), |x| (x.u, x.v))
                .is_ok())),
            "case {case}: shard edge not in graph"
        );
        let again = distribute_edges(&g, c, overlap, seed).map_err(|e| e.to_string())?;
        ensure!(again == shards, "case {case}: not deterministic");
    }
    Ok("50 graphs: exact replication, conservation, determinism".into())
}

struct Recording<T> {
    inner: T,
    replies: Vec<Vec<RoundMessage>>,
}

impl<T: Transport> Transport for Recording<T> {
    fn num_clients(&self) -> usize {
        self.inner.num_clients()
    }

    fn exchange(&mut self, broadcast: &RoundMessage) -> FsResult<Vec<RoundMessage>> {
        let replies = self.inner.exchange(broadcast)?;
        self.replies.push(replies.clone());
        Ok(replies)
    }
}

/// Hands back previously recorded replies. Holds no graph data at all.
struct Replay {
    clients: usize,
    replies: VecDeque<Vec<RoundMessage>>,
}

impl Transport for Replay {
    fn num_clients(&self) -> usize {
        self.clients
    }

    fn exchange(&mut self, _: &RoundMessage) -> FsResult<Vec<RoundMessage>> {
        Ok(self.replies.pop_front().expect("recorded round"))
    }
}

/// The server loop is driven only by `N x K` update messages: every reply is
/// an embedding of the broadcast's shape whose wire form is header plus
/// `8·N·K` bytes, and replaying those messages without any shard reproduces
/// the outcome.
pub fn privacy_boundary() -> Check {
    let mut rng = rng(0x9B);
    let g = planted_partition(90, 3, 0.3, 0.02, &mut rng);
    let (n, k) = (g.num_nodes(), 3);
    let shards = distribute_edges(&g, 4, 0.5, 7).map_err(|e| e.to_string())?;
    let cfg = FedPlusConfig::new(k, 2, 6, 21);
    let mut live = Recording {
        inner: InProcessTransport::from_shards(&shards, cfg.iters, cfg.damping, Schedule::Serial),
        replies: Vec::new(),
    };
    let outcome = run_server(&mut live, n, &cfg).map_err(|e| e.to_string())?;
    for (round, replies) in live.replies.iter().enumerate() {
        ensure!(
            replies.len() == 4,
            "round {round}: {} replies",
            replies.len()
        );
        for msg in replies {
            ensure!(
                matches!(msg, RoundMessage::Update { .. }),
                "round {round}: non-update reply"
            );
            ensure!(
                msg.embedding().dim() == (n, k),
                "round {round}: reply shape {:?}",
                msg.embedding().dim()
            );
            let wire = msg.encode();
            ensure!(
                wire.len() == 25 + 8 * n * k,
                "round {round}: wire size {}",
                wire.len()
            );
            ensure!(
                RoundMessage::decode(&wire).map_err(|e| e.to_string())? == *msg,
                "round {round}: wire round-trip lost data"
            );
        }
    }
    let mut replay = Replay {
        clients: 4,
        replies: live.replies.into_iter().collect(),
    };
    let replayed = run_server(&mut replay, n, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        replayed.labels == outcome.labels && replayed.embedding == outcome.embedding,
        "server outcome depends on more than the update messages"
    );
    Ok(format!(
        "server consumed only {n}x{k} update messages ({} bytes each); replay without shards reproduces the outcome",
        25 + 8 * n * k
    ))
}

pub fn similarity_graph_matches_oracle() -> Check {
    let mut rng = rng(0x5A);
    for case in 0..30 {
        let n = rng.random_range(1..=40);
        let c = rng.random_range(1..=6);
        let labelings: Vec<Labeling> = (0..c).map(|_| random_labeling(n, 5, &mut rng)).collect();
        let got = build_similarity_graph(&labelings, c).map_err(|e| e.to_string())?;
        let want = similarity_graph_oracle(&labelings);
        ensure!(
            *got.matrix() == want,
            "case {case}: similarity graph differs from oracle"
        );
    }
    Ok("30 random label sets match the co-membership oracle".into())
}

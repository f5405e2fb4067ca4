//! Generators and brute-force oracles shared by the integration tests and the
//! acceptance harness.
#![allow(dead_code)]

pub mod criteria;

use fedspectral::{Graph, Labeling};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut *rng))
}

pub fn random_symmetric(n: usize, rng: &mut impl Rng) -> Array2<f64> {
    let a = gaussian_matrix(n, n, rng);
    (&a + &a.t()) / 2.0
}

/// Nodes are assigned to blocks round-robin; each block also carries a path
/// through its members so that it is connected, and consecutive blocks are
/// joined by one edge.
pub fn planted_partition(n: usize, k: usize, p_in: f64, p_out: f64, rng: &mut impl Rng) -> Graph {
    let block = |i: usize| i % k;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block(i) == block(j) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
        if i + k < n {
            pairs.push((i, i + k));
        }
    }
    for b in 0..k.min(n).saturating_sub(1) {
        pairs.push((b, b + 1));
    }
    Graph::from_pairs(n, &pairs).unwrap()
}

pub fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((i, j));
            }
        }
    }
    Graph::from_pairs(n, &pairs).unwrap()
}

pub fn random_labeling(n: usize, max_labels: usize, rng: &mut impl Rng) -> Labeling {
    let k = rng.random_range(1..=max_labels);
    Labeling::new((0..n).map(|_| rng.random_range(0..k)).collect())
}

/// Literal double loop over ordered pairs: count pairs co-labeled by `global`
/// but separated by `aggregated`.
pub fn mismatch_oracle(global: &[usize], aggregated: &[usize]) -> u64 {
    let n = global.len();
    let mut count = 0;
    for i in 0..n {
        for j in 0..n {
            if global[i] == global[j] && aggregated[i] != aggregated[j] {
                count += 1;
            }
        }
    }
    count
}

pub fn similarity_oracle(global: &[usize], aggregated: &[usize]) -> f64 {
    let n = global.len() as f64;
    1.0 - mismatch_oracle(global, aggregated) as f64 / (n * n)
}

/// Entry-by-entry co-membership fractions.
pub fn similarity_graph_oracle(labelings: &[Labeling]) -> Array2<f64> {
    let n = labelings[0].len();
    let c = labelings.len() as f64;
    Array2::from_shape_fn((n, n), |(i, j)| {
        labelings.iter().filter(|l| l[i] == l[j]).count() as f64 / c
    })
}

/// Normalized Laplacian built entry by entry from the edge list.
pub fn laplacian_oracle(g: &Graph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut deg = vec![0.0; n];
    for e in g.edges() {
        deg[e.u] += e.weight;
        deg[e.v] += e.weight;
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        if deg[i] > 0.0 {
            l[[i, i]] = 1.0;
        }
    }
    for e in g.edges() {
        let x = e.weight / (deg[e.u] * deg[e.v]).sqrt();
        l[[e.u, e.v]] = -x;
        l[[e.v, e.u]] = -x;
    }
    l
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn orthonormality_gap(q: &Array2<f64>) -> f64 {
    let g = q.t().dot(q);
    max_abs_diff(&g, &Array2::eye(q.ncols()))
}

/// Upper bound on the sine of the largest principal angle between the column
/// spans of two orthonormal blocks: `‖(I − B Bᵀ) A‖_F`.
pub fn principal_angle_bound(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let residual = a - &b.dot(&b.t().dot(a));
    let fro = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
    fro.min(1.0).asin()
}

/// Median of a sample; mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

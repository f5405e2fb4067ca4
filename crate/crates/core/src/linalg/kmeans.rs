//! Lloyd's k-means with k-means++ seeding.

use ndarray::Array2;
use rand::Rng;

use super::Labeling;
use crate::error::{Error, Result};
use crate::{par, seed};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub labels: Labeling,
    pub centroids: Array2<f64>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// Labels stopped changing before the iteration cap.
    pub converged: bool,
    /// Objective after each assignment step.
    pub objective_trace: Vec<f64>,
}

/// Clusters the rows of `points` into `k` groups.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64) -> Result<Labeling> {
    kmeans_detailed(points, k, seed).map(|o| o.labels)
}

pub fn kmeans_detailed(points: &Array2<f64>, k: usize, seed: u64) -> Result<KMeansOutcome> {
    let (n, dim) = points.dim();
    if k == 0 || k > n {
        return Err(Error::contract(format!(
            "k-means needs 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite k-means input".into()));
    }
    let points = points.as_standard_layout();
    let data = points.as_slice().expect("standard layout");
    let row = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut rng = seed::rng(seed);
    let mut centroids = plus_plus(&row, n, dim, k, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..MAX_LLOYD_ITERATIONS {
        iterations = iter + 1;
        let assigned: Vec<(usize, f64)> =
            par::kernel_map(n, |i| nearest(row(i), &centroids, k, dim));
        let mut changed = false;
        let mut dists = Vec::with_capacity(n);
        for (i, (c, d)) in assigned.into_iter().enumerate() {
            changed |= labels[i] != c;
            labels[i] = c;
            dists.push(d);
        }
        let repaired = repair_empty(&row, &mut labels, &mut dists, &mut centroids, k, dim);
        trace.push(dists.iter().sum());
        if !changed && !repaired {
            converged = true;
            break;
        }
        if iter + 1 == MAX_LLOYD_ITERATIONS {
            break;
        }
        update_centroids(&row, &labels, &mut centroids, k, dim);
    }

    let inertia = *trace.last().expect("at least one iteration");
    Ok(KMeansOutcome {
        labels: Labeling::new(labels),
        centroids: Array2::from_shape_vec((k, dim), centroids).expect("shape"),
        inertia,
        iterations,
        converged,
        objective_trace: trace,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++: first centre uniform, the rest with probability ∝ D². When every
/// point already coincides with a centre the remaining slots copy centre 0.
fn plus_plus<'a, F>(row: &F, n: usize, dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64>
where
    F: Fn(usize) -> &'a [f64],
{
    let first = rng.random_range(0..n);
    let mut centroids = row(first).to_vec();
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    let mut chosen = 1;
    while chosen < k {
        let total: f64 = d2.iter().sum();
        if total.is_nan() || total <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("positive total weight");
        centroids.extend_from_slice(row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), row(pick)));
        }
        chosen += 1;
    }
    for _ in chosen..k {
        centroids.extend_from_within(..dim);
    }
    centroids
}

/// Nearest centroid; ties go to the lowest index.
fn nearest(p: &[f64], centroids: &[f64], k: usize, dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..k {
        let d = sq_dist(p, &centroids[c * dim..(c + 1) * dim]);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Points sitting exactly on their centroid are never moved, so duplicate rows
/// keep sharing a label.
fn repair_empty<'a, F>(
    row: &F,
    labels: &mut [usize],
    dists: &mut [f64],
    centroids: &mut [f64],
    k: usize,
    dim: usize,
) -> bool
where
    F: Fn(usize) -> &'a [f64],
{
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut repaired = false;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, &d) in dists.iter().enumerate() {
            if d > 0.0 && sizes[labels[i]] > 1 && far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else { break };
        sizes[labels[i]] -= 1;
        sizes[c] = 1;
        labels[i] = c;
        dists[i] = 0.0;
        centroids[c * dim..(c + 1) * dim].copy_from_slice(row(i));
        repaired = true;
    }
    repaired
}

fn update_centroids<'a, F>(row: &F, labels: &[usize], centroids: &mut [f64], k: usize, dim: usize)
where
    F: Fn(usize) -> &'a [f64],
{
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        let inv = 1.0 / counts[c] as f64;
        for (dst, s) in centroids[c * dim..(c + 1) * dim]
            .iter_mut()
            .zip(&sums[c * dim..(c + 1) * dim])
        {
            *dst = s * inv;
        }
    }
}

//! Bottom-of-spectrum eigenvectors of a normalized Laplacian by orthogonal
//! (subspace) iteration.

use ndarray::{s, Array2};
use rand_distr::{Distribution, StandardNormal};

use super::{canonical_column_signs, reduced_qr, symmetric_eig_reference, LinearOperator};
use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceOptions {
    /// Sweep cap.
    pub max_sweeps: usize,
    /// Stop once the tracked subspace moves less than this between sweeps,
    /// or once every tracked Ritz pair has a residual below it.
    pub tolerance: f64,
    /// Extra vectors carried beyond `k`. `None` picks `max(k, 8)`.
    pub guard: Option<usize>,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        SubspaceOptions {
            max_sweeps: 1000,
            tolerance: 1e-9,
            guard: None,
        }
    }
}

/// Result of a bottom-`k` solve with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct EigenSubspace {
    /// `N x k`, orthonormal columns ordered by ascending Ritz value.
    pub vectors: Array2<f64>,
    pub values: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Estimated `λ_{k+1} - λ_k`; `None` when `k = N`.
    pub boundary_gap: Option<f64>,
    /// `max |L v - v (vᵀ L v)|`.
    pub residual: f64,
}

impl EigenSubspace {
    /// The `k`-th and `(k+1)`-th eigenvalues (numerically) coincide, so the
    /// returned subspace is one of many invariant subspaces.
    pub fn is_degenerate(&self) -> bool {
        self.boundary_gap.is_some_and(|g| g < 1e-8)
    }
}

/// Rank errors past this size are not retried with the dense solver.
const DENSE_FALLBACK_LIMIT: usize = 2000;

/// Orthonormal basis of the invariant subspace for the `k` smallest
/// eigenvalues of `l`.
pub fn bottom_k_eigenvectors(l: &LaplacianMatrix, k: usize, seed: u64) -> Result<Array2<f64>> {
    bottom_k_eigenpairs(l, k, seed, &SubspaceOptions::default()).map(|e| e.vectors)
}

/// Orthogonal iteration with Rayleigh-Ritz extraction.
///
/// The multiplier is `I - L/2`, whose spectrum `1 - λ/2` lies in `[0, 1]` and
/// keeps the Laplacian's ordering, so the dominant subspace is the bottom of
/// the Laplacian spectrum even when `L` has eigenvalues near 2.
pub fn bottom_k_eigenpairs(
    l: &LaplacianMatrix,
    k: usize,
    seed: u64,
    opts: &SubspaceOptions,
) -> Result<EigenSubspace> {
    let n = l.dim();
    if k == 0 || k > n {
        return Err(Error::contract(format!(
            "need 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    let block = (k + opts.guard.unwrap_or(k.max(8))).min(n);
    if block == n {
        return dense_bottom_k(l, k);
    }

    let op = LinearOperator::from_dense(l.matrix());
    let mut rng = seed::rng(seed::derive_seed(seed, seed::tag::EIGEN_START, 0));
    let start = Array2::from_shape_simple_fn((n, block), || StandardNormal.sample(&mut rng));
    let q = reduced_qr(&start)?.q;
    let lq = op.apply(&q)?;
    let (mut v, mut lv, mut values) = rayleigh_ritz(&q, &lq)?;
    let mut tracked = v.slice(s![.., ..k]).to_owned();

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let w = &v - &(&lv * 0.5);
        let q = match reduced_qr(&w) {
            Ok(f) => f.q,
            Err(Error::RankDeficient { .. }) if n <= DENSE_FALLBACK_LIMIT => {
                log::debug!("orthogonal iteration lost rank; using dense solver");
                return dense_bottom_k(l, k);
            }
            Err(e) => return Err(e),
        };
        let lq = op.apply(&q)?;
        (v, lv, values) = rayleigh_ritz(&q, &lq)?;
        let next = v.slice(s![.., ..k]).to_owned();
        let change = subspace_drift(&tracked, &next);
        tracked = next;
        if change < opts.tolerance || ritz_residual(&v, &lv, &values, k) < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("orthogonal iteration hit the {sweeps}-sweep cap");
    }

    let residual = ritz_residual(&v, &lv, &values, k);
    let boundary_gap = Some(values[k] - values[k - 1]);
    canonical_column_signs(&mut tracked);
    Ok(EigenSubspace {
        vectors: tracked,
        values: values[..k].to_vec(),
        sweeps,
        converged,
        boundary_gap,
        residual,
    })
}

fn dense_bottom_k(l: &LaplacianMatrix, k: usize) -> Result<EigenSubspace> {
    let eig = symmetric_eig_reference(l.matrix())?;
    let vectors = eig.vectors.slice(s![.., ..k]).to_owned();
    let lv = l.matrix().dot(&vectors);
    let mut residual = 0.0_f64;
    for ((r, c), &x) in lv.indexed_iter() {
        residual = residual.max((x - eig.values[c] * vectors[[r, c]]).abs());
    }
    Ok(EigenSubspace {
        vectors,
        values: eig.values[..k].to_vec(),
        sweeps: 0,
        converged: true,
        boundary_gap: eig.values.get(k).map(|&next| next - eig.values[k - 1]),
        residual,
    })
}

/// `max |L v - λ v|` over the first `k` Ritz pairs. Unlike the drift, this
/// does not depend on the basis chosen inside a repeated eigenvalue.
fn ritz_residual(v: &Array2<f64>, lv: &Array2<f64>, values: &[f64], k: usize) -> f64 {
    let mut residual = 0.0_f64;
    for c in 0..k {
        for r in 0..v.nrows() {
            residual = residual.max((lv[[r, c]] - values[c] * v[[r, c]]).abs());
        }
    }
    residual
}

/// Rotates `q` onto the Ritz vectors of `qᵀ L q`, ascending.
fn rayleigh_ritz(
    q: &Array2<f64>,
    lq: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, Vec<f64>)> {
    let h = q.t().dot(lq);
    let h = (&h + &h.t()) * 0.5;
    let eig = symmetric_eig_reference(&h)?;
    Ok((q.dot(&eig.vectors), lq.dot(&eig.vectors), eig.values))
}

/// `max |cur - prev (prevᵀ cur)|`: how far `cur` sticks out of span(`prev`).
pub fn subspace_drift(prev: &Array2<f64>, cur: &Array2<f64>) -> f64 {
    let proj = prev.dot(&prev.t().dot(cur));
    (cur - &proj).iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Largest principal angle (radians) between the spans of two orthonormal
/// blocks of equal width.
pub fn max_principal_angle(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::contract("principal angles need equal shapes"));
    }
    let resid = b - &a.dot(&a.t().dot(b));
    let gram = resid.t().dot(&resid);
    let gram = (&gram + &gram.t()) * 0.5;
    let eig = symmetric_eig_reference(&gram)?;
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    Ok(top.sqrt().min(1.0).asin())
}

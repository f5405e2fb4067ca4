use ndarray::Array2;

use crate::error::{Error, Result};

/// Reduced QR factors: `a = q r` with `q` of shape `N x K` and `r` upper
/// triangular `K x K` with a non-negative diagonal.
#[derive(Debug, Clone)]
pub struct Qr {
    pub q: Array2<f64>,
    pub r: Array2<f64>,
}

const RANK_TOLERANCE: f64 = 1e-12;

/// Householder reduced QR of a tall matrix.
pub fn reduced_qr(a: &Array2<f64>) -> Result<Qr> {
    let (n, k) = a.dim();
    if n < k {
        return Err(Error::contract(format!(
            "reduced QR needs rows >= cols, got {n} x {k}"
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite entry in QR input".into()));
    }

    // Work column-wise; reflectors only ever touch column tails.
    let mut cols: Vec<Vec<f64>> = a.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k);

    for j in 0..k {
        let x = &cols[j][j..];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < RANK_TOLERANCE {
            return Err(Error::RankDeficient {
                column: j,
                magnitude: norm,
            });
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        let beta = 2.0 / vv;
        for col in cols.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let s = beta * dot(&v, tail);
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        }
        reflectors.push((v, beta));
    }

    let mut r = Array2::zeros((k, k));
    for c in 0..k {
        for i in 0..=c {
            r[[i, c]] = cols[c][i];
        }
    }

    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of the identity.
    let mut q_cols: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            e
        })
        .collect();
    for (j, (v, beta)) in reflectors.iter().enumerate().rev() {
        for col in q_cols.iter_mut() {
            let tail = &mut col[j..];
            let s = beta * dot(v, tail);
            if s != 0.0 {
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= s * vi;
                }
            }
        }
    }

    for i in 0..k {
        if r[[i, i]] < 0.0 {
            r.row_mut(i).mapv_inplace(|x| -x);
            q_cols[i].iter_mut().for_each(|x| *x = -*x);
        }
        if r[[i, i]].abs() < RANK_TOLERANCE {
            return Err(Error::RankDeficient {
                column: i,
                magnitude: r[[i, i]].abs(),
            });
        }
    }

    let mut q = Array2::zeros((n, k));
    for (c, col) in q_cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            q[[i, c]] = x;
        }
    }
    Ok(Qr { q, r })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

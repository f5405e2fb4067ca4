use ndarray::Array2;

use crate::error::{Error, Result};
use crate::par;

/// A square matrix prepared for repeated block products `A · X`.
///
/// Stored as compressed rows when sparse enough, dense otherwise. Both forms
/// compute every output row independently, in a fixed order, so results do
/// not depend on thread scheduling.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    n: usize,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
    Dense(Array2<f64>),
}

/// Above this fill ratio the dense product is faster.
const DENSE_FILL: f64 = 0.25;

impl LinearOperator {
    /// Chooses a representation from the fill ratio of `a`.
    pub fn from_dense(a: &Array2<f64>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "operator must be square");
        let nnz = a.iter().filter(|&&x| x != 0.0).count();
        if n > 0 && nnz as f64 > DENSE_FILL * (n * n) as f64 {
            LinearOperator {
                n,
                repr: Repr::Dense(a.as_standard_layout().into_owned()),
            }
        } else {
            Self::sparse(a)
        }
    }

    /// Forces compressed-row storage.
    pub fn sparse(a: &Array2<f64>) -> Self {
        let n = a.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in a.outer_iter() {
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    cols.push(j);
                    vals.push(x);
                }
            }
            row_ptr.push(cols.len());
        }
        LinearOperator {
            n,
            repr: Repr::Sparse {
                row_ptr,
                cols,
                vals,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, Repr::Sparse { .. })
    }

    /// `A · x` for an `n x k` block.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let (rows, k) = x.dim();
        if rows != self.n {
            return Err(Error::contract(format!(
                "operator is {0} x {0}, block has {rows} rows",
                self.n
            )));
        }
        match &self.repr {
            Repr::Dense(a) => Ok(a.dot(x)),
            Repr::Sparse {
                row_ptr,
                cols,
                vals,
            } => {
                let x = x.as_standard_layout();
                let xs = x.as_slice().expect("standard layout");
                let mut out = vec![0.0; self.n * k];
                par::for_each_row_mut(&mut out, k, |i, row| {
                    for p in row_ptr[i]..row_ptr[i + 1] {
                        let a = vals[p];
                        let src = &xs[cols[p] * k..(cols[p] + 1) * k];
                        for (o, s) in row.iter_mut().zip(src) {
                            *o += a * s;
                        }
                    }
                });
                Ok(Array2::from_shape_vec((self.n, k), out).expect("shape"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn sparse_and_dense_agree() {
        let a = arr2(&[[0.0, 1.0, 0.0], [1.0, 0.0, 2.0], [0.0, 2.0, 0.5]]);
        let x = arr2(&[[1.0, -1.0], [2.0, 0.5], [3.0, 4.0]]);
        let want = a.dot(&x);
        let s = LinearOperator::sparse(&a).apply(&x).unwrap();
        assert!(s
            .iter()
            .zip(want.iter())
            .all(|(p, q)| (p - q).abs() < 1e-15));
        let d = LinearOperator::from_dense(&a);
        assert!(!d.is_sparse());
        assert_eq!(d.apply(&x).unwrap(), want);
    }

    #[test]
    fn shape_mismatch() {
        let op = LinearOperator::from_dense(&Array2::eye(8));
        assert!(op.is_sparse());
        assert!(op.apply(&Array2::zeros((3, 1))).is_err());
    }
}

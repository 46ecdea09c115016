//! Symmetric sparse storage and `f64` reference kernels.
//!
//! Only the lower triangle is stored, column by column, with the diagonal as
//! the first entry of every column.

mod market;
mod scale;

pub use market::{read_matrix_market, read_matrix_market_file, write_matrix_market};
pub use scale::{l2_scale, squeeze, ScalingVector, SqueezeReport};

use crate::error::MatrixError;

/// Lower triangle of a symmetric matrix in compressed sparse column form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSpd {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSpd {
    /// Builds from raw CSC arrays, validating the structural invariants.
    pub fn from_csc(
        n: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        if col_ptr.len() != n + 1 || col_ptr[0] != 0 || col_ptr[n] != row_idx.len() {
            return Err(MatrixError::Structure {
                col: 0,
                msg: "inconsistent column pointers".into(),
            });
        }
        if values.len() != row_idx.len() {
            return Err(MatrixError::Dimension {
                expected: row_idx.len(),
                got: values.len(),
            });
        }
        for j in 0..n {
            let (lo, hi) = (col_ptr[j], col_ptr[j + 1]);
            if hi < lo {
                return Err(MatrixError::Structure {
                    col: j,
                    msg: "decreasing column pointer".into(),
                });
            }
            if lo == hi || row_idx[lo] != j {
                return Err(MatrixError::MissingDiagonal(j));
            }
            for w in row_idx[lo..hi].windows(2) {
                if w[1] <= w[0] {
                    return Err(MatrixError::Structure {
                        col: j,
                        msg: "row indices not strictly increasing".into(),
                    });
                }
            }
            if row_idx[hi - 1] >= n {
                return Err(MatrixError::IndexOutOfRange {
                    row: row_idx[hi - 1] + 1,
                    col: j + 1,
                    n,
                });
            }
        }
        Ok(SparseSpd {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from 0-based `(row, col, value)` triplets of either triangle.
    ///
    /// Upper entries are mirrored, duplicates are summed, and a missing or
    /// zero diagonal is rejected.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(MatrixError::IndexOutOfRange {
                    row: r + 1,
                    col: c + 1,
                    n,
                });
            }
            let (i, j) = if r >= c { (r, c) } else { (c, r) };
            cols[j].push((i, v));
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, mut col) in cols.into_iter().enumerate() {
            col.sort_by_key(|&(i, _)| i);
            for (i, v) in col {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            let lo = col_ptr[j];
            if row_idx.len() == lo || row_idx[lo] != j || values[lo] == 0.0 {
                return Err(MatrixError::MissingDiagonal(j));
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseSpd {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// The `n x n` identity.
    pub fn identity(n: usize) -> Self {
        SparseSpd {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Lower triangle of a dense symmetric matrix; exact zeros below the
    /// diagonal are not stored.
    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let n = a.len();
        let trip = (0..n).flat_map(|j| {
            (j..n)
                .filter(move |&i| i == j || a[i][j] != 0.0)
                .map(move |i| (i, j, a[i][j]))
        });
        Self::from_triplets(n, trip)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of the lower triangle, diagonal included.
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row indices and values of stored column `j` (diagonal first).
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.values[self.col_ptr[j]]).collect()
    }

    /// Value at `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// Iterates over stored `(i, j, value)` with `i >= j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    /// Full symmetric matrix as dense rows.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.iter() {
            a[i][j] = v;
            a[j][i] = v;
        }
        a
    }

    /// Adjacency lists of the full symmetric structure, diagonal excluded.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, j, _) in self.iter() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Copy with `alpha` added to every diagonal entry, in `f64`.
    pub fn shifted(&self, alpha: f64) -> SparseSpd {
        let mut out = self.clone();
        for j in 0..self.n {
            out.values[out.col_ptr[j]] += alpha;
        }
        out
    }

    /// `y = A x` with the full symmetric matrix.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), MatrixError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        y.fill(0.0);
        for j in 0..self.n {
            let (rows, vals) = self.column(j);
            let xj = x[j];
            let mut acc = vals[0] * xj;
            for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
                y[i] += v * xj;
                acc += v * x[i];
            }
            y[j] += acc;
        }
        Ok(())
    }

    /// `||A||_inf` of the full symmetric matrix.
    pub fn inf_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            sums[i] += v.abs();
            if i != j {
                sums[j] += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    fn check_len(&self, got: usize) -> Result<(), MatrixError> {
        if got != self.n {
            return Err(MatrixError::Dimension {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }
}

/// `max_i |v_i|`, zero for an empty vector.
pub fn inf_norm_vector(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

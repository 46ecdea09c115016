use serde::{Deserialize, Serialize};

use super::SparseSpd;
use crate::error::MatrixError;
use crate::precision::{round_to, FpFormat};

/// Diagonal of the symmetric scaling `S`, with `Ahat = S^-1 A S^-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingVector(Vec<f64>);

impl ScalingVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `S^-1 v`, used for the right-hand side and to recover `x = S^-1 xhat`.
    pub fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.0).map(|(x, s)| x / s).collect()
    }

    /// `S v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.0).map(|(x, s)| x * s).collect()
    }

    /// Undoes the scaling of a matrix produced by [`l2_scale`].
    pub fn unscale(&self, ahat: &SparseSpd) -> SparseSpd {
        let mut a = ahat.clone();
        let s = &self.0;
        let n = a.n();
        let col_ptr = a.col_ptr().to_vec();
        let rows = a.row_idx().to_vec();
        let vals = a.values_mut();
        for j in 0..n {
            for p in col_ptr[j]..col_ptr[j + 1] {
                vals[p] *= s[rows[p]] * s[j];
            }
        }
        a
    }
}

/// Symmetric scaling that normalises each column by its 2-norm.
///
/// `s_j = sqrt(||A(:, j)||_2)` over the full symmetric column, so that
/// `Ahat_ij = a_ij / (s_i s_j)` satisfies `|Ahat_ij| <= 1` for SPD input.
pub fn l2_scale(a: &SparseSpd) -> Result<(SparseSpd, ScalingVector), MatrixError> {
    let n = a.n();
    let mut sq = vec![0.0f64; n];
    for (i, j, v) in a.iter() {
        sq[j] += v * v;
        if i != j {
            sq[i] += v * v;
        }
    }
    let mut s = Vec::with_capacity(n);
    for (j, &q) in sq.iter().enumerate() {
        let sj = q.sqrt().sqrt();
        if !(sj.is_finite() && sj > 0.0) {
            return Err(MatrixError::BadColumnNorm(j));
        }
        s.push(sj);
    }
    let mut ahat = a.clone();
    let col_ptr = a.col_ptr();
    let rows = a.row_idx();
    let vals = ahat.values_mut();
    for j in 0..n {
        for p in col_ptr[j]..col_ptr[j + 1] {
            vals[p] /= s[rows[p]] * s[j];
        }
    }
    Ok((ahat, ScalingVector(s)))
}

/// Counts from [`squeeze`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqueezeReport {
    pub kept: usize,
    pub dropped_underflow: usize,
    pub flushed_subnormal: usize,
}

/// Rounds every entry into `f`.
///
/// Off-diagonal entries that round to zero, or land in the subnormal range,
/// are removed. Diagonal entries always stay, even when they round to zero,
/// so that the factorization sees the small pivot. Explicit zeros in the
/// input are kept as they are.
pub fn squeeze(ahat: &SparseSpd, f: FpFormat) -> Result<(SparseSpd, SqueezeReport), MatrixError> {
    let n = ahat.n();
    let mut report = SqueezeReport::default();
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::with_capacity(ahat.nnz());
    let mut values = Vec::with_capacity(ahat.nnz());
    col_ptr.push(0);
    for j in 0..n {
        let (rows, vals) = ahat.column(j);
        for (&i, &v) in rows.iter().zip(vals) {
            let r = round_to(v, f);
            let rv = r.value().ok_or_else(|| MatrixError::SqueezeOverflow {
                value: v,
                format: f.name(),
            })?;
            if i != j {
                if r.flags.underflow_to_zero {
                    report.dropped_underflow += 1;
                    continue;
                }
                if r.flags.became_subnormal {
                    report.flushed_subnormal += 1;
                    continue;
                }
            }
            report.kept += 1;
            row_idx.push(i);
            values.push(rv);
        }
        col_ptr.push(row_idx.len());
    }
    Ok((
        SparseSpd {
            n,
            col_ptr,
            row_idx,
            values,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unchanged() {
        let (ahat, s) = l2_scale(&SparseSpd::identity(4)).unwrap();
        assert_eq!(ahat, SparseSpd::identity(4));
        assert_eq!(s.as_slice(), &[1.0; 4]);
    }

    #[test]
    fn two_by_two_scaling() {
        let a = SparseSpd::from_triplets(2, [(0, 0, 4.0), (1, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let (ahat, s) = l2_scale(&a).unwrap();
        let expect_s = 20f64.powf(0.25);
        for &sj in s.as_slice() {
            assert!((sj - expect_s).abs() < 1e-15);
        }
        // 4/sqrt(20) and 2/sqrt(20)
        assert!((ahat.get(0, 0) - 0.894427190999916).abs() < 1e-15);
        assert!((ahat.get(1, 0) - 0.447213595499958).abs() < 1e-15);
        let back = s.unscale(&ahat);
        for ((_, _, x), (_, _, y)) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() <= 1e-14 * y.abs());
        }
    }

    #[test]
    fn squeeze_drops_tiny_offdiagonal() {
        let a = SparseSpd::from_triplets(
            3,
            [(0, 0, 0.5), (1, 0, 1e-9), (2, 1, 1e-6), (1, 1, 0.5), (2, 2, 0.5)],
        )
        .unwrap();
        let (low, rep) = squeeze(&a, FpFormat::FP16).unwrap();
        assert_eq!(rep.dropped_underflow, 1);
        assert_eq!(rep.flushed_subnormal, 1);
        assert_eq!(rep.kept, 3);
        assert_eq!(low.nnz(), 3);
        assert_eq!(rep.kept + rep.dropped_underflow + rep.flushed_subnormal, a.nnz());
    }

    #[test]
    fn squeeze_keeps_halves_and_fp64_identity() {
        let a = SparseSpd::from_triplets(2, [(0, 0, 0.5), (1, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let (low, rep) = squeeze(&a, FpFormat::FP16).unwrap();
        assert_eq!(low, a);
        assert_eq!(rep.kept, 3);

        let b = SparseSpd::from_triplets(2, [(0, 0, 0.3), (1, 0, 1e-200), (1, 1, 0.7)]).unwrap();
        let (low, rep) = squeeze(&b, FpFormat::FP64).unwrap();
        assert_eq!(low, b);
        assert_eq!(rep.kept, 3);
    }

    #[test]
    fn squeeze_keeps_zero_diagonal_and_rejects_overflow() {
        let a = SparseSpd::from_triplets(2, [(0, 0, 1e-10), (1, 1, 1.0)]).unwrap();
        let (low, _) = squeeze(&a, FpFormat::FP16).unwrap();
        assert_eq!(low.nnz(), 2);
        assert_eq!(low.get(0, 0), 0.0);

        let big = SparseSpd::from_triplets(1, [(0, 0, 1e6)]).unwrap();
        assert!(matches!(
            squeeze(&big, FpFormat::FP16),
            Err(MatrixError::SqueezeOverflow { .. })
        ));
    }
}

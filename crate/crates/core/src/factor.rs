//! Incomplete Cholesky factorization in a simulated format.
//!
//! [`ic_attempt`] is the right-looking factorization restricted to a fill
//! pattern. With safe checks enabled it refuses to perform any scaling or
//! update that could overflow the format and reports a [`Breakdown`]
//! instead. [`shifted_ic`] wraps it in the global shift loop: on breakdown
//! the diagonal is shifted by `alpha` and the factorization restarts, with
//! `alpha` following `0, alpha_s, 2 alpha_s, 4 alpha_s, ...`.

use serde::{Deserialize, Serialize};

use crate::error::FactorError;
use crate::precision::{self, is_representable, round_to, safe_scale_check, safe_update, FpFormat};
use crate::sparse::{squeeze, SparseSpd, SqueezeReport};
use crate::symbolic::FillPattern;

/// Which safe test failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BreakdownKind {
    /// Pivot below the threshold `tau` (or negative).
    B1,
    /// Scaling the pivot column could overflow.
    B2,
    /// An outer-product update could overflow.
    B3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakdown {
    pub kind: BreakdownKind,
    /// 0-based column at which the breakdown was detected.
    pub step: usize,
    /// The offending pivot (B1, B2) or target entry (B3).
    pub value: f64,
}

/// Result of a single factorization attempt.
#[derive(Clone, Debug, PartialEq)]
pub enum Attempt {
    /// Factor values aligned with the pattern.
    Factored(Vec<f64>),
    Breakdown(Breakdown),
}

/// Breakdown counters accumulated over every attempt of [`shifted_ic`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorStats {
    /// B1 count.
    pub nmod: usize,
    /// B2 count.
    pub nscale: usize,
    /// B3 count.
    pub nofl: usize,
    pub restarts: usize,
}

/// A computed incomplete factor `L` with values stored in `format`.
#[derive(Clone, Debug, PartialEq)]
pub struct IcFactor {
    pattern: FillPattern,
    values: Vec<f64>,
    format: FpFormat,
    alpha: f64,
    stats: FactorStats,
    history: Vec<(f64, Breakdown)>,
    squeeze: SqueezeReport,
}

impl IcFactor {
    /// Wraps externally computed values; every value must be representable
    /// in `format` and every diagonal nonzero.
    pub fn from_parts(
        pattern: FillPattern,
        values: Vec<f64>,
        format: FpFormat,
    ) -> Result<Self, FactorError> {
        assert_eq!(pattern.nnz(), values.len(), "values do not match pattern");
        let ptr = pattern.col_ptr();
        if let Some(j) = (0..pattern.n()).find(|&j| values[ptr[j]] == 0.0) {
            return Err(FactorError::ZeroDiagonal(j));
        }
        if let Some(&v) = values.iter().find(|&&v| !is_representable(v, format)) {
            return Err(FactorError::NotRepresentable {
                value: v,
                format: format.name(),
            });
        }
        Ok(IcFactor {
            pattern,
            values,
            format,
            alpha: 0.0,
            stats: FactorStats::default(),
            history: Vec::new(),
            squeeze: SqueezeReport::default(),
        })
    }

    /// Lower triangle of a dense matrix, pattern taken from its nonzeros.
    pub fn from_dense_lower(l: &[Vec<f64>], format: FpFormat) -> Result<Self, FactorError> {
        let n = l.len();
        let cols: Vec<Vec<usize>> = (0..n)
            .map(|j| (j + 1..n).filter(|&i| l[i][j] != 0.0).collect())
            .collect();
        let pattern = FillPattern::from_columns(0, cols);
        let values = (0..n)
            .flat_map(|j| pattern.column(j).iter().map(move |&i| l[i][j]))
            .collect();
        Self::from_parts(pattern, values, format)
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &FillPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn format(&self) -> FpFormat {
        self.format
    }

    /// Shift used by the successful attempt.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stats(&self) -> FactorStats {
        self.stats
    }

    /// Every breakdown met on the way, with the shift of that attempt.
    pub fn history(&self) -> &[(f64, Breakdown)] {
        &self.history
    }

    pub fn squeeze_report(&self) -> SqueezeReport {
        self.squeeze
    }

    /// Rows and values of column `j`, diagonal first.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let ptr = self.pattern.col_ptr();
        let r = ptr[j]..ptr[j + 1];
        (&self.pattern.row_idx()[r.clone()], &self.values[r])
    }

    pub fn diag(&self, j: usize) -> f64 {
        self.values[self.pattern.col_ptr()[j]]
    }

    /// Dense copy of `L`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut l = vec![vec![0.0; n]; n];
        for j in 0..n {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                l[i][j] = v;
            }
        }
        l
    }
}

/// Default pivot threshold for a format.
pub fn default_tau(f: FpFormat) -> f64 {
    if f.is_half() {
        1e-5
    } else {
        1e-20f64.max(4.0 * f.x_min())
    }
}

/// One factorization attempt of `alow` restricted to `pattern`.
///
/// `alow` must hold values representable in `f` and its structure must be a
/// subset of `pattern`. With `safe_checks` the B2 and B3 tests run before
/// every scaling and update; without them only the pivot test does, and any
/// overflow the simulation still reports is classified as B2 or B3.
pub fn ic_attempt(
    alow: &SparseSpd,
    pattern: &FillPattern,
    tau: f64,
    f: FpFormat,
    safe_checks: bool,
) -> Result<Attempt, FactorError> {
    let n = alow.n();
    assert_eq!(n, pattern.n(), "pattern dimension mismatch");
    let col_ptr = pattern.col_ptr();
    let rows = pattern.row_idx();
    let mut l = vec![0.0f64; pattern.nnz()];

    for j in 0..n {
        let prow = pattern.column(j);
        let (arow, aval) = alow.column(j);
        let mut p = 0;
        for (&i, &v) in arow.iter().zip(aval) {
            while p < prow.len() && prow[p] < i {
                p += 1;
            }
            if p == prow.len() || prow[p] != i {
                return Err(FactorError::PatternMismatch { row: i, col: j });
            }
            if !is_representable(v, f) {
                return Err(FactorError::NotRepresentable {
                    value: v,
                    format: f.name(),
                });
            }
            l[col_ptr[j] + p] = v;
        }
    }

    let breakdown = |kind, step, value| Ok(Attempt::Breakdown(Breakdown { kind, step, value }));

    for k in 0..n {
        let (lo, hi) = (col_ptr[k], col_ptr[k + 1]);
        let pivot = l[lo];
        if !(pivot >= tau) {
            return breakdown(BreakdownKind::B1, k, pivot);
        }
        let d = match precision::sqrt(pivot, f) {
            Ok(d) => d,
            Err(_) => return breakdown(BreakdownKind::B1, k, pivot),
        };
        l[lo] = d;

        if safe_checks && d < 1.0 {
            let a = l[lo + 1..hi].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !safe_scale_check(d, a, f) {
                return breakdown(BreakdownKind::B2, k, d);
            }
        }
        for p in lo + 1..hi {
            match precision::div(l[p], d, f) {
                Ok(v) => l[p] = v,
                Err(_) => return breakdown(BreakdownKind::B2, k, d),
            }
        }

        // column j of L receives l_ik * l_jk for every i >= j in column k
        for pa in lo + 1..hi {
            let j = rows[pa];
            let ljk = l[pa];
            let (jlo, jhi) = (col_ptr[j], col_ptr[j + 1]);
            let mut q = jlo;
            for pb in pa..hi {
                let i = rows[pb];
                while q < jhi && rows[q] < i {
                    q += 1;
                }
                if q == jhi {
                    break;
                }
                if rows[q] != i {
                    continue;
                }
                let lik = l[pb];
                let updated = if safe_checks {
                    safe_update(l[q], lik, ljk, f).ok()
                } else {
                    precision::mul(lik, ljk, f)
                        .and_then(|w| precision::sub(l[q], w, f))
                        .ok()
                };
                match updated {
                    Some(v) => l[q] = v,
                    None => return breakdown(BreakdownKind::B3, k, l[q]),
                }
            }
        }
    }
    Ok(Attempt::Factored(l))
}

/// Parameters of [`shifted_ic`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftParams {
    pub tau: f64,
    /// First nonzero shift.
    pub alpha_s: f64,
    /// Restarts allowed after the unshifted attempt.
    pub max_restarts: usize,
    /// Run the B2/B3 tests; defaults to on for half-precision formats.
    pub safe_checks: bool,
}

impl ShiftParams {
    pub fn for_format(f: FpFormat) -> Self {
        ShiftParams {
            tau: default_tau(f),
            alpha_s: 1e-3,
            max_restarts: 40,
            safe_checks: f.is_half(),
        }
    }
}

/// Squeezes `ahat` into `f` once, then factorizes `alow + alpha I` for
/// increasing `alpha` until an attempt succeeds.
pub fn shifted_ic(
    ahat: &SparseSpd,
    pattern: &FillPattern,
    f: FpFormat,
    params: ShiftParams,
) -> Result<IcFactor, FactorError> {
    if !(params.alpha_s >= 0.0 && params.alpha_s.is_finite()) {
        return Err(FactorError::BadShift(params.alpha_s));
    }
    let (alow, report) = squeeze(ahat, f).map_err(|_| FactorError::NotRepresentable {
        value: ahat.values().iter().fold(0.0f64, |m, v| m.max(v.abs())),
        format: f.name(),
    })?;
    if let Some((row, col)) = pattern.covers(&alow) {
        return Err(FactorError::PatternMismatch { row, col });
    }

    let mut stats = FactorStats::default();
    let mut history = Vec::new();
    let mut alpha = 0.0f64;
    for attempt in 0..=params.max_restarts {
        let Some(shifted) = shift_in_format(&alow, alpha, f) else {
            break;
        };
        match ic_attempt(&shifted, pattern, params.tau, f, params.safe_checks)? {
            Attempt::Factored(values) => {
                stats.restarts = attempt;
                return Ok(IcFactor {
                    pattern: pattern.clone(),
                    values,
                    format: f,
                    alpha,
                    stats,
                    history,
                    squeeze: report,
                });
            }
            Attempt::Breakdown(b) => {
                match b.kind {
                    BreakdownKind::B1 => stats.nmod += 1,
                    BreakdownKind::B2 => stats.nscale += 1,
                    BreakdownKind::B3 => stats.nofl += 1,
                }
                history.push((alpha, b));
            }
        }
        let next = (2.0 * alpha).max(params.alpha_s);
        if next == alpha {
            break;
        }
        alpha = next;
    }
    Err(FactorError::RestartsExhausted { history })
}

/// `alow + alpha I` with the shift rounded into `f` and added in `f`.
/// `None` when the shift or a shifted diagonal overflows the format.
fn shift_in_format(alow: &SparseSpd, alpha: f64, f: FpFormat) -> Option<SparseSpd> {
    let mut out = alow.clone();
    if alpha == 0.0 {
        return Some(out);
    }
    let a = round_to(alpha, f).value()?;
    let ptr = alow.col_ptr().to_vec();
    let vals = out.values_mut();
    for j in 0..ptr.len() - 1 {
        vals[ptr[j]] = precision::add(vals[ptr[j]], a, f).ok()?;
    }
    Some(out)
}

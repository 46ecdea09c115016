//! Triangular solves with an incomplete factor.
//!
//! Both solves walk the column storage of `L`. The forward solve is column
//! oriented, skipping columns whose solution entry is exactly zero; the
//! backward solve with `L^T` reads the same columns as rows.
//!
//! In [`ExecMode::CastF64`] each factor entry is promoted as it is read and all
//! arithmetic is `f64`. In [`ExecMode::NativeLow`] every operation is rounded
//! into the factor's format and guarded by the same safe tests as the
//! factorization; a failing guard yields [`OverflowSignal`].

use thiserror::Error;

use crate::factor::IcFactor;
use crate::precision::{self, round_to, safe_scale_check, safe_update, FpFormat};
use crate::sparse::inf_norm_vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExecMode {
    /// Arithmetic in the factor's format with overflow guards.
    NativeLow,
    /// Factor entries promoted to `f64` on the fly.
    CastF64,
}

/// A native-precision solve stopped because an operation could overflow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("triangular solve would overflow at index {index}")]
pub struct OverflowSignal {
    pub index: usize,
}

/// Solves `L y = w`.
pub fn forward_solve(l: &IcFactor, w: &[f64], exec: ExecMode) -> Result<Vec<f64>, OverflowSignal> {
    assert_eq!(w.len(), l.n(), "right-hand side length mismatch");
    match exec {
        ExecMode::CastF64 => Ok(forward_f64(l, w)),
        ExecMode::NativeLow => forward_native(l, w),
    }
}

/// Solves `L^T y = w`.
pub fn backward_solve(l: &IcFactor, w: &[f64], exec: ExecMode) -> Result<Vec<f64>, OverflowSignal> {
    assert_eq!(w.len(), l.n(), "right-hand side length mismatch");
    match exec {
        ExecMode::CastF64 => Ok(backward_f64(l, w)),
        ExecMode::NativeLow => backward_native(l, w),
    }
}

/// `(L L^T)^-1 r`.
///
/// In native mode the right-hand side is first divided by `||r||_inf` and the
/// result multiplied back, both in `f64`.
pub fn apply_preconditioner(
    l: &IcFactor,
    r: &[f64],
    exec: ExecMode,
) -> Result<Vec<f64>, OverflowSignal> {
    assert_eq!(r.len(), l.n(), "right-hand side length mismatch");
    let scale = inf_norm_vector(r);
    if scale == 0.0 {
        return Ok(vec![0.0; r.len()]);
    }
    match exec {
        ExecMode::CastF64 => Ok(backward_f64(l, &forward_f64(l, r))),
        ExecMode::NativeLow => {
            let w: Vec<f64> = r.iter().map(|v| v / scale).collect();
            let y = forward_native(l, &w)?;
            let mut v = backward_native(l, &y)?;
            for x in &mut v {
                *x *= scale;
            }
            Ok(v)
        }
    }
}

fn forward_f64(l: &IcFactor, w: &[f64]) -> Vec<f64> {
    let mut y = w.to_vec();
    for j in 0..l.n() {
        if y[j] == 0.0 {
            continue;
        }
        let (rows, vals) = l.column(j);
        let yj = y[j] / vals[0];
        y[j] = yj;
        for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
            y[i] -= v * yj;
        }
    }
    y
}

fn backward_f64(l: &IcFactor, w: &[f64]) -> Vec<f64> {
    let mut y = w.to_vec();
    for j in (0..l.n()).rev() {
        let (rows, vals) = l.column(j);
        let mut acc = y[j];
        for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
            acc -= v * y[i];
        }
        y[j] = acc / vals[0];
    }
    y
}

fn to_format(w: &[f64], f: FpFormat) -> Result<Vec<f64>, OverflowSignal> {
    w.iter()
        .enumerate()
        .map(|(i, &v)| round_to(v, f).value().ok_or(OverflowSignal { index: i }))
        .collect()
}

fn guarded_div(x: f64, d: f64, f: FpFormat, index: usize) -> Result<f64, OverflowSignal> {
    let signal = OverflowSignal { index };
    if !safe_scale_check(d, x.abs(), f) {
        return Err(signal);
    }
    precision::div(x, d, f).map_err(|_| signal)
}

fn forward_native(l: &IcFactor, w: &[f64]) -> Result<Vec<f64>, OverflowSignal> {
    let f = l.format();
    let mut y = to_format(w, f)?;
    for j in 0..l.n() {
        if y[j] == 0.0 {
            continue;
        }
        let (rows, vals) = l.column(j);
        let yj = guarded_div(y[j], vals[0], f, j)?;
        y[j] = yj;
        for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
            y[i] = safe_update(y[i], v, yj, f).map_err(|_| OverflowSignal { index: i })?;
        }
    }
    Ok(y)
}

fn backward_native(l: &IcFactor, w: &[f64]) -> Result<Vec<f64>, OverflowSignal> {
    let f = l.format();
    let mut y = to_format(w, f)?;
    for j in (0..l.n()).rev() {
        let (rows, vals) = l.column(j);
        let mut acc = y[j];
        for (&i, &v) in rows[1..].iter().zip(&vals[1..]) {
            if y[i] != 0.0 {
                acc = safe_update(acc, v, y[i], f).map_err(|_| OverflowSignal { index: j })?;
            }
        }
        y[j] = guarded_div(acc, vals[0], f, j)?;
    }
    Ok(y)
}

/// Application of `M^-1` inside the Krylov solvers.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

/// `M = I`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

/// The factor applied in `f64`, which cannot overflow.
impl Preconditioner for IcFactor {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        backward_f64(self, &forward_f64(self, r))
    }
}

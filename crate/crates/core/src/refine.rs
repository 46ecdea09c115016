//! Iterative refinement with an incomplete Cholesky factor.
//!
//! Residuals and solution updates are always formed in `f64`. The correction
//! equation is solved either by one pair of triangular substitutions
//! ([`ic_lu_ir`]) or by a preconditioned Krylov method ([`ic_krylov_ir`]).

use serde::{Deserialize, Serialize};

use crate::factor::IcFactor;
use crate::krylov::{gmres, pcg, KrylovStatus};
use crate::sparse::{inf_norm_vector, SparseSpd};
use crate::trisolve::{apply_preconditioner, ExecMode};

/// Residual magnitude treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e300;

/// `1e3 * u64`.
pub fn default_delta() -> f64 {
    1e3 * f64::EPSILON / 2.0
}

/// `u64^(1/4)`.
pub fn default_delta_krylov() -> f64 {
    (f64::EPSILON / 2.0).powf(0.25)
}

/// Inner solve of one outer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolve {
    /// Krylov iterations, 0 for substitution.
    pub iterations: usize,
    /// `None` for substitution.
    pub status: Option<KrylovStatus>,
    /// The native solve overflowed and was redone in `f64`.
    pub fallback: bool,
    /// Backward error after the update.
    pub backward_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub resinit: f64,
    pub resfinal: f64,
    pub iouter: usize,
    pub totits: usize,
    pub per_outer: Vec<InnerSolve>,
    pub converged: bool,
    pub diverged: bool,
    /// Native applications redone in `f64` after an overflow signal.
    pub fallbacks: usize,
    /// Largest inner iteration count (GMRES basis size).
    pub maxbasis: usize,
    pub solution: Vec<f64>,
}

impl SolveReport {
    fn new(resinit: f64, n: usize) -> Self {
        SolveReport {
            resinit,
            resfinal: f64::NAN,
            iouter: 0,
            totits: 0,
            per_outer: Vec::new(),
            converged: false,
            diverged: false,
            fallbacks: 0,
            maxbasis: 0,
            solution: vec![0.0; n],
        }
    }

    fn push(&mut self, inner: InnerSolve) {
        self.iouter += 1;
        self.totits += inner.iterations;
        self.maxbasis = self.maxbasis.max(inner.iterations);
        self.per_outer.push(inner);
    }
}

/// `||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)`, zero when the
/// denominator vanishes.
pub fn backward_error(a: &SparseSpd, x: &[f64], b: &[f64]) -> f64 {
    let r = residual(a, x, b);
    backward_error_from(a.inf_norm(), x, b, &r)
}

fn backward_error_from(norm_a: f64, x: &[f64], b: &[f64], r: &[f64]) -> f64 {
    let denom = norm_a * inf_norm_vector(x) + inf_norm_vector(b);
    if denom == 0.0 {
        return 0.0;
    }
    inf_norm_vector(r) / denom
}

fn residual(a: &SparseSpd, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x).expect("dimension mismatch");
    b.iter().zip(&ax).map(|(bi, yi)| bi - yi).collect()
}

fn diverging(r: &[f64]) -> bool {
    !(inf_norm_vector(r) < DIVERGENCE_THRESHOLD)
}

/// Backward error of `x = L^-T L^-1 b` computed in `f64`.
pub fn initial_backward_error(a: &SparseSpd, b: &[f64], l: &IcFactor) -> f64 {
    let x = apply_preconditioner(l, b, ExecMode::CastF64).expect("f64 solves cannot overflow");
    backward_error(a, &x, b)
}

/// IC-LU-IR: every correction is one application of `(L L^T)^-1`, in the
/// factor's format when that is a half-precision format and in `f64`
/// otherwise. A native application that signals overflow is redone in `f64`.
pub fn ic_lu_ir(a: &SparseSpd, b: &[f64], l: &IcFactor, delta: f64, itmax: usize) -> SolveReport {
    let n = a.n();
    let norm_a = a.inf_norm();
    let mode = if l.format().is_half() {
        ExecMode::NativeLow
    } else {
        ExecMode::CastF64
    };
    let mut report = SolveReport::new(initial_backward_error(a, b, l), n);
    let apply = |r: &[f64], report: &mut SolveReport| -> (Vec<f64>, bool) {
        match apply_preconditioner(l, r, mode) {
            Ok(v) => (v, false),
            Err(_) => {
                report.fallbacks += 1;
                let v = apply_preconditioner(l, r, ExecMode::CastF64).expect("f64 solves cannot overflow");
                (v, true)
            }
        }
    };

    let (mut x, _) = apply(b, &mut report);
    let mut r = residual(a, &x, b);
    let mut res = backward_error_from(norm_a, &x, b, &r);
    loop {
        if res <= delta {
            report.converged = true;
            break;
        }
        if diverging(&r) || x.iter().any(|v| !v.is_finite()) {
            report.diverged = true;
            break;
        }
        if report.iouter >= itmax {
            break;
        }
        let (d, fallback) = apply(&r, &mut report);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        r = residual(a, &x, b);
        res = backward_error_from(norm_a, &x, b, &r);
        report.push(InnerSolve {
            iterations: 0,
            status: None,
            fallback,
            backward_error: res,
        });
    }
    report.resfinal = res;
    report.solution = x;
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cg,
    Gmres,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovIrParams {
    pub method: Method,
    pub delta: f64,
    pub delta_krylov: f64,
    pub inner_maxit: usize,
    pub itmax: usize,
}

impl Default for KrylovIrParams {
    fn default() -> Self {
        KrylovIrParams {
            method: Method::Cg,
            delta: default_delta(),
            delta_krylov: default_delta_krylov(),
            inner_maxit: 1000,
            itmax: 20,
        }
    }
}

/// IC-Krylov-IR from `x = 0`, preconditioning with the factor in `f64`.
///
/// The outer loop also stops, after applying the partial correction, when an
/// inner solve ends without converging.
pub fn ic_krylov_ir(a: &SparseSpd, b: &[f64], l: &IcFactor, params: KrylovIrParams) -> SolveReport {
    let n = a.n();
    let norm_a = a.inf_norm();
    let mut report = SolveReport::new(initial_backward_error(a, b, l), n);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut res = backward_error_from(norm_a, &x, b, &r);
    loop {
        if res <= params.delta {
            report.converged = true;
            break;
        }
        if diverging(&r) || x.iter().any(|v| !v.is_finite()) {
            report.diverged = true;
            break;
        }
        if report.iouter >= params.itmax {
            break;
        }
        let out = match params.method {
            Method::Cg => pcg(a, l, &r, params.delta_krylov, params.inner_maxit),
            Method::Gmres => gmres(a, l, &r, params.delta_krylov, params.inner_maxit),
        };
        for (xi, di) in x.iter_mut().zip(&out.solution) {
            *xi += di;
        }
        r = residual(a, &x, b);
        res = backward_error_from(norm_a, &x, b, &r);
        report.push(InnerSolve {
            iterations: out.iterations,
            status: Some(out.status),
            fallback: false,
            backward_error: res,
        });
        if out.status != KrylovStatus::Converged {
            report.converged = res <= params.delta;
            break;
        }
    }
    report.resfinal = res;
    report.solution = x;
    report
}

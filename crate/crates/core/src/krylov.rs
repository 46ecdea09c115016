//! Preconditioned conjugate gradients and full GMRES in `f64`.

use serde::{Deserialize, Serialize};

use crate::sparse::{dot, norm2, SparseSpd};
use crate::trisolve::Preconditioner;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrylovStatus {
    Converged,
    MaxIterations,
    /// CG met `p^T A p` too small to continue.
    SmallCurvature,
    /// A non-finite or non-positive inner product stopped the recurrence.
    Stagnated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrylovOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub status: KrylovStatus,
    /// Convergence measure after each iteration, starting with the initial
    /// value: `||M^-1 r||_2` for CG, the preconditioned residual norm for
    /// GMRES.
    pub history: Vec<f64>,
}

impl KrylovOutcome {
    fn zero(n: usize) -> Self {
        KrylovOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            status: KrylovStatus::Converged,
            history: vec![0.0],
        }
    }
}

/// Preconditioned CG from `x = 0`.
///
/// Stops when `||M^-1 r||_2 <= tol ||M^-1 b||_2`.
pub fn pcg<M: Preconditioner + ?Sized>(
    a: &SparseSpd,
    m: &M,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> KrylovOutcome {
    pcg_observed(a, m, b, tol, maxit, |_, _| {})
}

/// [`pcg`] calling `observe(r, z)` with every residual and preconditioned
/// residual, the initial pair included.
pub fn pcg_observed<M, F>(
    a: &SparseSpd,
    m: &M,
    b: &[f64],
    tol: f64,
    maxit: usize,
    mut observe: F,
) -> KrylovOutcome
where
    M: Preconditioner + ?Sized,
    F: FnMut(&[f64], &[f64]),
{
    let n = a.n();
    assert_eq!(b.len(), n, "right-hand side length mismatch");
    if b.iter().all(|&v| v == 0.0) {
        return KrylovOutcome::zero(n);
    }
    let tiny = 1e2 * f64::EPSILON / 2.0 * a.inf_norm();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = m.apply(&r);
    observe(&r, &z);
    let z0 = norm2(&z);
    let mut history = vec![z0];
    if z0 == 0.0 {
        return KrylovOutcome::zero(n);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut status = KrylovStatus::MaxIterations;
    let mut iterations = 0;

    for it in 1..=maxit {
        a.matvec_into(&p, &mut q).expect("dimensions checked");
        let pq = dot(&p, &q);
        let pp = dot(&p, &p);
        if !(pq > tiny * pp) {
            status = KrylovStatus::SmallCurvature;
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        iterations = it;
        z = m.apply(&r);
        observe(&r, &z);
        let zn = norm2(&z);
        history.push(zn);
        if zn <= tol * z0 {
            status = KrylovStatus::Converged;
            break;
        }
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0 && rz_new.is_finite()) {
            status = KrylovStatus::Stagnated;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    KrylovOutcome {
        solution: x,
        iterations,
        status,
        history,
    }
}

/// Left-preconditioned GMRES from `x = 0` without restarts.
///
/// The basis holds at most `maxit` vectors. Stops when the preconditioned
/// residual norm falls to `tol` times its initial value, or on a happy
/// breakdown.
pub fn gmres<M: Preconditioner + ?Sized>(
    a: &SparseSpd,
    m: &M,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> KrylovOutcome {
    let n = a.n();
    assert_eq!(b.len(), n, "right-hand side length mismatch");
    if b.iter().all(|&v| v == 0.0) {
        return KrylovOutcome::zero(n);
    }
    let r0 = m.apply(b);
    let beta = norm2(&r0);
    if beta == 0.0 {
        return KrylovOutcome::zero(n);
    }

    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
    // column k of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut history = vec![beta];
    let mut status = KrylovStatus::MaxIterations;
    let mut av = vec![0.0; n];

    for k in 0..maxit {
        a.matvec_into(&basis[k], &mut av).expect("dimensions checked");
        let mut w = m.apply(&av);
        let w_norm = norm2(&w);
        let mut col = vec![0.0; k + 2];
        for (i, v) in basis.iter().enumerate() {
            let hik = dot(&w, v);
            col[i] = hik;
            for (wt, vt) in w.iter_mut().zip(v) {
                *wt -= hik * vt;
            }
        }
        let next = norm2(&w);
        col[k + 1] = next;
        if !next.is_finite() || col.iter().any(|v| !v.is_finite()) {
            status = KrylovStatus::Stagnated;
            break;
        }

        for i in 0..k {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let rho = col[k].hypot(col[k + 1]);
        let (c, s) = if rho == 0.0 {
            (1.0, 0.0)
        } else {
            (col[k] / rho, col[k + 1] / rho)
        };
        col[k] = rho;
        col[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[k]);
        g[k] *= c;
        h.push(col);

        let res = g[k + 1].abs();
        history.push(res);
        let happy = next <= f64::EPSILON * w_norm;
        if res <= tol * beta || happy {
            status = if rho == 0.0 {
                KrylovStatus::Stagnated
            } else {
                KrylovStatus::Converged
            };
            break;
        }
        basis.push(w.iter().map(|v| v / next).collect());
    }

    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    let mut x = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        for (xt, vt) in x.iter_mut().zip(v) {
            *xt += yi * vt;
        }
    }
    KrylovOutcome {
        solution: x,
        iterations: k,
        status,
        history,
    }
}

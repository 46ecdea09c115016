//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use halfic::{FillPattern, SparseSpd};
use rand::Rng;

/// Rounds an `f64` to IEEE binary16 by manipulating the bit pattern.
/// Returns the binary16 encoding; overflow gives infinity.
pub fn f64_to_f16_bits(x: f64) -> u16 {
    let bits = x.to_bits();
    let sign = ((bits >> 63) as u16) << 15;
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0x7ff {
        return sign | 0x7c00 | if mant != 0 { 0x200 } else { 0 };
    }
    if exp == 0 {
        // f64 subnormals are far below the binary16 range
        return sign;
    }
    let e = exp - 1023;
    if e > 15 {
        return sign | 0x7c00;
    }
    if e >= -14 {
        // normal target: keep 10 of the 52 fraction bits
        let q = ((e + 15) as u64) << 10 | (mant >> 42);
        let rem = mant & ((1 << 42) - 1);
        let half = 1u64 << 41;
        let r = q + (rem > half || (rem == half && q & 1 == 1)) as u64;
        return if r >= 0x7c00 { sign | 0x7c00 } else { sign | r as u16 };
    }
    // subnormal target: count units of 2^-24
    let shift = (28 - e) as u32;
    if shift > 54 {
        return sign;
    }
    let sig = (mant | (1u64 << 52)) as u128;
    let q = (sig >> shift) as u64;
    let rem = sig & ((1u128 << shift) - 1);
    let half = 1u128 << (shift - 1);
    let r = q + (rem > half || (rem == half && q & 1 == 1)) as u64;
    sign | r as u16
}

/// Decodes a finite binary16 encoding.
pub fn f16_bits_to_f64(h: u16) -> f64 {
    let sign = if h & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = ((h >> 10) & 0x1f) as i32;
    let mant = (h & 0x3ff) as f64;
    let mag = match exp {
        0 => mant * 2f64.powi(-24),
        0x1f => f64::INFINITY,
        _ => (1024.0 + mant) * 2f64.powi(exp - 25),
    };
    sign * mag
}

pub fn is_f16_inf(h: u16) -> bool {
    h & 0x7fff == 0x7c00
}

/// A uniformly random finite binary16 value.
pub fn random_f16<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let h: u16 = rng.gen();
        if (h >> 10) & 0x1f != 0x1f {
            return f16_bits_to_f64(h);
        }
    }
}

/// Random `f64` inputs covering normal, subnormal, tie and overflow ranges of
/// binary16.
pub fn random_rounding_input<R: Rng>(rng: &mut R) -> f64 {
    let sign = if rng.gen::<bool>() { -1.0 } else { 1.0 };
    let mag = match rng.gen_range(0..6) {
        // arbitrary magnitudes from deep underflow to overflow
        0 => 2f64.powf(rng.gen_range(-30.0..18.0)),
        // normal range
        1 => 2f64.powf(rng.gen_range(-14.0..16.0)),
        // subnormal range
        2 => rng.gen_range(0.0..6.2e-5),
        // exact midpoints between neighbouring binary16 values
        3 => {
            let h: u16 = rng.gen_range(0..0x7bff);
            (f16_bits_to_f64(h) + f16_bits_to_f64(h + 1)) / 2.0
        }
        // around x_max and the overflow threshold 65520
        4 => rng.gen_range(65000.0..66000.0),
        // binary16 values perturbed by one f64 ulp
        _ => {
            let v = f16_bits_to_f64(rng.gen_range(1..0x7c00));
            let bits = v.to_bits();
            f64::from_bits(if rng.gen::<bool>() { bits + 1 } else { bits - 1 })
        }
    };
    sign * mag
}

/// Dense Cholesky `A = L L^T`, or `None` if a pivot is not positive.
pub fn dense_cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `A x = b` through [`dense_cholesky`].
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let l = dense_cholesky(a).expect("SPD");
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}

/// Random sparse SPD matrix: symmetric off-diagonal entries in `[-1, 1]`
/// with the given density and a diagonal of randomly scaled row sums, so
/// some draws are not diagonally dominant. Indefinite draws are retried.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, density: f64) -> SparseSpd {
    loop {
        let mut t = Vec::new();
        let mut rowsum = vec![0.0f64; n];
        for j in 0..n {
            for i in j + 1..n {
                if rng.gen::<f64>() < density {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    t.push((i, j, v));
                    rowsum[i] += v.abs();
                    rowsum[j] += v.abs();
                }
            }
        }
        let dominance = rng.gen_range(0.6..1.5);
        for (i, s) in rowsum.iter().enumerate() {
            t.push((i, i, dominance * s + rng.gen_range(0.05..1.0)));
        }
        let a = SparseSpd::from_triplets(n, t).unwrap();
        if dense_cholesky(&a.to_dense()).is_some() {
            return a;
        }
    }
}

/// Random symmetric structure with a full diagonal.
pub fn random_structure<R: Rng>(rng: &mut R, n: usize, density: f64) -> SparseSpd {
    let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for j in 0..n {
        for i in j + 1..n {
            if rng.gen::<f64>() < density {
                t.push((i, j, 1.0));
            }
        }
    }
    SparseSpd::from_triplets(n, t).unwrap()
}

/// Fill levels from explicit symbolic elimination:
/// `lev(i, j) = min over k < min(i, j) of lev(i, k) + lev(k, j) + 1`,
/// with entries of `A` at level 0.
pub fn fill_levels(a: &SparseSpd) -> Vec<Vec<usize>> {
    let n = a.n();
    let inf = usize::MAX / 4;
    let mut lev = vec![vec![inf; n]; n];
    for (i, j, _) in a.iter() {
        lev[i][j] = 0;
        lev[j][i] = 0;
    }
    for k in 0..n {
        for i in k + 1..n {
            if lev[i][k] >= inf {
                continue;
            }
            for j in k + 1..n {
                if lev[k][j] >= inf {
                    continue;
                }
                let cand = lev[i][k] + lev[k][j] + 1;
                if cand < lev[i][j] {
                    lev[i][j] = cand;
                }
            }
        }
    }
    lev
}

/// The IC(level) pattern according to [`fill_levels`].
pub fn pattern_oracle(levels: &[Vec<usize>], level: usize) -> FillPattern {
    let n = levels.len();
    let cols = (0..n)
        .map(|j| (j + 1..n).filter(|&i| levels[i][j] <= level).collect())
        .collect();
    FillPattern::from_columns(level, cols)
}

/// Same entry set, ignoring the recorded level.
pub fn same_entries(a: &FillPattern, b: &FillPattern) -> bool {
    a.col_ptr() == b.col_ptr() && a.row_idx() == b.row_idx()
}

/// Five-point Laplacian on an `m x m` grid.
pub fn laplacian_2d(m: usize) -> SparseSpd {
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let k = i * m + j;
            t.push((k, k, 4.0));
            if j > 0 {
                t.push((k, k - 1, -1.0));
            }
            if i > 0 {
                t.push((k, k - m, -1.0));
            }
        }
    }
    SparseSpd::from_triplets(m * m, t).unwrap()
}

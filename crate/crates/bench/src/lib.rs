//! Test matrices shared by the benchmarks.

use halfic::SparseSpd;

/// Five-point Laplacian on an `m x m` grid.
pub fn laplacian_2d(m: usize) -> SparseSpd {
    let mut t = Vec::with_capacity(3 * m * m);
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
    SparseSpd::from_triplets(m * m, t).expect("valid laplacian")
}

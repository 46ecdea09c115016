//! Level-of-fill patterns for IC(ℓ).
//!
//! Entry `(i, j)`, `j < i`, belongs to the IC(ℓ) pattern when the adjacency
//! graph of `A` has a path from `j` to `i` with at most `ℓ + 1` edges whose
//! interior vertices are all numbered below `j`. Each row is found by its own
//! search, so rows are computed in parallel.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;

use crate::sparse::SparseSpd;

/// Permitted positions of the incomplete factor, lower triangle by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FillPattern {
    n: usize,
    level: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl FillPattern {
    /// Builds a pattern from per-column row lists. Each list is sorted and
    /// the diagonal is inserted when absent.
    pub fn from_columns(level: usize, columns: Vec<Vec<usize>>) -> Self {
        let n = columns.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for (j, mut col) in columns.into_iter().enumerate() {
            col.retain(|&i| i > j && i < n);
            col.sort_unstable();
            col.dedup();
            row_idx.push(j);
            row_idx.extend(col);
            col_ptr.push(row_idx.len());
        }
        FillPattern {
            n,
            level,
            col_ptr,
            row_idx,
        }
    }

    /// The structure of `a` itself (IC(0)).
    pub fn of_matrix(a: &SparseSpd) -> Self {
        FillPattern {
            n: a.n(),
            level: 0,
            col_ptr: a.col_ptr().to_vec(),
            row_idx: a.row_idx().to_vec(),
        }
    }

    /// Dense lower triangle.
    pub fn full(n: usize) -> Self {
        let cols = (0..n).map(|j| (j..n).collect()).collect();
        Self::from_columns(usize::MAX, cols)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Rows of column `j`, diagonal first.
    pub fn column(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.column(j).binary_search(&i).is_ok()
    }

    /// Whether every stored position of `a` is in the pattern.
    pub fn covers(&self, a: &SparseSpd) -> Option<(usize, usize)> {
        a.iter()
            .find(|&(i, j, _)| !self.contains(i, j))
            .map(|(i, j, _)| (i, j))
    }

    /// Whether `self` is a subset of `other`.
    pub fn is_subset_of(&self, other: &FillPattern) -> bool {
        self.n == other.n
            && (0..self.n).all(|j| self.column(j).iter().all(|&i| other.contains(i, j)))
    }
}

struct RowScratch {
    dist: Vec<u32>,
    seen: Vec<usize>,
    queued: Vec<usize>,
    heap: BinaryHeap<Reverse<usize>>,
    queue: VecDeque<usize>,
}

impl RowScratch {
    fn new(n: usize) -> Self {
        RowScratch {
            dist: vec![u32::MAX; n],
            seen: vec![usize::MAX; n],
            queued: vec![usize::MAX; n],
            heap: BinaryHeap::new(),
            queue: VecDeque::new(),
        }
    }
}

/// Columns `j < i` of row `i` of the IC(ℓ) pattern, ascending.
///
/// Candidate targets are taken in increasing order. Once a vertex has been
/// taken it may serve as an interior vertex for every later target, and any
/// improvement of its distance is pushed on to its neighbours.
fn row_pattern(i: usize, adj: &[Vec<usize>], max_edges: u32, s: &mut RowScratch) -> Vec<usize> {
    let mut out = Vec::new();
    let stamp = i;
    let dist = |s: &RowScratch, v: usize| if s.seen[v] == stamp { s.dist[v] } else { u32::MAX };

    s.heap.clear();
    for &w in &adj[i] {
        if w < i {
            s.seen[w] = stamp;
            s.dist[w] = 1;
            s.queued[w] = stamp;
            s.heap.push(Reverse(w));
        }
    }
    while let Some(Reverse(m)) = s.heap.pop() {
        out.push(m);
        let threshold = m;
        s.queue.clear();
        s.queue.push_back(m);
        while let Some(v) = s.queue.pop_front() {
            let dv = s.dist[v];
            if dv >= max_edges {
                continue;
            }
            for &w in &adj[v] {
                if w >= i {
                    continue;
                }
                if dv + 1 < dist(s, w) {
                    s.seen[w] = stamp;
                    s.dist[w] = dv + 1;
                    if w <= threshold {
                        s.queue.push_back(w);
                    } else if s.queued[w] != stamp {
                        s.queued[w] = stamp;
                        s.heap.push(Reverse(w));
                    }
                }
            }
        }
    }
    out
}

/// IC(ℓ) fill pattern of the symmetric structure of `a`.
pub fn ic_pattern(a: &SparseSpd, level: usize) -> FillPattern {
    let n = a.n();
    let adj = a.adjacency();
    let max_edges = u32::try_from(level.saturating_add(1).min(n.max(1)))
        .unwrap_or(u32::MAX - 1);

    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map_init(
            || RowScratch::new(n),
            |s, i| row_pattern(i, &adj, max_edges, s),
        )
        .collect();

    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in rows.into_iter().enumerate() {
        for j in row {
            columns[j].push(i);
        }
    }
    FillPattern::from_columns(level, columns)
}

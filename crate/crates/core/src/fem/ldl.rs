//! Envelope (skyline) LDLᵀ for sparse symmetric matrices, with reverse
//! Cuthill–McKee ordering. No pivoting: callers keep the matrix either
//! definite or safely shifted away from its spectrum.

use std::collections::VecDeque;

use super::sparse::SparseSymMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// First column stored in each row (new numbering).
    first: Vec<usize>,
    start: Vec<usize>,
    lower: Vec<f64>,
    d: Vec<f64>,
}

/// Reverse Cuthill–McKee ordering of the matrix graph; returns `perm[new] = old`.
pub fn rcm_ordering(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    let bfs_levels = |root: usize, level: &mut Vec<usize>| -> (usize, Vec<usize>) {
        let mut touched = vec![root];
        level[root] = 0;
        let mut q = VecDeque::from([root]);
        let mut depth = 0;
        while let Some(u) = q.pop_front() {
            depth = depth.max(level[u]);
            for &v in a.row(u).0 {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    touched.push(v);
                    q.push_back(v);
                }
            }
        }
        let last: Vec<usize> = touched.iter().copied().filter(|&v| level[v] == depth).collect();
        for &v in &touched {
            level[v] = usize::MAX;
        }
        (depth, last)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // Pseudo-peripheral start node (George–Liu).
        let mut root = seed;
        let (mut ecc, mut last) = bfs_levels(root, &mut level);
        loop {
            let cand = *last.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            let (e2, l2) = bfs_levels(cand, &mut level);
            if e2 > ecc {
                root = cand;
                ecc = e2;
                last = l2;
            } else {
                break;
            }
        }
        visited[root] = true;
        let mut q = VecDeque::from([root]);
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = a.row(u).0.iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

impl LdlFactor {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        let perm = rcm_ordering(a);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first = vec![0; n];
        for (i, &old) in perm.iter().enumerate() {
            first[i] = a.row(old).0.iter().map(|&j| iperm[j]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i]));
        }
        let mut lower = vec![0.0; start[n]];
        let mut d = vec![0.0; n];
        for (i, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jj = iperm[j];
                if jj < i {
                    lower[start[i] + jj - first[i]] = v;
                } else if jj == i {
                    d[i] = v;
                }
            }
        }
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(a.max_abs());
        let tiny = 1e-14 * scale;

        for i in 0..n {
            let fi = first[i];
            // Row i holds g_ij = L_ij·D_j while it is being formed.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let s: f64 = if k0 < j {
                    let ri = &lower[start[i] + k0 - fi..start[i] + j - fi];
                    let rj = &lower[start[j] + k0 - fj..start[j] + j - fj];
                    ri.iter().zip(rj).map(|(x, y)| x * y).sum()
                } else {
                    0.0
                };
                lower[start[i] + j - fi] -= s;
            }
            let mut di = d[i];
            for j in fi..i {
                let g = lower[start[i] + j - fi];
                let l = g / d[j];
                di -= g * l;
                lower[start[i] + j - fi] = l;
            }
            if !(di.abs() > tiny) {
                return Err(Error::Factorization { index: i, pivot: di });
            }
            d[i] = di;
        }
        Ok(LdlFactor { n, perm, first, start, lower, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative pivots; equals the number of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    /// Stored envelope entries.
    pub fn envelope(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&x[fi..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let xi = x[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (xj, l) in x[fi..i].iter_mut().zip(row) {
                *xj -= l * xi;
            }
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &SparseSymMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, yi)| bi - yi).collect();
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        x
    }
}

/// Direct solve of `A x = b` for symmetric `A`.
pub fn solve_sparse(a: &SparseSymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(LdlFactor::factor(a)?.solve_refined(a, b))
}

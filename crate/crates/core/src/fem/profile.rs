//! Envelope (skyline) Cholesky factorisation under reverse Cuthill–McKee
//! ordering. Used where one SPD matrix is solved against many right-hand
//! sides, such as the fixed elastic tangent of the plastic Newton loop.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::sparse::CsrMatrix;

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn rcm_order(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|&(j, _)| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        // Pseudo-peripheral start: walk to the last level of a BFS twice.
        let root = peripheral(a, start, &degree);
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn peripheral(a: &CsrMatrix, start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let mut depth = 0;
    for _ in 0..2 {
        let (last, d) = bfs_last(a, root, degree);
        if d <= depth {
            break;
        }
        depth = d;
        root = last;
    }
    root
}

fn bfs_last(a: &CsrMatrix, root: usize, degree: &[usize]) -> (usize, usize) {
    let mut level = vec![usize::MAX; a.n()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = (root, 0usize);
    while let Some(v) = queue.pop_front() {
        let lv = level[v];
        if lv > last.1 || (lv == last.1 && degree[v] < degree[last.0]) {
            last = (v, lv);
        }
        for (j, _) in a.row(v) {
            if level[j] == usize::MAX {
                level[j] = lv + 1;
                queue.push_back(j);
            }
        }
    }
    last
}

/// `A = L Lᵀ` with `L` stored row-wise from each row's first nonzero column.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self, NotPositiveDefinite> {
        let n = a.n();
        let perm = rcm_order(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (j_old, _) in a.row(old) {
                let j = inv[j_old];
                if j < i && j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for old in 0..n {
            let i = inv[old];
            for (j_old, v) in a.row(old) {
                let j = inv[j_old];
                if j <= i {
                    data[start[i] + (j - first[i])] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + (j - fi)];
                let ri = &data[si + (k0 - fi)..si + (j - fi)];
                let rj = &data[sj + (k0 - fj)..sj + (j - fj)];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                data[si + (j - fi)] = s / data[sj + (j - fj)];
            }
            let row = &data[si..si + (i - fi)];
            let d = data[si + (i - fi)] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) {
                return Err(NotPositiveDefinite { row: perm[i], pivot: d });
            }
            data[si + (i - fi)] = libm::sqrt(d);
        }
        Ok(Self { perm, first, start, data })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.data[si..si + (i - fi)];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, y)| l * y).sum();
            y[i] = (y[i] - s) / self.data[si + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            y[i] /= self.data[si + (i - fi)];
            let yi = y[i];
            for (k, l) in self.data[si..si + (i - fi)].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

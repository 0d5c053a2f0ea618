use std::collections::VecDeque;

use super::{CsrMatrix, SolveError};

fn symmetric_adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.dim();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// BFS levels from `start` restricted to unvisited nodes; returns the last
/// level and the number of levels.
fn last_level(adj: &[Vec<usize>], start: usize, visited: &[bool]) -> (Vec<usize>, usize) {
    let mut seen = visited.to_vec();
    seen[start] = true;
    let mut level = vec![start];
    let mut depth = 1;
    loop {
        let mut next = Vec::new();
        for &u in &level {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return (level, depth);
        }
        level = next;
        depth += 1;
    }
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let adj = symmetric_adjacency(a);
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let mut start = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)).unwrap();
        // pseudo-peripheral start node
        let (mut level, mut depth) = last_level(&adj, start, &visited);
        for _ in 0..8 {
            let candidate = *level.iter().min_by_key(|&&v| (degree[v], v)).unwrap();
            let (l2, d2) = last_level(&adj, candidate, &visited);
            if d2 <= depth {
                break;
            }
            start = candidate;
            level = l2;
            depth = d2;
        }
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_unstable_by_key(|&v| (degree[v], v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU factorization with partial pivoting of a symmetrically permuted
/// sparse matrix.
///
/// Row `i` of the band stores columns `i - kl ..= i + kl + ku`, which leaves
/// room for the fill created by row interchanges.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    perm: Vec<usize>,
    inv: Vec<usize>,
    ab: Vec<f64>,
    /// Multipliers of elimination step `k`, rows `k+1 ..= k+kl`.
    ml: Vec<f64>,
    piv: Vec<usize>,
    /// Last column of row `k` of `U` that can be nonzero.
    row_end: Vec<usize>,
}

impl BandLu {
    pub fn new(a: &CsrMatrix) -> Result<Self, SolveError> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        let w = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            perm,
            inv,
            ab: vec![0.0; n * w],
            ml: vec![0.0; n * kl],
            piv: vec![0; n],
            row_end: vec![0; n],
        };
        lu.refactor(a)?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth after reordering.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    /// Refactorizes with new values, keeping the ordering. Falls back to a
    /// fresh analysis if the pattern no longer fits the band.
    pub fn refactor(&mut self, a: &CsrMatrix) -> Result<(), SolveError> {
        assert_eq!(a.dim(), self.n);
        self.ab.fill(0.0);
        for i in 0..self.n {
            let pi = self.inv[i];
            for (j, v) in a.row(i) {
                let pj = self.inv[j];
                if pi > pj + self.kl || pj > pi + self.ku {
                    *self = BandLu::new(a)?;
                    return Ok(());
                }
                let idx = self.at(pi, pj);
                self.ab[idx] += v;
            }
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<(), SolveError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = self.width();
        let mut ju = 0;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.ab[self.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(SolveError::Singular { row: self.perm[k] });
            }
            self.piv[k] = p;
            ju = ju.max((p + ku).min(n - 1));
            if p != k {
                for j in k..=ju {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.ab.swap(a, b);
                }
            }
            self.row_end[k] = ju;
            let pivot = self.ab[self.at(k, k)];
            let krow = k * w + kl - k;
            for i in k + 1..=last_row {
                let irow = i * w + kl - i;
                let m = self.ab[irow + k] / pivot;
                self.ml[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=ju {
                        self.ab[irow + j] -= m * self.ab[krow + j];
                    }
                }
                self.ab[irow + k] = 0.0;
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.n, self.kl);
        let w = self.width();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    y[i] -= self.ml[k * kl + (i - k - 1)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let krow = k * w + kl - k;
            let mut s = y[k];
            for j in k + 1..=self.row_end[k] {
                s -= self.ab[krow + j] * y[j];
            }
            y[k] = s / self.ab[krow + k];
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

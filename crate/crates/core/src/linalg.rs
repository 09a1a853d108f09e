//! Sparse symmetric matrices and an envelope (skyline) Cholesky factorization.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

/// Symmetric matrix assembled from lower-triangle contributions.
#[derive(Debug, Clone, Default)]
pub struct SparseSym {
    pub n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseSym {
    pub fn new(n: usize) -> Self {
        SparseSym { n, entries: BTreeMap::new() }
    }

    /// Adds `v` to `(i, j)` and, implicitly, to `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let key = (i.max(j), i.min(j));
        *self.entries.entry(key).or_insert(0.0) += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i.max(j), i.min(j))).copied().unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (&(i, j), &v) in &self.entries {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> SparseSym {
        SparseSym { n: self.n, entries: self.entries.iter().map(|(&k, &v)| (k, v * s)).collect() }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for (&(i, j), &v) in &self.entries {
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
        a
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![vec![]; self.n];
        for &(i, j) in self.entries.keys() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        adj
    }

    /// Reverse Cuthill–McKee ordering: `perm[k]` is the original index placed at position `k`.
    pub fn rcm(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let n = self.n;
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut by_degree: Vec<usize> = (0..n).collect();
        by_degree.sort_by_key(|&i| (adj[i].len(), i));
        for &start in &by_degree {
            if seen[start] {
                continue;
            }
            let root = pseudo_peripheral(&adj, start);
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
                nb.sort_by_key(|&w| (adj[w].len(), w));
                for w in nb {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        order
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }
}

fn bfs_levels(adj: &[Vec<usize>], root: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = root;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (dist[last], last)
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let (mut ecc, mut v) = (0, start);
    for _ in 0..8 {
        let (e, far) = bfs_levels(adj, v);
        if e <= ecc {
            break;
        }
        ecc = e;
        v = far;
    }
    v
}

/// `P A Pᵀ = L Lᵀ` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n;
        let perm = a.rcm();
        let mut inv = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j) in a.entries.keys() {
            let (pi, pj) = (inv[i], inv[j]);
            let (r, c) = (pi.max(pj), pi.min(pj));
            first[r] = first[r].min(c);
        }
        let mut start = vec![0; n + 1];
        for r in 0..n {
            start[r + 1] = start[r] + (r - first[r] + 1);
        }
        let mut values = vec![0.0; start[n]];
        for (&(i, j), &v) in &a.entries {
            let (pi, pj) = (inv[i], inv[j]);
            let (r, c) = (pi.max(pj), pi.min(pj));
            values[start[r] + c - first[r]] = v;
        }
        for r in 0..n {
            let fr = first[r];
            for c in fr..=r {
                let fc = first[c];
                let lo = fr.max(fc);
                let mut s = values[start[r] + c - fr];
                for k in lo..c {
                    s -= values[start[r] + k - fr] * values[start[c] + k - fc];
                }
                if c < r {
                    values[start[r] + c - fr] = s / values[start[c] + c - fc];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { row: perm[r], pivot: s });
                    }
                    values[start[r] + r - fr] = s.sqrt();
                }
            }
        }
        Ok(Cholesky { n, perm, first, start, values })
    }

    fn l(&self, r: usize, c: usize) -> f64 {
        if c < self.first[r] {
            0.0
        } else {
            self.values[self.start[r] + c - self.first[r]]
        }
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|r| self.l(r, r).ln()).sum::<f64>()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for r in 0..n {
            let fr = self.first[r];
            let mut s = y[r];
            for k in fr..r {
                s -= self.values[self.start[r] + k - fr] * y[k];
            }
            y[r] = s / self.l(r, r);
        }
        for r in (0..n).rev() {
            y[r] /= self.l(r, r);
            let fr = self.first[r];
            let yr = y[r];
            for k in fr..r {
                y[k] -= self.values[self.start[r] + k - fr] * yr;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    /// Solves `Lᵀ z = w` in the permuted basis, so that `z ~ N(0, A⁻¹)` when `w ~ N(0, I)`.
    pub fn sample_transform(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = w.to_vec();
        for r in (0..n).rev() {
            y[r] /= self.l(r, r);
            let fr = self.first[r];
            let yr = y[r];
            for k in fr..r {
                y[k] -= self.values[self.start[r] + k - fr] * yr;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }
}

/// Smallest eigenvalue of a positive-definite matrix by inverse iteration.
pub fn smallest_eigenvalue(a: &SparseSym, chol: &Cholesky, iterations: usize) -> f64 {
    let n = a.n;
    if n == 0 {
        return f64::INFINITY;
    }
    // fixed, non-symmetric start vector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut lambda = f64::INFINITY;
    for _ in 0..iterations {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        let rq = a.quad_form(&x);
        if (lambda - rq).abs() <= 1e-13 * rq.abs() {
            return rq;
        }
        lambda = rq;
        x = chol.solve(&x);
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    a.quad_form(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> SparseSym {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SparseSym::new(n);
        // graph Laplacian of a random sparse graph plus a positive diagonal
        for i in 0..n {
            a.add(i, i, 0.1 + rng.random::<f64>());
            for _ in 0..2 {
                let j = rng.random_range(0..n);
                if j != i {
                    let w = rng.random::<f64>();
                    a.add(i, i, w);
                    a.add(j, j, w);
                    a.add(i, j, -w);
                }
            }
        }
        a
    }

    #[test]
    fn log_det_and_solve_match_dense() {
        for seed in 0..5 {
            let a = random_spd(60, seed);
            let dense = DMatrix::from_row_slice(60, 60, &a.to_dense());
            let ch = a.cholesky().unwrap();
            let dch = dense.clone().cholesky().unwrap();
            let want = 2.0 * dch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            assert!((ch.log_det() - want).abs() < 1e-10 * want.abs().max(1.0));
            let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
            let x = ch.solve(&b);
            let r = a.mul(&x);
            for i in 0..60 {
                assert!((r[i] - b[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lattice_envelope_is_banded() {
        // 2D grid Laplacian with Dirichlet diagonal: envelope ~ n * side, not n^2 / 2
        let side = 30;
        let n = side * side;
        let mut a = SparseSym::new(n);
        for i in 0..side {
            for j in 0..side {
                let k = i * side + j;
                a.add(k, k, 4.0);
                if i + 1 < side {
                    a.add(k, k + side, -1.0);
                }
                if j + 1 < side {
                    a.add(k, k + 1, -1.0);
                }
            }
        }
        let ch = a.cholesky().unwrap();
        assert!(ch.envelope_size() < 3 * n * side, "{}", ch.envelope_size());
        let lmin = smallest_eigenvalue(&a, &ch, 500);
        let h = std::f64::consts::PI / (side as f64 + 1.0);
        let want = 4.0 - 4.0 * h.cos();
        assert!((lmin - want).abs() < 1e-9, "{lmin} vs {want}");
    }

    #[test]
    fn indefinite_is_reported() {
        let mut a = SparseSym::new(2);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(0, 1, 2.0);
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite { .. })));
    }
}

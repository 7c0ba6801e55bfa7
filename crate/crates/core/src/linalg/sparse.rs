//! Compressed sparse column storage and an LDL^T factorization for
//! quasi-definite symmetric matrices.
//!
//! The factorization follows the up-looking scheme of QDLDL: elimination tree
//! and column counts are computed once per sparsity pattern, numeric values
//! are refreshed in place before each refactorization.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    /// Builds from `(row, col, value)` triplets, summing duplicates. Row
    /// indices are sorted within each column.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].1, triplets[k].0));
        let mut colptr = vec![0; ncols + 1];
        let mut rowval = Vec::with_capacity(triplets.len());
        let mut nzval: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last = (NONE, NONE);
        for k in order {
            let (i, j, v) = triplets[k];
            assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of range");
            if (i, j) == last {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(i);
                nzval.push(v);
                colptr[j + 1] += 1;
                last = (i, j);
            }
        }
        for j in 0..ncols {
            colptr[j + 1] += colptr[j];
        }
        Self {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rowval.len()
    }

    /// Iterates `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowval[p], j, self.nzval[p]))
        })
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for (i, j, v) in self.iter() {
            y[i] += v * x[j];
        }
    }

    /// `y = A^T x`.
    pub fn tmul_vec(&self, x: &[T], y: &mut [T]) {
        for j in 0..self.ncols {
            let mut s = T::zero();
            for p in self.colptr[j]..self.colptr[j + 1] {
                s += self.nzval[p] * x[self.rowval[p]];
            }
            y[j] = s;
        }
    }

    /// Dense row-major copy (tests and small diagnostics only).
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.nrows * self.ncols];
        for (i, j, v) in self.iter() {
            d[i * self.ncols + j] += v;
        }
        d
    }
}

/// Minimum degree ordering of a symmetric pattern given as (i, j) pairs.
/// Ties go to the smaller index so the result is deterministic.
pub fn minimum_degree(n: usize, pattern: impl IntoIterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, j) in pattern {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut done = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if done[v] || deg != adj[v].len() {
            continue;
        }
        done[v] = true;
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}

#[derive(Debug, Clone, PartialEq)]
pub enum LdlError {
    /// A pivot was zero or not finite.
    ZeroPivot(usize),
}

/// LDL^T factorization of a symmetric matrix with a fixed sparsity pattern.
///
/// The input is the upper triangle (row <= col) in the caller's ordering; the
/// factorization runs on `P K P^T` with a minimum degree permutation.
#[derive(Debug, Clone)]
pub struct LdlSolver<T> {
    n: usize,
    /// `perm[k]` is the original index eliminated at step `k`.
    perm: Vec<usize>,
    /// Permuted upper triangle.
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<T>,
    /// Position in `ax` of every input triplet.
    slot: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    dinv: Vec<T>,
    /// Expected pivot signs in permuted order.
    signs: Vec<i8>,
    pub dynamic_eps: T,
    pub dynamic_delta: T,
    pub regularized_pivots: usize,
}

impl<T: Scalar> LdlSolver<T> {
    /// Analyses the pattern of `upper` (original ordering, `i <= j`).
    /// `signs[i]` is `+1` or `-1`: the expected sign of pivot `i`, used for
    /// dynamic regularization.
    pub fn new(n: usize, upper: &[(usize, usize)], signs: &[i8]) -> Self {
        let mut diag_pattern: Vec<(usize, usize)> = upper.to_vec();
        diag_pattern.extend((0..n).map(|i| (i, i)));
        let perm = minimum_degree(n, diag_pattern.iter().copied());
        let mut iperm = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        // Every diagonal is present so dynamic regularization always has a slot.
        let permuted: Vec<(usize, usize)> = diag_pattern
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (iperm[i], iperm[j]);
                (a.min(b), a.max(b))
            })
            .collect();
        let mut order: Vec<usize> = (0..permuted.len()).collect();
        order.sort_by_key(|&k| (permuted[k].1, permuted[k].0));
        let mut ap = vec![0; n + 1];
        let mut ai = Vec::with_capacity(permuted.len());
        let mut slot_all = vec![0; permuted.len()];
        let mut last = (NONE, NONE);
        for k in order {
            let (i, j) = permuted[k];
            if (i, j) != last {
                ai.push(i);
                ap[j + 1] += 1;
                last = (i, j);
            }
            slot_all[k] = ai.len() - 1;
        }
        for j in 0..n {
            ap[j + 1] += ap[j];
        }
        let slot = slot_all[..upper.len()].to_vec();

        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in ap[j]..ap[j + 1] {
                let mut i = ai[p];
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz_l = lp[n];
        let signs_p = perm.iter().map(|&p| signs[p]).collect();
        let nnz_a = ai.len();
        Self {
            n,
            perm,
            ap,
            ai,
            ax: vec![T::zero(); nnz_a],
            slot,
            etree,
            lp,
            li: vec![0; nnz_l],
            lx: vec![T::zero(); nnz_l],
            d: vec![T::zero(); n],
            dinv: vec![T::zero(); n],
            signs: signs_p,
            dynamic_eps: T::of(1e-13),
            dynamic_delta: T::of(1e-7),
            regularized_pivots: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_factor(&self) -> usize {
        self.lp[self.n]
    }

    /// Sets matrix values; `values[k]` belongs to `upper[k]` of the pattern
    /// passed to [`LdlSolver::new`]. Duplicates are summed. `diag_shift[i]` is
    /// added to diagonal `i` (original ordering).
    pub fn set_values(&mut self, values: &[T], diag_shift: &[T]) {
        self.ax.iter_mut().for_each(|v| *v = T::zero());
        for (k, &v) in values.iter().enumerate() {
            self.ax[self.slot[k]] += v;
        }
        for (k, &orig) in self.perm.iter().enumerate() {
            // Diagonal is the last entry of its permuted column.
            let p = self.ap[k + 1] - 1;
            debug_assert_eq!(self.ai[p], k);
            self.ax[p] += diag_shift[orig];
        }
    }

    /// Numeric factorization. Pivots with the wrong sign or magnitude below
    /// `dynamic_eps` are replaced by `sign * dynamic_delta`.
    pub fn factor(&mut self) -> Result<(), LdlError> {
        let n = self.n;
        let mut y_vals = vec![T::zero(); n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut marked = vec![false; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        self.regularized_pivots = 0;
        for k in 0..n {
            let mut nnz_y = 0;
            let mut diag = T::zero();
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    diag = self.ax[p];
                    continue;
                }
                y_vals[b] = self.ax[p];
                if marked[b] {
                    continue;
                }
                marked[b] = true;
                elim[0] = b;
                let mut ne = 1;
                let mut next = self.etree[b];
                while next != NONE && next < k {
                    if marked[next] {
                        break;
                    }
                    marked[next] = true;
                    elim[ne] = next;
                    ne += 1;
                    next = self.etree[next];
                }
                while ne > 0 {
                    ne -= 1;
                    y_idx[nnz_y] = elim[ne];
                    nnz_y += 1;
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let end = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..end {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[end] = k;
                let l = yc * self.dinv[c];
                self.lx[end] = l;
                diag -= yc * l;
                next_space[c] += 1;
                y_vals[c] = T::zero();
                marked[c] = false;
            }
            let sign = if self.signs[k] >= 0 { T::one() } else { -T::one() };
            if !diag.is_finite() {
                return Err(LdlError::ZeroPivot(self.perm[k]));
            }
            if diag * sign < self.dynamic_eps {
                diag = sign * self.dynamic_delta;
                self.regularized_pivots += 1;
            }
            self.d[k] = diag;
            self.dinv[k] = T::one() / diag;
        }
        Ok(())
    }

    /// Solves `K x = b` in place (original ordering).
    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let xi = x[i];
            if xi != T::zero() {
                for j in self.lp[i]..self.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                s -= self.lx[j] * x[self.li[j]];
            }
            x[i] = s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, 5.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.to_dense(), vec![4.0, 0.0, 2.0, 5.0]);
        let mut y = vec![0.0; 2];
        a.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![4.0, 7.0]);
        a.tmul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![6.0, 5.0]);
    }

    #[test]
    fn minimum_degree_is_permutation() {
        let p = minimum_degree(5, [(0, 1), (0, 2), (0, 3), (0, 4)]);
        let mut s = p.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
        // The hub starts with the largest degree, so leaves go first.
        assert_ne!(p[0], 0);
    }

    fn quasi_definite(n1: usize, n2: usize, seed: u64) -> (usize, Vec<(usize, usize)>, Vec<f64>, Vec<i8>) {
        let n = n1 + n2;
        let mut pattern = Vec::new();
        let mut vals = Vec::new();
        let mut s = seed;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (1u64 << 31) as f64 - 0.5
        };
        for i in 0..n1 {
            pattern.push((i, i));
            vals.push(1.0 + rnd().abs());
        }
        for j in 0..n2 {
            for i in 0..n1 {
                if (i * 7 + j * 3) % 4 == 0 {
                    pattern.push((i, n1 + j));
                    vals.push(rnd());
                }
            }
            pattern.push((n1 + j, n1 + j));
            vals.push(-1.0 - rnd().abs());
        }
        let signs = (0..n).map(|i| if i < n1 { 1 } else { -1 }).collect();
        (n, pattern, vals, signs)
    }

    #[test]
    fn ldl_solves_quasi_definite() {
        let (n, pattern, vals, signs) = quasi_definite(9, 6, 42);
        let mut ldl = LdlSolver::new(n, &pattern, &signs);
        ldl.set_values(&vals, &vec![0.0; n]);
        ldl.factor().unwrap();
        assert_eq!(ldl.regularized_pivots, 0);
        let x: Vec<f64> = (0..n).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let mut b = vec![0.0; n];
        for (k, &(i, j)) in pattern.iter().enumerate() {
            b[i] += vals[k] * x[j];
            if i != j {
                b[j] += vals[k] * x[i];
            }
        }
        ldl.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-10, "{} vs {}", b[i], x[i]);
        }
    }

    #[test]
    fn dynamic_regularization_replaces_zero_pivot() {
        // [[0, 1], [1, -1]] with expected signs (+, -): the first pivot is zero.
        let mut ldl = LdlSolver::new(2, &[(0, 0), (0, 1), (1, 1)], &[1, -1]);
        ldl.set_values(&[0.0, 1.0, -1.0], &[0.0, 0.0]);
        ldl.factor().unwrap();
        assert!(ldl.regularized_pivots >= 1);
    }
}

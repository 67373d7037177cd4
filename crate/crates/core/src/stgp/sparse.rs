//! Compressed-column sparse matrices, an up-looking sparse Cholesky with a
//! fill-reducing ordering, and the Takahashi selected inverse.
//!
//! Symmetric matrices are stored with both triangles. The factorization
//! works on the upper triangle of `P A Pᵀ` and produces `L` column by
//! column with sorted row indices (diagonal first).

use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept as structural entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for c in 0..ncols {
            order.clear();
            order.extend(counts[c]..counts[c + 1]);
            order.sort_by_key(|&p| rows[p]);
            for &p in &order {
                if row_idx.len() > col_ptr[c] && *row_idx.last().unwrap() == rows[p] {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    row_idx.push(rows[p]);
                    values.push(vals[p]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// Storage position of entry `(i, j)` if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        self.row_idx[lo..hi]
            .binary_search(&i)
            .ok()
            .map(|p| lo + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.column(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (i, v) in self.column(j) {
                    y[i] += v * xj;
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `x' A x` for square `A`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.ncols {
            if x[j] != 0.0 {
                for (i, v) in self.column(j) {
                    acc += x[i] * v * x[j];
                }
            }
        }
        acc
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Sum of matrices of equal shape.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let t: Vec<_> = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        let mut acc = vec![0.0; self.nrows];
        let mut touched = Vec::new();
        let mut seen = vec![false; self.nrows];
        for j in 0..other.ncols {
            for (k, b) in other.column(j) {
                for (i, a) in self.column(k) {
                    if !seen[i] {
                        seen[i] = true;
                        touched.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            for &i in &touched {
                t.push((i, j, acc[i]));
                acc[i] = 0.0;
                seen[i] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, &t)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let nrows = self
            .nrows
            .checked_mul(other.nrows)
            .ok_or_else(|| Error::Size("Kronecker row count overflows".into()))?;
        let ncols = self
            .ncols
            .checked_mul(other.ncols)
            .ok_or_else(|| Error::Size("Kronecker column count overflows".into()))?;
        let nnz = self
            .nnz()
            .checked_mul(other.nnz())
            .ok_or_else(|| Error::Size("Kronecker nonzero count overflows".into()))?;
        let mut t = Vec::with_capacity(nnz);
        for (ia, ja, va) in self.triplets() {
            for (ib, jb, vb) in other.triplets() {
                t.push((ia * other.nrows + ib, ja * other.ncols + jb, va * vb));
            }
        }
        Ok(Self::from_triplets(nrows, ncols, &t))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && self
                .triplets()
                .all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    Amd,
    /// AMD on the leading block; the last `k` indices stay last in order.
    AmdKeepLast(usize),
}

/// Pattern-only part of a Cholesky factorization, reusable across numeric
/// factorizations of matrices sharing the sparsity of the original.
#[derive(Debug, Clone)]
pub struct SymbolicCholesky {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    iperm: Vec<usize>,
    parent: Vec<usize>,
    /// Upper triangle of the permuted matrix.
    c_ptr: Vec<usize>,
    c_idx: Vec<usize>,
    /// Source position in the input value array for each entry of C.
    c_src: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl SymbolicCholesky {
    pub fn new(a: &CscMatrix, ordering: Ordering) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Size("Cholesky needs a square matrix".into()));
        }
        let n = a.ncols;
        let perm = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::Amd => amd_order(a, n)?,
            Ordering::AmdKeepLast(k) => {
                let k = k.min(n);
                let lead = n - k;
                let mut p = if lead > 0 {
                    let t: Vec<_> = a.triplets().filter(|&(i, j, _)| i < lead && j < lead).collect();
                    amd_order(&CscMatrix::from_triplets(lead, lead, &t), lead)?
                } else {
                    Vec::new()
                };
                p.extend(lead..n);
                p
            }
        };
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Upper triangle of P A P'.
        let mut counts = vec![0usize; n + 1];
        for j in 0..n {
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let (ni, nj) = (iperm[a.row_idx[p]], iperm[j]);
                if ni <= nj {
                    counts[nj + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let c_ptr = counts.clone();
        let mut next = counts;
        let nnz_c = c_ptr[n];
        let mut entries: Vec<(usize, usize)> = vec![(0, 0); nnz_c];
        for j in 0..n {
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let (ni, nj) = (iperm[a.row_idx[p]], iperm[j]);
                if ni <= nj {
                    entries[next[nj]] = (ni, p);
                    next[nj] += 1;
                }
            }
        }
        for j in 0..n {
            entries[c_ptr[j]..c_ptr[j + 1]].sort_unstable();
        }
        let c_idx: Vec<usize> = entries.iter().map(|e| e.0).collect();
        let c_src: Vec<usize> = entries.iter().map(|e| e.1).collect();

        let parent = etree(n, &c_ptr, &c_idx);

        // Row patterns of L via elimination-tree reaches.
        let mut col_count = vec![1usize; n];
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(k, &c_ptr, &c_idx, &parent, &mut mark, &mut stack);
            for &i in &stack[top..] {
                col_count[i] += 1;
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for j in 0..n {
            l_ptr[j + 1] = l_ptr[j] + col_count[j];
        }
        let mut l_idx = vec![0usize; l_ptr[n]];
        let mut fill: Vec<usize> = l_ptr[..n].to_vec();
        for k in 0..n {
            l_idx[fill[k]] = k;
            fill[k] += 1;
        }
        mark.iter_mut().for_each(|m| *m = NONE);
        for k in 0..n {
            let top = ereach(k, &c_ptr, &c_idx, &parent, &mut mark, &mut stack);
            for &i in &stack[top..] {
                l_idx[fill[i]] = k;
                fill[i] += 1;
            }
        }
        Ok(Self {
            n,
            perm,
            iperm,
            parent,
            c_ptr,
            c_idx,
            c_src,
            l_ptr,
            l_idx,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.l_idx.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn iperm(&self) -> &[usize] {
        &self.iperm
    }

    /// Position in the factor storage of entry `(i, j)` given in the
    /// original ordering, for entries inside the filled pattern.
    pub fn l_position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.iperm[i], self.iperm[j]);
        let (row, col) = if a >= b { (a, b) } else { (b, a) };
        let (lo, hi) = (self.l_ptr[col], self.l_ptr[col + 1]);
        self.l_idx[lo..hi]
            .binary_search(&row)
            .ok()
            .map(|p| lo + p)
    }

    /// Numeric factorization of a matrix with exactly the pattern (and value
    /// layout) of the matrix this symbolic analysis was built from.
    pub fn factor(self: &Arc<Self>, values: &[f64]) -> Result<CholeskyFactor> {
        let n = self.n;
        let mut lx = vec![0.0; self.l_idx.len()];
        let mut x = vec![0.0; n];
        let mut next: Vec<usize> = self.l_ptr[..n].iter().map(|p| p + 1).collect();
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(k, &self.c_ptr, &self.c_idx, &self.parent, &mut mark, &mut stack);
            for p in self.c_ptr[k]..self.c_ptr[k + 1] {
                x[self.c_idx[p]] += values[self.c_src[p]];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / lx[self.l_ptr[i]];
                x[i] = 0.0;
                for p in self.l_ptr[i] + 1..next[i] {
                    x[self.l_idx[p]] -= lx[p] * lki;
                }
                d -= lki * lki;
                lx[next[i]] = lki;
                next[i] += 1;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Factorization { pivot: self.perm[k] });
            }
            lx[self.l_ptr[k]] = d.sqrt();
        }
        Ok(CholeskyFactor {
            symbolic: Arc::clone(self),
            values: lx,
        })
    }
}

fn amd_order(a: &CscMatrix, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let (p, _, _) = amd::order::<usize>(n, &a.col_ptr, &a.row_idx, &amd::Control::default())
        .map_err(|s| Error::Conditioning(format!("AMD ordering failed: {s:?}")))?;
    Ok(p)
}

fn etree(n: usize, c_ptr: &[usize], c_idx: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &row in &c_idx[c_ptr[k]..c_ptr[k + 1]] {
            let mut i = row;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of L (excluding the diagonal), returned in
/// `stack[top..]` in topological order.
fn ereach(
    k: usize,
    c_ptr: &[usize],
    c_idx: &[usize],
    parent: &[usize],
    mark: &mut [usize],
    stack: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    mark[k] = k;
    for &row in &c_idx[c_ptr[k]..c_ptr[k + 1]] {
        let mut i = row;
        if i > k {
            continue;
        }
        let mut len = 0;
        while mark[i] != k {
            stack[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        while len > 0 {
            top -= 1;
            len -= 1;
            stack[top] = stack[len];
        }
    }
    top
}

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
}

impl CholeskyFactor {
    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    pub fn log_det(&self) -> f64 {
        let s = &*self.symbolic;
        2.0 * (0..s.n).map(|j| self.values[s.l_ptr[j]].ln()).sum::<f64>()
    }

    /// Solves `A x = b` in the original ordering.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &*self.symbolic;
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        self.forward(&mut y);
        self.backward(&mut y);
        let mut x = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// `x = P' L^{-T} z`: maps standard normal `z` to a draw with covariance
    /// `A^{-1}`.
    pub fn sample_transform(&self, z: &[f64]) -> Vec<f64> {
        let s = &*self.symbolic;
        let mut y = z.to_vec();
        self.backward(&mut y);
        let mut x = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    fn forward(&self, y: &mut [f64]) {
        let s = &*self.symbolic;
        for j in 0..s.n {
            let p0 = s.l_ptr[j];
            y[j] /= self.values[p0];
            let yj = y[j];
            for p in p0 + 1..s.l_ptr[j + 1] {
                y[s.l_idx[p]] -= self.values[p] * yj;
            }
        }
    }

    fn backward(&self, y: &mut [f64]) {
        let s = &*self.symbolic;
        for j in (0..s.n).rev() {
            let p0 = s.l_ptr[j];
            let mut acc = y[j];
            for p in p0 + 1..s.l_ptr[j + 1] {
                acc -= self.values[p] * y[s.l_idx[p]];
            }
            y[j] = acc / self.values[p0];
        }
    }

    /// Entries of `A^{-1}` on the filled pattern of L (Takahashi recursions).
    pub fn selected_inverse(&self) -> SelectedInverse {
        let s = &*self.symbolic;
        let n = s.n;
        let lx = &self.values;
        let mut sig = vec![0.0; lx.len()];
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let (p0, p1) = (s.l_ptr[i], s.l_ptr[i + 1]);
            let lii = lx[p0];
            let rows = &s.l_idx[p0 + 1..p1];
            let lvals = &lx[p0 + 1..p1];
            for &k in rows {
                z[k] = 0.0;
            }
            for (a, &j) in rows.iter().enumerate() {
                // Column j of Σ holds rows >= j; rows[a..] is a subset of it.
                let (q0, q1) = (s.l_ptr[j], s.l_ptr[j + 1]);
                let mut q = q0;
                for (b, &k) in rows.iter().enumerate().skip(a) {
                    while q < q1 && s.l_idx[q] < k {
                        q += 1;
                    }
                    debug_assert!(q < q1 && s.l_idx[q] == k, "filled pattern not closed");
                    let skj = sig[q];
                    z[j] += lvals[b] * skj;
                    if k != j {
                        z[k] += lvals[a] * skj;
                    }
                }
            }
            let mut diag_acc = 0.0;
            for (b, &k) in rows.iter().enumerate() {
                let v = -z[k] / lii;
                sig[p0 + 1 + b] = v;
                diag_acc += lvals[b] * v;
            }
            sig[p0] = 1.0 / (lii * lii) - diag_acc / lii;
        }
        SelectedInverse {
            symbolic: Arc::clone(&self.symbolic),
            values: sig,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelectedInverse {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
}

impl SelectedInverse {
    /// `(A^{-1})_{ij}` in the original ordering, if inside the filled pattern.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.symbolic.l_position(i, j).map(|p| self.values[p])
    }

    pub fn diag(&self) -> Vec<f64> {
        let s = &*self.symbolic;
        let mut d = vec![0.0; s.n];
        for (new, &old) in s.perm.iter().enumerate() {
            d[old] = self.values[s.l_ptr[new]];
        }
        d
    }

    /// `trace(A^{-1} B)` for symmetric `B` whose pattern lies inside the
    /// filled pattern of the factor.
    pub fn trace_product(&self, b: &CscMatrix) -> Result<f64> {
        let mut acc = 0.0;
        for (i, j, v) in b.triplets() {
            let s = self.get(i, j).ok_or_else(|| {
                Error::Conditioning(format!("entry ({i}, {j}) outside factor pattern"))
            })?;
            acc += v * s;
        }
        Ok(acc)
    }

    /// Variance of `w' x` for sparse weights `w` with pairwise entries in the
    /// filled pattern.
    pub fn quad_form(&self, w: &[(usize, f64)]) -> Result<f64> {
        let mut acc = 0.0;
        for &(i, wi) in w {
            for &(j, wj) in w {
                let s = self.get(i, j).ok_or_else(|| {
                    Error::Conditioning(format!("entry ({i}, {j}) outside factor pattern"))
                })?;
                acc += wi * wj * s;
            }
        }
        Ok(acc)
    }

    /// Raw values aligned with the factor storage.
    pub fn raw(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
                .unwrap();
            m.swap(c, piv);
            let d = m[c][c];
            m[c].iter_mut().for_each(|v| *v /= d);
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    if f != 0.0 {
                        for k in 0..2 * n {
                            m[r][k] -= f * m[c][k];
                        }
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    fn random_spd(n: usize, density: f64, seed: u64) -> CscMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..i {
                if rng.random::<f64>() < density {
                    let v = rng.random::<f64>() - 0.5;
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        let mut row_abs = vec![0.0; n];
        for &(i, _, v) in &t {
            row_abs[i] += f64::abs(v);
        }
        for (i, r) in row_abs.iter().enumerate() {
            t.push((i, i, r + 0.5 + rng.random::<f64>()));
        }
        CscMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn solve_logdet_and_selected_inverse_match_dense() {
        for (seed, ord) in [(1, Ordering::Amd), (2, Ordering::Natural), (3, Ordering::AmdKeepLast(2))] {
            let a = random_spd(30, 0.12, seed);
            let sym = Arc::new(SymbolicCholesky::new(&a, ord).unwrap());
            let f = sym.factor(a.values()).unwrap();
            let dense = a.to_dense();
            let inv = dense_inverse(&dense);

            let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
            let x = f.solve(&b);
            let ax = a.mul_vec(&x);
            for (u, v) in ax.iter().zip(&b) {
                assert!((u - v).abs() < 1e-10);
            }

            let sel = f.selected_inverse();
            for (i, j, _) in a.triplets() {
                assert!((sel.get(i, j).unwrap() - inv[i][j]).abs() < 1e-10);
            }
            for (i, d) in sel.diag().iter().enumerate() {
                assert!((d - inv[i][i]).abs() < 1e-10);
            }

            // log det via product of LU pivots of the dense copy.
            let logdet_dense = {
                let mut m = dense.clone();
                let mut acc = 0.0;
                for c in 0..30 {
                    let d = m[c][c];
                    acc += d.ln();
                    for r in c + 1..30 {
                        let f = m[r][c] / d;
                        for k in c..30 {
                            m[r][k] -= f * m[c][k];
                        }
                    }
                }
                acc
            };
            assert!((f.log_det() - logdet_dense).abs() < 1e-9);
        }
    }

    #[test]
    fn keep_last_really_keeps_last() {
        let a = random_spd(12, 0.3, 9);
        let sym = SymbolicCholesky::new(&a, Ordering::AmdKeepLast(1)).unwrap();
        assert_eq!(*sym.perm().last().unwrap(), 11);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CscMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let sym = Arc::new(SymbolicCholesky::new(&a, Ordering::Natural).unwrap());
        assert!(matches!(sym.factor(a.values()), Err(Error::Factorization { .. })));
    }

    #[test]
    fn kron_and_matmul() {
        let a = CscMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = CscMatrix::from_dense(&[vec![0.0, 5.0], vec![6.0, 7.0]]);
        let k = a.kron(&b).unwrap().to_dense();
        assert_eq!(k[0], vec![0.0, 5.0, 0.0, 10.0]);
        assert_eq!(k[3], vec![0.0, 0.0, 18.0, 21.0]);
        let p = a.matmul(&b).to_dense();
        assert_eq!(p, vec![vec![12.0, 19.0], vec![18.0, 21.0]]);
    }
}

//! Symmetric sparse operator stored as the CSR lower triangle.

use super::{BlockVector, LinalgError};
use crate::par;

/// Real symmetric `n x n` sparse matrix.
///
/// The lower triangle (diagonal included) is the canonical storage; a full
/// CSR pattern is expanded once at construction so `apply` is a row-parallel
/// gather with no write conflicts.
#[derive(Clone, Debug)]
pub struct SparseSymOperator {
    n: usize,
    lower_ptr: Vec<usize>,
    lower_idx: Vec<usize>,
    lower_val: Vec<f64>,
    full_ptr: Vec<usize>,
    full_idx: Vec<usize>,
    full_val: Vec<f64>,
}

impl SparseSymOperator {
    /// Builds from `(row, col, value)` triplets. Entries may come from either
    /// triangle; `(i, j)` and `(j, i)` are merged and duplicates summed, so pass
    /// each off-diagonal entry once.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        let mut lower: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(LinalgError::Shape(format!("entry ({i},{j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(LinalgError::Shape(format!("non-finite entry at ({i},{j})")));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            lower.push((r, c, v));
        }
        lower.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(lower.len());
        for t in lower {
            match merged.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.2 != 0.0);

        let mut lower_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &merged {
            lower_ptr[r + 1] += 1;
        }
        for i in 0..n {
            lower_ptr[i + 1] += lower_ptr[i];
        }
        let lower_idx: Vec<usize> = merged.iter().map(|t| t.1).collect();
        let lower_val: Vec<f64> = merged.iter().map(|t| t.2).collect();

        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in &merged {
            counts[r + 1] += 1;
            if r != c {
                counts[c + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let full_ptr = counts.clone();
        let mut fill = counts;
        let nnz_full = full_ptr[n];
        let mut full_idx = vec![0usize; nnz_full];
        let mut full_val = vec![0.0; nnz_full];
        for &(r, c, v) in &merged {
            full_idx[fill[r]] = c;
            full_val[fill[r]] = v;
            fill[r] += 1;
            if r != c {
                full_idx[fill[c]] = r;
                full_val[fill[c]] = v;
                fill[c] += 1;
            }
        }
        for i in 0..n {
            let (a, b) = (full_ptr[i], full_ptr[i + 1]);
            let mut row: Vec<(usize, f64)> = full_idx[a..b].iter().copied().zip(full_val[a..b].iter().copied()).collect();
            row.sort_by_key(|e| e.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                full_idx[a + k] = c;
                full_val[a + k] = v;
            }
        }
        Ok(Self {
            n,
            lower_ptr,
            lower_idx,
            lower_val,
            full_ptr,
            full_idx,
            full_val,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries of the lower triangle.
    pub fn nnz_lower(&self) -> usize {
        self.lower_idx.len()
    }

    /// Lower-triangle entries `(row, col, value)` in row-major order, `col <= row`.
    pub fn lower_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.lower_ptr[i]..self.lower_ptr[i + 1]).map(move |k| (i, self.lower_idx[k], self.lower_val[k]))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (a, b) = (self.lower_ptr[i], self.lower_ptr[i + 1]);
                (a..b).find(|&k| self.lower_idx[k] == i).map_or(0.0, |k| self.lower_val[k])
            })
            .collect()
    }

    /// Half-bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.lower_triplets().map(|(i, j, _)| i - j).max().unwrap_or(0)
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|i| self.full_val[self.full_ptr[i]..self.full_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let (a, b) = (self.lower_ptr[r], self.lower_ptr[r + 1]);
        self.lower_idx[a..b]
            .binary_search(&c)
            .map_or(0.0, |k| self.lower_val[a + k])
    }

    /// Full-pattern row `i` as `(col, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.full_ptr[i], self.full_ptr[i + 1]);
        self.full_idx[a..b].iter().copied().zip(self.full_val[a..b].iter().copied())
    }

    /// `y = A x` for a single vector.
    pub fn apply_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        par::for_each_row(y, |i, yi| {
            let (a, b) = (self.full_ptr[i], self.full_ptr[i + 1]);
            let mut acc = 0.0;
            for k in a..b {
                acc += self.full_val[k] * x[self.full_idx[k]];
            }
            *yi = acc;
        });
    }

    /// `Y = A X` column by column.
    pub fn apply(&self, x: &BlockVector) -> BlockVector {
        assert_eq!(x.n(), self.n);
        let mut y = BlockVector::zeros(self.n, x.p());
        for j in 0..x.p() {
            let xj = x.col(j).to_vec();
            self.apply_vec(&xj, y.col_mut(j));
        }
        y
    }

    /// Symmetry probe: `(A e_j)_i == (A e_i)_j` on the given index pairs.
    pub fn symmetry_probe(&self, pairs: &[(usize, usize)]) -> bool {
        pairs.iter().all(|&(i, j)| {
            let aij = self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1);
            let aji = self.row(j).find(|e| e.0 == i).map_or(0.0, |e| e.1);
            aij == aji
        })
    }
}

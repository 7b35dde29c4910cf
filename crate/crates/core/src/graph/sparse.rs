//! Compressed sparse row matrices, just enough for graph filtering.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets. Duplicates are summed; columns
    /// within each row end up sorted.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, v) in self.iter() {
            out[[i, j]] += v;
        }
        out
    }

    /// Sparse-dense product `self · rhs`, parallel over output rows. Each
    /// row is accumulated in column order, so the result does not depend on
    /// the thread count.
    pub fn matmul(&self, rhs: &ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, rhs.nrows(), "sparse matmul inner dimension");
        let width = rhs.ncols();
        let mut out = Array2::zeros((self.n_rows, width));
        if width == 0 {
            return out;
        }
        let buf = out.as_slice_mut().expect("fresh array is contiguous");
        buf.par_chunks_mut(width).enumerate().for_each(|(i, out_row)| {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, r) in out_row.iter_mut().zip(rhs.row(j)) {
                    *o += v * r;
                }
            }
        });
        out
    }

    /// Principal submatrix on `nodes` (rows and columns in the given order).
    pub fn submatrix(&self, nodes: &[usize]) -> CsrMatrix {
        let mut position = vec![usize::MAX; self.n_cols];
        for (p, &v) in nodes.iter().enumerate() {
            position[v] = p;
        }
        let mut triplets = Vec::new();
        for (p, &i) in nodes.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if position[j] != usize::MAX {
                    triplets.push((p, position[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(nodes.len(), nodes.len(), &triplets)
    }
}

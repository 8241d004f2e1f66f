//! Compressed sparse row storage for the assembled operators.

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Result, WgError};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the pattern from the union of per-row column sets; values start at zero.
    pub fn from_pattern(nrows: usize, ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Sums duplicate entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, _) in triplets {
            rows[r].push(c);
        }
        let mut m = Self::from_pattern(nrows, ncols, rows);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
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

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).ok().map(|p| a + p)
    }

    /// Adds `v` at `(r, c)`; panics if `(r, c)` is outside the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let p = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside sparsity pattern"));
        self.values[p] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.values[p])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                x[r] * cols.iter().zip(vals).map(|(&c, v)| v * y[c]).sum::<f64>()
            })
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Sub-block `rows x cols` given as half-open index ranges.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> CsrMatrix {
        let mut trip = Vec::new();
        for r in rows.clone() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if cols.contains(&c) {
                    trip.push((r - rows.start, c - cols.start, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &trip)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                d[(r, c)] = v;
            }
        }
        d
    }

    /// Lower triangle in faer's column-major form (for a symmetric matrix the
    /// CSR rows are the CSC columns of the upper triangle).
    pub(crate) fn to_faer_lower(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.nnz() / 2 + self.nrows);
        for r in 0..self.nrows {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if r >= c {
                    trip.push(Triplet::new(r, c, v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| WgError::NotPositiveDefinite(format!("sparse conversion failed: {e:?}")))
    }
}

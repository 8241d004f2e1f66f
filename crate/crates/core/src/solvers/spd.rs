//! Sparse SPD solves.
//!
//! [`SparseCholesky`] wraps faer's supernodal sparse `LL^T` with fill-reducing
//! ordering. [`StiffnessFactor`] factors the full weak Galerkin stiffness by
//! eliminating the cell blocks (block diagonal in `A00`) element by element
//! and factoring the sparse edge Schur complement.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::Side;
use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::assembly::DofMap;
use crate::error::{Result, WgError};
use crate::sparse::CsrMatrix;

pub struct SparseCholesky {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(WgError::DimensionMismatch {
                expected: n,
                actual: a.ncols(),
            });
        }
        if n == 0 {
            return Ok(Self { n, llt: None });
        }
        let lower = a.to_faer_lower()?;
        let llt = lower
            .sp_cholesky(Side::Lower)
            .map_err(|e| WgError::NotPositiveDefinite(format!("{e}")))?;
        Ok(Self { n, llt: Some(llt) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        if let Some(llt) = &self.llt {
            let view = faer::MatMut::from_column_major_slice_mut(rhs, self.n, 1);
            llt.solve_in_place(view);
        }
    }

    /// Solves for every column of `rhs` (column-major `n x ncols`).
    pub fn solve_columns(&self, rhs: &mut [f64], ncols: usize) {
        if let Some(llt) = &self.llt {
            let view = faer::MatMut::from_column_major_slice_mut(rhs, self.n, ncols);
            llt.solve_in_place(view);
        }
    }
}

/// Solves `A x = b` for sparse SPD `A` by direct factorization.
pub fn solve_spd(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != a.nrows() {
        return Err(WgError::DimensionMismatch {
            expected: a.nrows(),
            actual: rhs.len(),
        });
    }
    let chol = SparseCholesky::new(a)?;
    let mut x = rhs.to_vec();
    chol.solve_in_place(&mut x);
    Ok(x)
}

struct CellBlock {
    chol: Cholesky<f64, Dyn>,
    /// `A_{0b}` restricted to this cell's interior-edge dofs.
    coupling: DMatrix<f64>,
    edge_dofs: Vec<usize>,
}

/// Factorization of the full stiffness matrix through cell elimination.
pub struct StiffnessFactor {
    n0: usize,
    nb: usize,
    per_cell: usize,
    cells: Vec<CellBlock>,
    edges: SparseCholesky,
}

impl StiffnessFactor {
    pub fn new(a: &CsrMatrix, dofmap: &DofMap) -> Result<Self> {
        let (n0, nb) = (dofmap.n0(), dofmap.nb());
        if a.nrows() != n0 + nb {
            return Err(WgError::DimensionMismatch {
                expected: n0 + nb,
                actual: a.nrows(),
            });
        }
        let per_cell = dofmap.dofs_per_cell();
        let mut cells = Vec::with_capacity(dofmap.num_cells());
        let mut trip = Vec::new();
        for r in n0..n0 + nb {
            let (cs, vs) = a.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if c >= n0 {
                    trip.push((r - n0, c - n0, v));
                }
            }
        }
        for c in 0..dofmap.num_cells() {
            let start = dofmap.cell_offset(c);
            let edge_dofs: Vec<usize> = dofmap.local_dofs(c)[per_cell..]
                .iter()
                .flatten()
                .copied()
                .collect();
            let block = DMatrix::from_fn(per_cell, per_cell, |i, j| a.get(start + i, start + j));
            let coupling = DMatrix::from_fn(per_cell, edge_dofs.len(), |i, j| {
                a.get(start + i, edge_dofs[j])
            });
            let chol = block.cholesky().ok_or_else(|| {
                WgError::NotPositiveDefinite(format!("cell block {c} of the stiffness matrix"))
            })?;
            let correction = coupling.transpose() * chol.solve(&coupling);
            for (i, &gi) in edge_dofs.iter().enumerate() {
                for (j, &gj) in edge_dofs.iter().enumerate() {
                    trip.push((gi - n0, gj - n0, -correction[(i, j)]));
                }
            }
            cells.push(CellBlock {
                chol,
                coupling,
                edge_dofs,
            });
        }
        let schur = CsrMatrix::from_triplets(nb, nb, &trip);
        let edges = SparseCholesky::new(&schur)?;
        Ok(Self {
            n0,
            nb,
            per_cell,
            cells,
            edges,
        })
    }

    pub fn dim(&self) -> usize {
        self.n0 + self.nb
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_columns(&mut x, 1);
        x
    }

    /// Solves `A X = R` in place for a column-major `dim x ncols` block.
    pub fn solve_columns(&self, data: &mut [f64], ncols: usize) {
        let n = self.dim();
        assert_eq!(data.len(), n * ncols);
        let (n0, nb, pc) = (self.n0, self.nb, self.per_cell);
        let gather = |data: &[f64], c: usize| {
            DMatrix::from_fn(pc, ncols, |i, col| data[col * n + c * pc + i])
        };
        // forward: y0 = A00^{-1} r0, rb -= Ab0 y0
        let mut edge_rhs = vec![0.0; nb * ncols];
        for col in 0..ncols {
            edge_rhs[col * nb..(col + 1) * nb].copy_from_slice(&data[col * n + n0..(col + 1) * n]);
        }
        for (c, cell) in self.cells.iter().enumerate() {
            let y0 = cell.chol.solve(&gather(data, c));
            let contrib = cell.coupling.tr_mul(&y0);
            for col in 0..ncols {
                let eb = &mut edge_rhs[col * nb..(col + 1) * nb];
                for (j, &g) in cell.edge_dofs.iter().enumerate() {
                    eb[g - n0] -= contrib[(j, col)];
                }
            }
        }
        self.edges.solve_columns(&mut edge_rhs, ncols);
        // backward: x0 = A00^{-1} (r0 - A0b xb)
        for (c, cell) in self.cells.iter().enumerate() {
            let xb = DMatrix::from_fn(cell.edge_dofs.len(), ncols, |j, col| {
                edge_rhs[col * nb + cell.edge_dofs[j] - n0]
            });
            let r0 = gather(data, c) - &cell.coupling * xb;
            let x0 = cell.chol.solve(&r0);
            for col in 0..ncols {
                data[col * n + c * pc..col * n + (c + 1) * pc]
                    .copy_from_slice(x0.column(col).as_slice());
            }
        }
        for col in 0..ncols {
            data[col * n + n0..(col + 1) * n].copy_from_slice(&edge_rhs[col * nb..(col + 1) * nb]);
        }
    }
}

//! Global degrees of freedom and assembly of the stiffness `A` (from `a_w`)
//! and mass `M` (from `b_w`).
//!
//! Dofs are numbered cell blocks first (`dim P_k` per cell), then interior
//! edge blocks (`k` per interior edge). Boundary edges carry no dofs, which
//! imposes `v_b = 0` on the boundary.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::basis::poly_dim;
use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use crate::solvers::spd::SparseCholesky;
use crate::sparse::CsrMatrix;
use crate::wg::{check_eps, CellGeometry, LocalElement, LocalRules};

#[derive(Clone, Debug)]
pub struct DofMap {
    k: usize,
    num_cells: usize,
    num_interior_edges: usize,
    /// First dof of each local edge's block, `None` on the boundary.
    cell_edge_offsets: Vec<[Option<usize>; 3]>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "polynomial degree must be at least 1"));
        }
        let n0 = mesh.num_cells() * poly_dim(k);
        let cell_edge_offsets = (0..mesh.num_cells())
            .map(|c| {
                mesh.cell_edges(c)
                    .map(|e| mesh.interior_index(e).map(|ie| n0 + ie * k))
            })
            .collect();
        Ok(Self {
            k,
            num_cells: mesh.num_cells(),
            num_interior_edges: mesh.num_interior_edges(),
            cell_edge_offsets,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dofs_per_cell(&self) -> usize {
        poly_dim(self.k)
    }

    /// Number of cell-interior dofs.
    pub fn n0(&self) -> usize {
        self.num_cells * self.dofs_per_cell()
    }

    /// Number of interior-edge dofs.
    pub fn nb(&self) -> usize {
        self.num_interior_edges * self.k
    }

    pub fn total(&self) -> usize {
        self.n0() + self.nb()
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn cell_offset(&self, cell: usize) -> usize {
        cell * self.dofs_per_cell()
    }

    pub fn edge_offset(&self, interior_edge: usize) -> usize {
        self.n0() + interior_edge * self.k
    }

    /// Global dof of each stacked local coefficient, `None` for boundary edges.
    pub fn local_dofs(&self, cell: usize) -> Vec<Option<usize>> {
        let n0 = self.dofs_per_cell();
        let start = self.cell_offset(cell);
        let mut out: Vec<Option<usize>> = (start..start + n0).map(Some).collect();
        for off in self.cell_edge_offsets[cell] {
            out.extend((0..self.k).map(|m| off.map(|o| o + m)));
        }
        out
    }
}

pub fn build_dof_map(mesh: &Mesh, k: usize) -> Result<DofMap> {
    DofMap::new(mesh, k)
}

/// The assembled pencil `(A, M)` for one mesh, degree and `eps`.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub dofmap: DofMap,
    pub eps: f64,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

const CHUNK: usize = 2048;

impl GlobalSystem {
    pub fn assemble(mesh: &Mesh, k: usize, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let dofmap = DofMap::new(mesh, k)?;
        let rules = LocalRules::new(k)?;
        let n = dofmap.total();
        let mut stiffness = CsrMatrix::from_pattern(n, n, stiffness_pattern(&dofmap));
        let n0 = dofmap.dofs_per_cell();
        let mass_rows = (0..n)
            .map(|r| {
                if r < dofmap.n0() {
                    let start = r / n0 * n0;
                    (start..start + n0).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let mut mass = CsrMatrix::from_pattern(n, n, mass_rows);

        for chunk_start in (0..mesh.num_cells()).step_by(CHUNK) {
            let chunk_end = (chunk_start + CHUNK).min(mesh.num_cells());
            let locals: Vec<LocalElement> = (chunk_start..chunk_end)
                .into_par_iter()
                .map(|c| LocalElement::new(&CellGeometry::from_mesh(mesh, c), &rules, eps))
                .collect::<Result<_>>()?;
            for (c, local) in (chunk_start..chunk_end).zip(&locals) {
                let dofs = dofmap.local_dofs(c);
                scatter(&mut stiffness, &local.stiffness, &dofs);
                let start = dofmap.cell_offset(c);
                for i in 0..n0 {
                    for j in 0..n0 {
                        mass.add(start + i, start + j, local.mass[(i, j)]);
                    }
                }
            }
        }
        Ok(Self {
            dofmap,
            eps,
            stiffness,
            mass,
        })
    }

    pub fn n0(&self) -> usize {
        self.dofmap.n0()
    }

    pub fn nb(&self) -> usize {
        self.dofmap.nb()
    }

    pub fn k(&self) -> usize {
        self.dofmap.k()
    }

    /// `M` restricted to the cell block.
    pub fn mass_cells(&self) -> CsrMatrix {
        self.mass.block(0..self.n0(), 0..self.n0())
    }
}

fn stiffness_pattern(dofmap: &DofMap) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); dofmap.total()];
    for c in 0..dofmap.num_cells() {
        let dofs: Vec<usize> = dofmap.local_dofs(c).into_iter().flatten().collect();
        for &r in &dofs {
            rows[r].extend_from_slice(&dofs);
        }
    }
    rows
}

fn scatter(target: &mut CsrMatrix, local: &DMatrix<f64>, dofs: &[Option<usize>]) {
    for (i, gi) in dofs.iter().enumerate() {
        let Some(gi) = *gi else { continue };
        for (j, gj) in dofs.iter().enumerate() {
            if let Some(gj) = *gj {
                target.add(gi, gj, local[(i, j)]);
            }
        }
    }
}

pub fn assemble_stiffness(mesh: &Mesh, k: usize, eps: f64) -> Result<CsrMatrix> {
    Ok(GlobalSystem::assemble(mesh, k, eps)?.stiffness)
}

pub fn assemble_mass(mesh: &Mesh, k: usize) -> Result<CsrMatrix> {
    Ok(GlobalSystem::assemble(mesh, k, 0.0)?.mass)
}

/// Static condensation of the edge unknowns:
/// `S = A00 - A0b Abb^{-1} Ab0`, applied through a sparse factorization of
/// `Abb` and never formed.
pub struct Condensation {
    n0: usize,
    a00: CsrMatrix,
    a0b: CsrMatrix,
    ab0: CsrMatrix,
    abb: SparseCholesky,
}

impl Condensation {
    pub fn new(a: &CsrMatrix, dofmap: &DofMap) -> Result<Self> {
        let (n0, n) = (dofmap.n0(), dofmap.total());
        if a.nrows() != n {
            return Err(crate::error::WgError::DimensionMismatch {
                expected: n,
                actual: a.nrows(),
            });
        }
        Ok(Self {
            n0,
            a00: a.block(0..n0, 0..n0),
            a0b: a.block(0..n0, n0..n),
            ab0: a.block(n0..n, 0..n0),
            abb: SparseCholesky::new(&a.block(n0..n, n0..n))?,
        })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// `x_b = -Abb^{-1} Ab0 x0`, the energy-minimizing edge values.
    pub fn recover_edges(&self, x0: &[f64]) -> Vec<f64> {
        let mut xb = self.ab0.matvec(x0);
        self.abb.solve_in_place(&mut xb);
        xb.iter_mut().for_each(|v| *v = -*v);
        xb
    }

    /// `S x0`.
    pub fn apply_schur(&self, x0: &[f64]) -> Vec<f64> {
        let xb = self.recover_edges(x0);
        let mut y = self.a00.matvec(x0);
        for (yi, ci) in y.iter_mut().zip(self.a0b.matvec(&xb)) {
            *yi += ci;
        }
        y
    }
}

pub fn condense(a: &CsrMatrix, dofmap: &DofMap) -> Result<Condensation> {
    Condensation::new(a, dofmap)
}

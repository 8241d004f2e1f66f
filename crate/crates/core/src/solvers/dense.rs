//! Dense reference solve of the condensed pencil, for validation on small meshes.

use nalgebra::DMatrix;

use crate::assembly::GlobalSystem;
use crate::error::{Result, WgError};
use crate::mesh::Mesh;

/// Largest total dof count the dense oracle accepts.
pub const DENSE_LIMIT: usize = 2000;

/// Explicit `S = A00 - A0b Abb^{-1} Ab0` and `M00` as dense matrices.
pub fn dense_condensed_pencil(system: &GlobalSystem) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = system.dofmap.total();
    if n > DENSE_LIMIT {
        return Err(WgError::TooLarge {
            dofs: n,
            limit: DENSE_LIMIT,
        });
    }
    let n0 = system.n0();
    let nb = n - n0;
    let a = system.stiffness.to_dense();
    let a00 = a.view((0, 0), (n0, n0)).into_owned();
    let a0b = a.view((0, n0), (n0, nb)).into_owned();
    let abb = a.view((n0, n0), (nb, nb)).into_owned();
    let schur = if nb == 0 {
        a00
    } else {
        let chol = abb
            .cholesky()
            .ok_or_else(|| WgError::NotPositiveDefinite("dense edge block".into()))?;
        a00 - &a0b * chol.solve(&a0b.transpose())
    };
    let m00 = system.mass.to_dense().view((0, 0), (n0, n0)).into_owned();
    Ok((schur, m00))
}

/// All `n0` finite eigenvalues of `(A, M)`, ascending.
pub fn dense_pencil_eigenvalues(system: &GlobalSystem) -> Result<Vec<f64>> {
    let (s, m) = dense_condensed_pencil(system)?;
    let l = m
        .cholesky()
        .ok_or_else(|| WgError::NotPositiveDefinite("dense mass block".into()))?
        .l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| WgError::NotPositiveDefinite("dense mass factor".into()))?;
    let c = &linv * s * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut vals: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn dense_eigen_oracle(mesh: &Mesh, k: usize, eps: f64) -> Result<Vec<f64>> {
    let system = GlobalSystem::assemble(mesh, k, eps)?;
    dense_pencil_eigenvalues(&system)
}

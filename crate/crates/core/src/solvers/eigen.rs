//! Smallest eigenpairs of the weak Galerkin pencil `a_w(u, v) = λ b_w(u, v)`.
//!
//! `M` vanishes on the edge block, so the finite spectrum of `(A, M)` is the
//! spectrum of the condensed pencil `(S, M00)` with
//! `S = A00 - A0b Abb^{-1} Ab0`. Since `S^{-1} = (A^{-1})_{00}`, one
//! factorization of `A` drives block inverse subspace iteration on the
//! condensed pencil; the solve also returns the matching edge block, so the
//! iterates are always full vectors with recovered edge components.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::error::{invalid, Result, WgError};
use crate::mesh::Mesh;
use crate::solvers::spd::StiffnessFactor;
use crate::sparse::CsrMatrix;
use crate::wg::WeakFunction;

#[derive(Clone, Debug)]
pub struct EigenOptions {
    /// Block size is `nev + block_extra`, capped at `n0`.
    pub block_extra: usize,
    /// Relative change of each wanted Ritz value between sweeps.
    pub eig_tol: f64,
    /// `||A x - λ M x|| / ||A x||` for each wanted pair.
    pub residual_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            block_extra: 5,
            eig_tol: 1e-11,
            residual_tol: 1e-9,
            max_iter: 500,
            seed: 0x5eed,
        }
    }
}

/// Converged eigenpairs, ascending, each vector with `b_w(u, u) = 1`.
#[derive(Clone, Debug)]
pub struct EigenPairSet {
    pub values: Vec<f64>,
    pub vectors: Vec<WeakFunction>,
    pub residuals: Vec<f64>,
    pub normalized: bool,
    pub iterations: usize,
}

impl EigenPairSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn spmm(a: &CsrMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, x.ncols());
    out.as_mut_slice()
        .par_chunks_mut(n)
        .zip(x.as_slice().par_chunks(x.nrows()))
        .for_each(|(o, xc)| a.matvec_into(xc, o));
    out
}

/// Ritz values and `M`-orthonormal coefficient vectors of the projected pencil.
fn rayleigh_ritz(ks: &DMatrix<f64>, ms: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let sym = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    let chol = sym(ms)
        .cholesky()
        .ok_or_else(|| WgError::NotPositiveDefinite("projected mass matrix".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| WgError::NotPositiveDefinite("projected mass factor".into()))?;
    let reduced = sym(&(&linv * sym(ks) * linv.transpose()));
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((values, linv.transpose() * vecs))
}

/// Solves for the `nev` smallest eigenpairs on an assembled system.
pub fn solve_eigen_system(
    mesh: &Mesh,
    system: &GlobalSystem,
    nev: usize,
    opts: &EigenOptions,
) -> Result<EigenPairSet> {
    let n0 = system.n0();
    let n = system.dofmap.total();
    if nev == 0 {
        return Err(invalid("nev", "must be at least 1"));
    }
    if nev > n0 {
        return Err(invalid(
            "nev",
            format!("{nev} exceeds the {n0} interior dofs"),
        ));
    }
    let p = (nev + opts.block_extra).min(n0);
    let factor = StiffnessFactor::new(&system.stiffness, &system.dofmap)?;
    let m = &system.mass;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, p, |r, _| {
        if r < n0 {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    let mut prev: Option<Vec<f64>> = None;
    let mut max_res = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        // Y = A^{-1} M X; its cell block is S^{-1} M00 X0, and A Y = M X.
        let mut ay = spmm(m, &x);
        let mut y = ay.clone();
        factor.solve_columns(y.as_mut_slice(), p);
        let mut my = spmm(m, &y);
        for j in 0..p {
            let nrm = y.column(j).dot(&my.column(j)).sqrt();
            y.column_mut(j).unscale_mut(nrm);
            my.column_mut(j).unscale_mut(nrm);
            ay.column_mut(j).unscale_mut(nrm);
        }
        let ks = y.tr_mul(&ay);
        let ms = y.tr_mul(&my);
        let (theta, coeffs) = rayleigh_ritz(&ks, &ms)?;
        x = &y * &coeffs;
        let wanted = coeffs.columns(0, nev);
        let ax = &ay * wanted;
        let mx = &my * wanted;

        let residuals: Vec<f64> = (0..nev)
            .map(|j| {
                let r = ax.column(j) - mx.column(j) * theta[j];
                r.norm() / ax.column(j).norm()
            })
            .collect();
        max_res = residuals.iter().copied().fold(0.0, f64::max);
        let settled = prev.as_ref().is_some_and(|old| {
            (0..nev).all(|j| (theta[j] - old[j]).abs() <= opts.eig_tol * theta[j].abs())
        });
        if settled && max_res <= opts.residual_tol {
            return finish(mesh, system, &x, &theta[..nev], iter);
        }
        prev = Some(theta);
    }
    Err(WgError::NoConvergence {
        iterations: opts.max_iter,
        max_residual: max_res,
    })
}

fn finish(
    mesh: &Mesh,
    system: &GlobalSystem,
    x: &DMatrix<f64>,
    theta: &[f64],
    iterations: usize,
) -> Result<EigenPairSet> {
    let n0 = system.n0();
    let mut vectors = Vec::with_capacity(theta.len());
    let mut residuals = Vec::with_capacity(theta.len());
    for (j, &lam) in theta.iter().enumerate() {
        let mut v: DVector<f64> = x.column(j).into_owned();
        let mv = system.mass.matvec(v.as_slice());
        let norm = v
            .as_slice()
            .iter()
            .zip(&mv)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .sqrt();
        v /= norm;
        let lead =
            v.rows(0, n0)
                .iter()
                .copied()
                .fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
        if lead < 0.0 {
            v.neg_mut();
        }
        let av = system.stiffness.matvec(v.as_slice());
        let mv = system.mass.matvec(v.as_slice());
        let rnorm = av
            .iter()
            .zip(&mv)
            .map(|(a, b)| (a - lam * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let anorm = av.iter().map(|a| a * a).sum::<f64>().sqrt();
        residuals.push(rnorm / anorm);
        vectors.push(WeakFunction::from_global(mesh, system.k(), v.as_slice())?);
    }
    Ok(EigenPairSet {
        values: theta.to_vec(),
        vectors,
        residuals,
        normalized: true,
        iterations,
    })
}

/// Assembles and solves for the `nev` smallest eigenpairs.
pub fn solve_eigen(mesh: &Mesh, k: usize, eps: f64, nev: usize) -> Result<EigenPairSet> {
    let system = GlobalSystem::assemble(mesh, k, eps)?;
    solve_eigen_system(mesh, &system, nev, &EigenOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use crate::solvers::dense::dense_eigen_oracle;

    #[test]
    fn matches_dense_oracle_small() {
        let m = Mesh::uniform(Domain::UnitSquare, 2).unwrap();
        let dense = dense_eigen_oracle(&m, 1, 0.0).unwrap();
        let sys = GlobalSystem::assemble(&m, 1, 0.0).unwrap();
        let pairs = solve_eigen_system(&m, &sys, sys.n0(), &EigenOptions::default()).unwrap();
        for (a, b) in pairs.values.iter().zip(&dense) {
            assert!(((a - b) / b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn normalization_and_orthogonality() {
        let m = Mesh::uniform(Domain::UnitSquare, 8).unwrap();
        let sys = GlobalSystem::assemble(&m, 2, 0.05).unwrap();
        let pairs = solve_eigen_system(&m, &sys, 6, &EigenOptions::default()).unwrap();
        assert!(pairs.values.windows(2).all(|w| w[0] <= w[1]));
        let vs: Vec<Vec<f64>> = pairs.vectors.iter().map(|v| v.to_global()).collect();
        for i in 0..6 {
            assert!((sys.mass.bilinear(&vs[i], &vs[i]) - 1.0).abs() < 1e-10);
            assert!(pairs.residuals[i] <= 1e-9);
            for j in 0..i {
                assert!(sys.mass.bilinear(&vs[i], &vs[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_nev() {
        let m = Mesh::uniform(Domain::UnitSquare, 1).unwrap();
        assert!(solve_eigen(&m, 1, 0.0, 0).is_err());
        assert!(solve_eigen(&m, 1, 0.0, 7).is_err());
        let all = solve_eigen(&m, 1, 0.0, 6).unwrap();
        assert_eq!(all.len(), 6);
        assert!(all.values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn deterministic() {
        let m = Mesh::uniform(Domain::LShape, 4).unwrap();
        let a = solve_eigen(&m, 1, 0.1, 4).unwrap();
        let b = solve_eigen(&m, 1, 0.1, 4).unwrap();
        assert_eq!(a.values, b.values);
    }
}

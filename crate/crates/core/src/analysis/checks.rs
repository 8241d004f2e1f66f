//! Structural and identity checks shared by the verify mode and the tests.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::basis::exponents;
use crate::error::Result;
use crate::mesh::{Mesh, Point};
use crate::solvers::dense::DENSE_LIMIT;
use crate::solvers::{EigenPairSet, SparseCholesky};
use crate::wg::{local_weak_gradient, project_qbar, project_qh_local, CellGeometry, LocalRules};

/// A bivariate polynomial in monomial form.
#[derive(Clone, Debug)]
pub struct Polynomial {
    terms: Vec<((usize, usize), f64)>,
}

impl Polynomial {
    /// Uniform coefficients in `[-1, 1]` for every monomial of total degree `<= degree`.
    pub fn random(degree: usize, rng: &mut impl Rng) -> Self {
        Self {
            terms: exponents(degree)
                .into_iter()
                .map(|e| (e, rng.random_range(-1.0..1.0)))
                .collect(),
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| c * p[0].powi(a as i32) * p[1].powi(b as i32))
            .sum()
    }

    pub fn grad(&self, p: Point) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &((a, b), c) in &self.terms {
            if a > 0 {
                g[0] += c * a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32);
            }
            if b > 0 {
                g[1] += c * b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1);
            }
        }
        g
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|&((a, b), _)| a + b)
            .max()
            .unwrap_or(0)
    }
}

/// `max_T |∇_w(Q_h φ) - Q̄_h(∇φ)| / max(|Q̄_h(∇φ)|, 1)` over all cells,
/// compared coefficientwise.
pub fn commutativity_defect(mesh: &Mesh, k: usize, phi: &Polynomial) -> Result<f64> {
    let rules = LocalRules::new(k)?;
    let quad = 2 * (k + phi.degree()) + 2;
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let geom = CellGeometry::from_mesh(mesh, c);
            let g = local_weak_gradient(&geom, &rules)?;
            let lhs = g.apply(&project_qh_local(|p| phi.eval(p), &geom, k, quad)?);
            let rhs = project_qbar(|p| phi.grad(p), &geom, k, quad)?;
            Ok((&lhs - &rhs).amax() / rhs.amax().max(1.0))
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

#[derive(Clone, Copy, Debug)]
pub struct StructuralReport {
    /// `max |A - A^T| / max |A|`.
    pub asymmetry: f64,
    /// Smallest eigenvalue of the dense stiffness, when small enough to form.
    pub min_eigenvalue: Option<f64>,
    /// Whether a sparse Cholesky factorization succeeds.
    pub factorizable: bool,
}

impl StructuralReport {
    pub fn spd(&self) -> bool {
        self.factorizable && self.min_eigenvalue.is_none_or(|m| m > 0.0)
    }
}

pub fn structural_check(system: &GlobalSystem) -> StructuralReport {
    let a = &system.stiffness;
    let asymmetry = a.max_asymmetry() / a.max_abs();
    let min_eigenvalue =
        (a.nrows() <= DENSE_LIMIT).then(|| a.to_dense().symmetric_eigenvalues().min());
    StructuralReport {
        asymmetry,
        min_eigenvalue,
        factorizable: SparseCholesky::new(a).is_ok(),
    }
}

/// Numerical rank of the dense mass matrix, singular values above `1e-12 * σ_max`.
pub fn mass_rank(system: &GlobalSystem) -> usize {
    let m: DMatrix<f64> = system.mass.to_dense();
    let sv = m.singular_values();
    let cut = 1e-12 * sv.max();
    sv.iter().filter(|&&s| s > cut).count()
}

/// `(max |b_w(u_i, u_i) - 1|, max_{i != j} |b_w(u_i, u_j)|)`.
pub fn orthonormality_defect(system: &GlobalSystem, pairs: &EigenPairSet) -> (f64, f64) {
    let xs: Vec<Vec<f64>> = pairs.vectors.iter().map(|v| v.to_global()).collect();
    let (mut diag, mut off) = (0.0f64, 0.0f64);
    for i in 0..xs.len() {
        diag = diag.max((system.mass.bilinear(&xs[i], &xs[i]) - 1.0).abs());
        for j in 0..i {
            off = off.max(system.mass.bilinear(&xs[i], &xs[j]).abs());
        }
    }
    (diag, off)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use crate::solvers::solve_eigen_system;
    use crate::solvers::EigenOptions;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polynomial_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Polynomial::random(3, &mut rng);
        assert_eq!(p.degree(), 3);
        let x = [0.3, -0.2];
        let d = 1e-6;
        let g = p.grad(x);
        let fx = (p.eval([x[0] + d, x[1]]) - p.eval([x[0] - d, x[1]])) / (2.0 * d);
        let fy = (p.eval([x[0], x[1] + d]) - p.eval([x[0], x[1] - d])) / (2.0 * d);
        assert!((g[0] - fx).abs() < 1e-7 && (g[1] - fy).abs() < 1e-7);
    }

    #[test]
    fn commutativity_beyond_degree_k() {
        let mesh = Mesh::uniform(Domain::LShape, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=3 {
            let phi = Polynomial::random(k + 1, &mut rng);
            assert!(commutativity_defect(&mesh, k, &phi).unwrap() < 1e-10);
        }
    }

    #[test]
    fn structural_checks_on_small_system() {
        let mesh = Mesh::uniform(Domain::UnitSquare, 2).unwrap();
        let sys = GlobalSystem::assemble(&mesh, 1, 0.0).unwrap();
        let r = structural_check(&sys);
        assert!(r.asymmetry <= 1e-13 && r.spd());
        assert_eq!(mass_rank(&sys), sys.n0());
        let pairs = solve_eigen_system(&mesh, &sys, 6, &EigenOptions::default()).unwrap();
        let (d, o) = orthonormality_defect(&sys, &pairs);
        assert!(d < 1e-10 && o < 1e-8);
    }
}

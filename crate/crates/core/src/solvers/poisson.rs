//! Weak Galerkin solve of `-Δu = f` with homogeneous Dirichlet data.

use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::basis::{poly_dim, TriangleRule};
use crate::error::Result;
use crate::mesh::{Mesh, Point};
use crate::solvers::spd::StiffnessFactor;
use crate::wg::{CellGeometry, WeakFunction};

/// Default quadrature exactness for non-polynomial data.
pub const DEFAULT_QUAD_DEGREE: usize = 12;

/// `(f, v0)` against every cell basis function; the edge block is zero.
pub fn load_vector(
    mesh: &Mesh,
    k: usize,
    f: impl Fn(Point) -> f64 + Sync,
    quad_degree: usize,
) -> Vec<f64> {
    let n0 = poly_dim(k);
    let rule = TriangleRule::with_degree(quad_degree);
    let mut out = vec![0.0; mesh.num_cells() * n0 + mesh.num_interior_edges() * k];
    out[..mesh.num_cells() * n0]
        .par_chunks_mut(n0)
        .enumerate()
        .for_each(|(c, chunk)| {
            let geom = CellGeometry::from_mesh(mesh, c);
            let basis = geom.basis(k);
            let mut phi = vec![0.0; n0];
            for (p, w) in rule.mapped(&geom.triangle) {
                basis.eval_into(p, &mut phi);
                let fw = w * f(p);
                for (o, v) in chunk.iter_mut().zip(&phi) {
                    *o += fw * v;
                }
            }
        });
    out
}

/// Solves `a_w(u_h, v) = (f, v0)` on an assembled system.
pub fn solve_poisson_system(
    mesh: &Mesh,
    system: &GlobalSystem,
    f: impl Fn(Point) -> f64 + Sync,
    quad_degree: usize,
) -> Result<WeakFunction> {
    let rhs = load_vector(mesh, system.k(), f, quad_degree);
    let factor = StiffnessFactor::new(&system.stiffness, &system.dofmap)?;
    WeakFunction::from_global(mesh, system.k(), &factor.solve(&rhs))
}

pub fn solve_poisson(
    mesh: &Mesh,
    k: usize,
    eps: f64,
    f: impl Fn(Point) -> f64 + Sync,
) -> Result<WeakFunction> {
    let system = GlobalSystem::assemble(mesh, k, eps)?;
    solve_poisson_system(mesh, &system, f, DEFAULT_QUAD_DEGREE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn zero_source_gives_zero() {
        let m = Mesh::uniform(Domain::UnitSquare, 4).unwrap();
        let u = solve_poisson(&m, 2, 0.0, |_| 0.0).unwrap();
        assert!(u.v0.iter().chain(&u.vb).all(|&v| v == 0.0));
    }

    #[test]
    fn load_pairs_only_with_interior() {
        let m = Mesh::uniform(Domain::UnitSquare, 2).unwrap();
        let b = load_vector(&m, 1, |_| 1.0, 4);
        let n0 = m.num_cells() * 3;
        assert!(b[n0..].iter().all(|&v| v == 0.0));
        // constant basis functions integrate to the cell areas
        let total: f64 = (0..m.num_cells()).map(|c| b[3 * c]).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solution_satisfies_discrete_equations() {
        let m = Mesh::uniform(Domain::LShape, 2).unwrap();
        let sys = GlobalSystem::assemble(&m, 2, 0.05).unwrap();
        let f = |p: Point| 1.0 + p[0] * p[1];
        let u = solve_poisson_system(&m, &sys, f, 8).unwrap();
        let au = sys.stiffness.matvec(&u.to_global());
        let b = load_vector(&m, 2, f, 8);
        let scale = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (x, y) in au.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }
}

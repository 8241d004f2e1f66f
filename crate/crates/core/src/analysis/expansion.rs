//! Term-by-term evaluation of the eigenvalue error expansion.
//!
//! For an exact pair `(λ, u)` with `||u|| = 1`, a discrete pair `(λ_h, u_h)`
//! with `||u_0|| = 1` and any `v` in `V_h`:
//!
//! ```text
//! λ - λ_h = ||∇u - ∇_w u_h||^2 + s(u_h - v, u_h - v) - λ_h ||u_0 - v_0||^2
//!         - λ_h (||u_0||^2 - ||v_0||^2) + 2 (∇u - ∇_w v, ∇_w u_h) - s(v, v)
//! ```

use rayon::prelude::*;

use crate::basis::TriangleRule;
use crate::error::{Result, WgError};
use crate::mesh::{Mesh, Point};
use crate::wg::{project_qbar, CellGeometry, LocalElement, LocalRules, WeakFunction};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExpansionTerms {
    /// `λ - λ_h`.
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|`.
    pub residual: f64,
    /// `(∇u - Q̄_h ∇u, ∇_w u_h)`, zero since `∇_w u_h` lies in the projection space.
    pub orthogonality: f64,
}

#[derive(Clone, Copy, Default)]
struct CellSums {
    grad_err: f64,
    stab_diff: f64,
    stab_v: f64,
    mass_diff: f64,
    mass_u: f64,
    mass_v: f64,
    cross: f64,
    orth: f64,
}

impl std::ops::Add for CellSums {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            grad_err: self.grad_err + o.grad_err,
            stab_diff: self.stab_diff + o.stab_diff,
            stab_v: self.stab_v + o.stab_v,
            mass_diff: self.mass_diff + o.mass_diff,
            mass_u: self.mass_u + o.mass_u,
            mass_v: self.mass_v + o.mass_v,
            cross: self.cross + o.cross,
            orth: self.orth + o.orth,
        }
    }
}

/// The exact side of the expansion: eigenvalue and eigenfunction gradient.
pub struct ExactPair<'a> {
    pub lambda: f64,
    pub grad: &'a (dyn Fn(Point) -> [f64; 2] + Sync),
}

/// The discrete side: eigenvalue and `b_w`-normalized eigenvector.
pub struct DiscretePair<'a> {
    pub lambda: f64,
    pub u: &'a WeakFunction,
}

pub fn expansion_residual(
    mesh: &Mesh,
    eps: f64,
    exact: &ExactPair,
    discrete: &DiscretePair,
    v: &WeakFunction,
    quad_degree: usize,
) -> Result<ExpansionTerms> {
    let u_h = discrete.u;
    let k = u_h.degree();
    if v.degree() != k || v.v0.len() != u_h.v0.len() || v.vb.len() != u_h.vb.len() {
        return Err(WgError::DimensionMismatch {
            expected: u_h.v0.len() + u_h.vb.len(),
            actual: v.v0.len() + v.vb.len(),
        });
    }
    let rules = LocalRules::new(k)?;
    let rule = TriangleRule::with_degree(quad_degree);
    let grad_u = exact.grad;
    let sums = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<CellSums> {
            let geom = CellGeometry::from_mesh(mesh, c);
            let el = LocalElement::new(&geom, &rules, eps)?;
            let lu = u_h.local(mesh, c);
            let lv = v.local(mesh, c);
            let diff = &lu - &lv;
            let gu = el.gradient.apply(&lu);
            let gv = el.gradient.apply(&lv);
            let qbar = project_qbar(grad_u, &geom, k, quad_degree)?;
            let n0 = rules.n0();
            let mass = |a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>| {
                let (a0, b0) = (a.rows(0, n0), b.rows(0, n0));
                a0.dot(&(&el.mass * b0))
            };
            let mut s = CellSums {
                stab_diff: el.stabilization.form(&diff),
                stab_v: el.stabilization.form(&lv),
                mass_diff: mass(&diff, &diff),
                mass_u: mass(&lu, &lu),
                mass_v: mass(&lv, &lv),
                ..CellSums::default()
            };
            for (p, w) in rule.mapped(&geom.triangle) {
                let g = grad_u(p);
                let wu = el.gradient.eval(&gu, p);
                let wv = el.gradient.eval(&gv, p);
                let q = el.gradient.eval(&qbar, p);
                let e = [g[0] - wu[0], g[1] - wu[1]];
                s.grad_err += w * (e[0] * e[0] + e[1] * e[1]);
                s.cross += w * ((g[0] - wv[0]) * wu[0] + (g[1] - wv[1]) * wu[1]);
                s.orth += w * ((g[0] - q[0]) * wu[0] + (g[1] - q[1]) * wu[1]);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(CellSums::default(), |a, b| a + b);
    let lh = discrete.lambda;
    let rhs =
        sums.grad_err + sums.stab_diff - lh * sums.mass_diff - lh * (sums.mass_u - sums.mass_v)
            + 2.0 * sums.cross
            - sums.stab_v;
    let lhs = exact.lambda - lh;
    Ok(ExpansionTerms {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        orthogonality: sums.orth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::exact::ExactSolution;
    use crate::mesh::Domain;
    use crate::solvers::solve_eigen;
    use crate::wg::project_qh;

    #[test]
    fn identity_holds_for_both_choices_of_v() {
        let ex = ExactSolution::unit_square(1);
        let md = *ex.mode(0);
        let grad = move |p: Point| md.grad(p);
        for (k, eps) in [(1, 0.1), (2, 0.0)] {
            let mesh = Mesh::uniform(Domain::UnitSquare, 8).unwrap();
            let pairs = solve_eigen(&mesh, k, eps, 1).unwrap();
            let exact = ExactPair {
                lambda: md.lambda,
                grad: &grad,
            };
            let disc = DiscretePair {
                lambda: pairs.values[0],
                u: &pairs.vectors[0],
            };
            let t = expansion_residual(&mesh, eps, &exact, &disc, &pairs.vectors[0], 12).unwrap();
            assert!(t.residual <= 1e-6 * t.lhs.abs(), "k={k}: {t:?}");
            assert!(t.orthogonality.abs() <= 1e-10, "{t:?}");
            let q = project_qh(|p| md.eval(p), &mesh, k, 12).unwrap();
            let t = expansion_residual(&mesh, eps, &exact, &disc, &q, 12).unwrap();
            assert!(t.residual <= 1e-6 * t.lhs.abs() + 1e-10, "k={k}: {t:?}");
        }
    }
}

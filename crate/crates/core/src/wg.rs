//! Element-level weak Galerkin operators.
//!
//! Local coefficient vectors on a cell are stacked as
//! `[v0 (dim P_k) | vb on edge 0 (k) | vb on edge 1 (k) | vb on edge 2 (k)]`.
//! Weak gradients live in `[P_{k-1}(T)]^2`, stored as the `x` component
//! coefficients followed by the `y` component coefficients, both in the
//! leading `dim P_{k-1}` scaled monomials of the cell basis.

use nalgebra::{DMatrix, DVector};

use crate::basis::{gram_with_rule, poly_dim, CellBasis, EdgeBasis, LineRule, TriangleRule};
use crate::error::{invalid, Result, WgError};
use crate::mesh::{distance, Mesh, Point, Triangle};

/// Geometry of one cell: the triangle, each local edge's endpoints in
/// edge-basis parameterization order, and the diameter `h_T`.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub triangle: Triangle,
    pub edges: [[Point; 2]; 3],
    pub diameter: f64,
}

impl CellGeometry {
    pub fn from_mesh(mesh: &Mesh, cell: usize) -> Self {
        let ids = mesh.cell_edges(cell);
        Self {
            triangle: mesh.triangle(cell),
            edges: ids.map(|e| mesh.edge_endpoints(e)),
            diameter: mesh.diameter(cell),
        }
    }

    /// Standalone triangle; edge `i` is parameterized from vertex `i` to `i+1`.
    pub fn from_triangle(triangle: Triangle) -> Self {
        let v = triangle.vertices;
        Self {
            triangle,
            edges: [[v[0], v[1]], [v[1], v[2]], [v[2], v[0]]],
            diameter: triangle.diameter(),
        }
    }

    pub fn basis(&self, k: usize) -> CellBasis {
        CellBasis::new(k, self.triangle.centroid(), self.diameter)
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        distance(self.edges[i][0], self.edges[i][1])
    }
}

/// Quadrature rules shared by all element computations at degree `k`.
#[derive(Clone, Debug)]
pub struct LocalRules {
    k: usize,
    cell: TriangleRule,
    edge: LineRule,
}

impl LocalRules {
    /// Rules of exactness `2k + 2`, enough for every polynomial integrand.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "polynomial degree must be at least 1"));
        }
        Ok(Self {
            k,
            cell: TriangleRule::with_degree(2 * k + 2),
            edge: LineRule::with_degree(2 * k + 2),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n0(&self) -> usize {
        poly_dim(self.k)
    }

    pub fn local_dim(&self) -> usize {
        self.n0() + 3 * self.k
    }

    pub fn cell_rule(&self) -> &TriangleRule {
        &self.cell
    }

    pub fn edge_rule(&self) -> &LineRule {
        &self.edge
    }
}

/// `G_T`: stacked local coefficients to weak-gradient coefficients.
#[derive(Clone, Debug)]
pub struct LocalWeakGradient {
    /// `nq x nl` map, `nq = k (k + 1)`.
    pub matrix: DMatrix<f64>,
    /// Gram matrix of `[P_{k-1}(T)]^2`.
    pub gram: DMatrix<f64>,
    /// Right-hand side of the defining relation, `gram * matrix = rhs`.
    pub rhs: DMatrix<f64>,
    basis: CellBasis,
}

impl LocalWeakGradient {
    /// Weak-gradient coefficients of a stacked local vector.
    pub fn apply(&self, local: &DVector<f64>) -> DVector<f64> {
        &self.matrix * local
    }

    /// Evaluates a weak-gradient coefficient vector at `p`.
    pub fn eval(&self, coeffs: &DVector<f64>, p: Point) -> [f64; 2] {
        let m = coeffs.len() / 2;
        let phi = self.basis.eval(p);
        let gx = (0..m).map(|i| coeffs[i] * phi[i]).sum();
        let gy = (0..m).map(|i| coeffs[m + i] * phi[i]).sum();
        [gx, gy]
    }

    /// Basis of the scalar components (degree `k - 1`).
    pub fn component_basis(&self) -> &CellBasis {
        &self.basis
    }
}

/// Edge-wise `Q_b` restricted to `P_k(T)`: `k x dim P_k` per local edge.
pub fn edge_projections(geom: &CellGeometry, rules: &LocalRules) -> [DMatrix<f64>; 3] {
    let k = rules.k();
    let basis = geom.basis(k);
    let eb = EdgeBasis::new(k);
    std::array::from_fn(|i| {
        let [a, b] = geom.edges[i];
        let len = distance(a, b);
        let mut p = DMatrix::zeros(k, basis.dim());
        let mut phi = vec![0.0; basis.dim()];
        let mut psi = vec![0.0; k];
        for (&s, &w) in rules.edge.points().iter().zip(rules.edge.weights()) {
            let t = 0.5 * (s + 1.0);
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            basis.eval_into(x, &mut phi);
            eb.eval_into(s, &mut psi);
            let wl = 0.5 * w * len;
            for m in 0..k {
                for l in 0..basis.dim() {
                    p[(m, l)] += wl * psi[m] * phi[l];
                }
            }
        }
        for m in 0..k {
            let inv = 1.0 / eb.norm_sq(m, len);
            for l in 0..basis.dim() {
                p[(m, l)] *= inv;
            }
        }
        p
    })
}

/// Builds the weak gradient operator on one cell.
pub fn local_weak_gradient(geom: &CellGeometry, rules: &LocalRules) -> Result<LocalWeakGradient> {
    let k = rules.k();
    let n0 = poly_dim(k);
    let m = poly_dim(k - 1);
    let nq = 2 * m;
    let nl = n0 + 3 * k;
    let basis = geom.basis(k);
    let tri = &geom.triangle;

    let gram_k = gram_with_rule(&basis, tri, &rules.cell);
    let mut gram = DMatrix::zeros(nq, nq);
    gram.view_mut((0, 0), (m, m))
        .copy_from(&gram_k.view((0, 0), (m, m)));
    gram.view_mut((m, m), (m, m))
        .copy_from(&gram_k.view((0, 0), (m, m)));

    let mut rhs = DMatrix::zeros(nq, nl);
    let mut phi = vec![0.0; n0];
    let mut dx = vec![0.0; n0];
    let mut dy = vec![0.0; n0];
    // -(v0, div q)_T
    for (p, w) in rules.cell.mapped(tri) {
        basis.eval_into(p, &mut phi);
        basis.grad_into(p, &mut dx, &mut dy);
        for j in 0..m {
            for l in 0..n0 {
                rhs[(j, l)] -= w * phi[l] * dx[j];
                rhs[(m + j, l)] -= w * phi[l] * dy[j];
            }
        }
    }
    // <vb, q.n>_{dT}
    let eb = EdgeBasis::new(k);
    let mut psi = vec![0.0; k];
    for i in 0..3 {
        let n = tri.outward_normal(i);
        let [a, b] = geom.edges[i];
        let len = distance(a, b);
        for (&s, &w) in rules.edge.points().iter().zip(rules.edge.weights()) {
            let t = 0.5 * (s + 1.0);
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            basis.eval_into(x, &mut phi);
            eb.eval_into(s, &mut psi);
            let wl = 0.5 * w * len;
            for j in 0..m {
                for (mm, &ps) in psi.iter().enumerate() {
                    let col = n0 + i * k + mm;
                    rhs[(j, col)] += wl * ps * phi[j] * n[0];
                    rhs[(m + j, col)] += wl * ps * phi[j] * n[1];
                }
            }
        }
    }

    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| WgError::Degenerate("singular weak-gradient Gram matrix".into()))?;
    let matrix = chol.solve(&rhs);
    Ok(LocalWeakGradient {
        matrix,
        gram,
        rhs,
        basis: CellBasis::new(k - 1, basis.center(), basis.scale()),
    })
}

/// `S_T`, the cell's share of the stabilization form.
#[derive(Clone, Debug)]
pub struct LocalStabilization {
    /// `sum_e D_e^T W_e D_e`, the unweighted boundary mismatch form.
    pub core: DMatrix<f64>,
    /// `h_T^{-1+eps}`.
    pub weight: f64,
}

impl LocalStabilization {
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.core * self.weight
    }

    /// Quadratic form value `h_T^{-1+eps} sum_e ||Q_b v0 - vb||_e^2`.
    pub fn form(&self, local: &DVector<f64>) -> f64 {
        self.weight * local.dot(&(&self.core * local))
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(invalid("eps", format!("{eps} is outside [0, 1)")));
    }
    Ok(())
}

pub fn local_stabilization(
    geom: &CellGeometry,
    rules: &LocalRules,
    eps: f64,
) -> Result<LocalStabilization> {
    check_eps(eps)?;
    let proj = edge_projections(geom, rules);
    Ok(stabilization_from_projections(geom, rules, &proj, eps))
}

fn stabilization_from_projections(
    geom: &CellGeometry,
    rules: &LocalRules,
    proj: &[DMatrix<f64>; 3],
    eps: f64,
) -> LocalStabilization {
    let k = rules.k();
    let n0 = rules.n0();
    let nl = rules.local_dim();
    let eb = EdgeBasis::new(k);
    let mut core = DMatrix::zeros(nl, nl);
    for (i, p) in proj.iter().enumerate() {
        let len = geom.edge_length(i);
        let mut d = DMatrix::zeros(k, nl);
        d.view_mut((0, 0), (k, n0)).copy_from(p);
        for m in 0..k {
            d[(m, n0 + i * k + m)] = -1.0;
        }
        let w = DMatrix::from_diagonal(&DVector::from_fn(k, |m, _| eb.norm_sq(m, len)));
        core += d.transpose() * w * d;
    }
    LocalStabilization {
        core,
        weight: geom.diameter.powf(-1.0 + eps),
    }
}

/// Every local operator of one cell.
#[derive(Clone, Debug)]
pub struct LocalElement {
    pub gradient: LocalWeakGradient,
    pub stabilization: LocalStabilization,
    /// Mass matrix of `P_k(T)`.
    pub mass: DMatrix<f64>,
    /// `G^T K G + S_T`.
    pub stiffness: DMatrix<f64>,
}

impl LocalElement {
    pub fn new(geom: &CellGeometry, rules: &LocalRules, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let gradient = local_weak_gradient(geom, rules)?;
        let proj = edge_projections(geom, rules);
        let stabilization = stabilization_from_projections(geom, rules, &proj, eps);
        let mass = gram_with_rule(&geom.basis(rules.k()), &geom.triangle, &rules.cell);
        let mut stiffness = gradient.matrix.transpose() * &gradient.rhs + stabilization.matrix();
        let n = stiffness.nrows();
        for j in 0..n {
            for i in j + 1..n {
                let avg = 0.5 * (stiffness[(i, j)] + stiffness[(j, i)]);
                stiffness[(i, j)] = avg;
                stiffness[(j, i)] = avg;
            }
        }
        Ok(Self {
            gradient,
            stabilization,
            mass,
            stiffness,
        })
    }
}

/// `Q_0 f` on one cell: coefficients in the scaled monomial basis.
pub fn project_q0(
    f: impl Fn(Point) -> f64,
    geom: &CellGeometry,
    k: usize,
    quad_degree: usize,
) -> Result<DVector<f64>> {
    let basis = geom.basis(k);
    let rule = TriangleRule::with_degree(quad_degree.max(2 * k + 2));
    let gram = gram_with_rule(&basis, &geom.triangle, &rule);
    let mut rhs = DVector::zeros(basis.dim());
    let mut phi = vec![0.0; basis.dim()];
    for (p, w) in rule.mapped(&geom.triangle) {
        basis.eval_into(p, &mut phi);
        let fv = w * f(p);
        for (r, v) in rhs.iter_mut().zip(&phi) {
            *r += fv * v;
        }
    }
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| WgError::Degenerate("singular cell Gram matrix".into()))
}

/// `Q_b f` on the segment `a -> b`: Legendre coefficients of `P_{k-1}(e)`.
pub fn project_qb(
    f: impl Fn(Point) -> f64,
    a: Point,
    b: Point,
    k: usize,
    quad_degree: usize,
) -> DVector<f64> {
    let eb = EdgeBasis::new(k);
    let rule = LineRule::with_degree(quad_degree.max(2 * k));
    let len = distance(a, b);
    let mut psi = vec![0.0; k];
    DVector::from_fn(k, |m, _| {
        rule.integrate_segment(a, b, |s, p| {
            eb.eval_into(s, &mut psi);
            psi[m] * f(p)
        }) / eb.norm_sq(m, len)
    })
}

/// `Q_h f` on one cell as a stacked local vector, every edge included.
pub fn project_qh_local(
    f: impl Fn(Point) -> f64,
    geom: &CellGeometry,
    k: usize,
    quad_degree: usize,
) -> Result<DVector<f64>> {
    let n0 = poly_dim(k);
    let mut v = DVector::zeros(n0 + 3 * k);
    v.rows_mut(0, n0)
        .copy_from(&project_q0(&f, geom, k, quad_degree)?);
    for (i, [a, b]) in geom.edges.iter().enumerate() {
        v.rows_mut(n0 + i * k, k)
            .copy_from(&project_qb(&f, *a, *b, k, quad_degree));
    }
    Ok(v)
}

/// `Q̄_h g` on one cell: `[P_{k-1}]^2` coefficients, `x` part then `y` part.
pub fn project_qbar(
    g: impl Fn(Point) -> [f64; 2],
    geom: &CellGeometry,
    k: usize,
    quad_degree: usize,
) -> Result<DVector<f64>> {
    let cx = project_q0(|p| g(p)[0], geom, k - 1, quad_degree)?;
    let cy = project_q0(|p| g(p)[1], geom, k - 1, quad_degree)?;
    Ok(DVector::from_iterator(
        cx.len() + cy.len(),
        cx.iter().chain(cy.iter()).copied(),
    ))
}

/// A member of `V_h`: interior polynomials per cell and edge polynomials per
/// interior edge. Boundary edges carry an implicit zero.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakFunction {
    k: usize,
    /// `num_cells * dim P_k`, cell-major.
    pub v0: Vec<f64>,
    /// `num_interior_edges * k`, interior-edge-major.
    pub vb: Vec<f64>,
}

impl WeakFunction {
    pub fn zeros(mesh: &Mesh, k: usize) -> Self {
        Self {
            k,
            v0: vec![0.0; mesh.num_cells() * poly_dim(k)],
            vb: vec![0.0; mesh.num_interior_edges() * k],
        }
    }

    /// Splits a global coefficient vector (cell block first, edge block second).
    pub fn from_global(mesh: &Mesh, k: usize, global: &[f64]) -> Result<Self> {
        let n0 = mesh.num_cells() * poly_dim(k);
        let nb = mesh.num_interior_edges() * k;
        if global.len() != n0 + nb {
            return Err(WgError::DimensionMismatch {
                expected: n0 + nb,
                actual: global.len(),
            });
        }
        Ok(Self {
            k,
            v0: global[..n0].to_vec(),
            vb: global[n0..].to_vec(),
        })
    }

    pub fn to_global(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.v0.len() + self.vb.len());
        out.extend_from_slice(&self.v0);
        out.extend_from_slice(&self.vb);
        out
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        let n = poly_dim(self.k);
        &self.v0[c * n..(c + 1) * n]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        let n = poly_dim(self.k);
        &mut self.v0[c * n..(c + 1) * n]
    }

    pub fn edge(&self, interior: usize) -> &[f64] {
        &self.vb[interior * self.k..(interior + 1) * self.k]
    }

    pub fn edge_mut(&mut self, interior: usize) -> &mut [f64] {
        let k = self.k;
        &mut self.vb[interior * k..(interior + 1) * k]
    }

    /// Stacked local coefficients on `cell`.
    pub fn local(&self, mesh: &Mesh, cell: usize) -> DVector<f64> {
        let n0 = poly_dim(self.k);
        let mut out = DVector::zeros(n0 + 3 * self.k);
        out.rows_mut(0, n0).copy_from_slice(self.cell(cell));
        for (i, &e) in mesh.cell_edges(cell).iter().enumerate() {
            if let Some(ie) = mesh.interior_index(e) {
                out.rows_mut(n0 + i * self.k, self.k)
                    .copy_from_slice(self.edge(ie));
            }
        }
        out
    }

    pub fn axpy(&mut self, alpha: f64, other: &WeakFunction) {
        for (a, b) in self.v0.iter_mut().zip(&other.v0) {
            *a += alpha * b;
        }
        for (a, b) in self.vb.iter_mut().zip(&other.vb) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.v0
            .iter_mut()
            .chain(self.vb.iter_mut())
            .for_each(|v| *v *= alpha);
    }
}

/// `Q_h f = {Q_0 f, Q_b f}` on the whole mesh, with `Q_b f` dropped on the
/// boundary.
pub fn project_qh(
    f: impl Fn(Point) -> f64 + Sync,
    mesh: &Mesh,
    k: usize,
    quad_degree: usize,
) -> Result<WeakFunction> {
    use rayon::prelude::*;
    let mut out = WeakFunction::zeros(mesh, k);
    let n0 = poly_dim(k);
    out.v0
        .par_chunks_mut(n0)
        .enumerate()
        .try_for_each(|(c, chunk)| -> Result<()> {
            let coeffs = project_q0(&f, &CellGeometry::from_mesh(mesh, c), k, quad_degree)?;
            chunk.copy_from_slice(coeffs.as_slice());
            Ok(())
        })?;
    out.vb
        .par_chunks_mut(k)
        .zip(mesh.interior_edges().par_iter())
        .for_each(|(chunk, &e)| {
            let [a, b] = mesh.edge_endpoints(e);
            chunk.copy_from_slice(project_qb(&f, a, b, k, quad_degree).as_slice());
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_geometry(rng: &mut ChaCha8Rng) -> CellGeometry {
        loop {
            let mut p = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (a, b, c) = (p(), p(), p());
            let t = Triangle::new(a, b, c);
            if t.area() > 0.1 {
                let t = if t.signed_area() > 0.0 {
                    t
                } else {
                    Triangle::new(a, c, b)
                };
                return CellGeometry::from_triangle(t);
            }
        }
    }

    fn local_qh(f: impl Fn(Point) -> f64, geom: &CellGeometry, k: usize) -> DVector<f64> {
        let n0 = poly_dim(k);
        let mut v = DVector::zeros(n0 + 3 * k);
        v.rows_mut(0, n0)
            .copy_from(&project_q0(&f, geom, k, 2 * k + 4).unwrap());
        for i in 0..3 {
            let [a, b] = geom.edges[i];
            v.rows_mut(n0 + i * k, k)
                .copy_from(&project_qb(&f, a, b, k, 2 * k + 4));
        }
        v
    }

    #[test]
    fn weak_gradient_of_linear_function() {
        let mesh = Mesh::uniform(Domain::UnitSquare, 2).unwrap();
        let rules = LocalRules::new(1).unwrap();
        for c in 0..mesh.num_cells() {
            let geom = CellGeometry::from_mesh(&mesh, c);
            let g = local_weak_gradient(&geom, &rules).unwrap();
            let v = local_qh(|p| p[0], &geom, 1);
            let grad = g.apply(&v);
            assert!((grad[0] - 1.0).abs() < 1e-12 && grad[1].abs() < 1e-12);
        }
    }

    #[test]
    fn weak_gradient_annihilates_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=3 {
            let rules = LocalRules::new(k).unwrap();
            let geom = random_geometry(&mut rng);
            let g = local_weak_gradient(&geom, &rules).unwrap();
            let v = local_qh(|_| 3.0, &geom, k);
            assert!(g.apply(&v).amax() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn weak_gradient_satisfies_defining_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in 1..=4 {
            let rules = LocalRules::new(k).unwrap();
            let geom = random_geometry(&mut rng);
            let g = local_weak_gradient(&geom, &rules).unwrap();
            let resid = &g.gram * &g.matrix - &g.rhs;
            assert!(resid.amax() <= 1e-12 * g.rhs.amax(), "k={k}");
        }
    }

    /// Solves the defining relation densely with plain monomial test fields,
    /// raw high-order quadrature and an SVD least-squares solve.
    #[test]
    fn weak_gradient_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=3 {
            let rules = LocalRules::new(k).unwrap();
            let geom = random_geometry(&mut rng);
            let g = local_weak_gradient(&geom, &rules).unwrap();
            let n0 = poly_dim(k);
            let local = DVector::from_fn(n0 + 3 * k, |_, _| rng.random_range(-1.0..1.0));
            let coeffs = g.apply(&local);

            // unknowns: c_x, c_y for plain monomials x^a y^b, a + b <= k - 1
            let exps = crate::basis::exponents(k - 1);
            let m = exps.len();
            let mono = |p: Point, (a, b): (usize, usize)| p[0].powi(a as i32) * p[1].powi(b as i32);
            let dmono = |p: Point, (a, b): (usize, usize), dir: usize| match dir {
                0 if a > 0 => a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32),
                1 if b > 0 => b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1),
                _ => 0.0,
            };
            let basis = geom.basis(k);
            let v0 = |p: Point| basis.combine(local.rows(0, n0).as_slice(), p);
            let eb = EdgeBasis::new(k);
            let cell_rule = TriangleRule::with_degree(14);
            let line = LineRule::gauss_legendre(10);
            let mut lhs = DMatrix::zeros(2 * m, 2 * m);
            let mut rhs = DVector::zeros(2 * m);
            for dir in 0..2 {
                for (j, &ej) in exps.iter().enumerate() {
                    let row = dir * m + j;
                    for (i, &ei) in exps.iter().enumerate() {
                        let val =
                            cell_rule.integrate(&geom.triangle, |p| mono(p, ei) * mono(p, ej));
                        lhs[(row, dir * m + i)] = val;
                    }
                    let mut r = -cell_rule.integrate(&geom.triangle, |p| v0(p) * dmono(p, ej, dir));
                    for e in 0..3 {
                        let n = geom.triangle.outward_normal(e);
                        let [a, b] = geom.edges[e];
                        let vb = local.rows(n0 + e * k, k).clone_owned();
                        r += line.integrate_segment(a, b, |s, p| {
                            let psi = eb.eval(s);
                            let vbs: f64 = (0..k).map(|q| vb[q] * psi[q]).sum();
                            vbs * mono(p, ej) * n[dir]
                        });
                    }
                    rhs[row] = r;
                }
            }
            let sol = lhs.svd(true, true).solve(&rhs, 1e-14).unwrap();
            for _ in 0..5 {
                let p = geom
                    .triangle
                    .map(rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
                let ours = g.eval(&coeffs, p);
                let ox: f64 = exps
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| sol[i] * mono(p, e))
                    .sum();
                let oy: f64 = exps
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| sol[m + i] * mono(p, e))
                    .sum();
                let scale = ox.abs().max(oy.abs()).max(1.0);
                assert!((ours[0] - ox).abs() <= 1e-11 * scale, "k={k}");
                assert!((ours[1] - oy).abs() <= 1e-11 * scale, "k={k}");
            }
        }
    }

    #[test]
    fn stabilization_vanishes_on_projected_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 1..=3 {
            let rules = LocalRules::new(k).unwrap();
            let geom = random_geometry(&mut rng);
            let s = local_stabilization(&geom, &rules, 0.05).unwrap();
            let coef: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let poly = |p: Point| {
                crate::basis::exponents(k)
                    .iter()
                    .zip(&coef)
                    .map(|(&(a, b), c)| c * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum::<f64>()
            };
            let v = local_qh(poly, &geom, k);
            assert!(s.form(&v).abs() < 1e-12, "k={k}");
            let v = local_qh(|p| p[0], &geom, k);
            assert!(s.form(&v).abs() < 1e-13);
        }
    }

    #[test]
    fn stabilization_of_interior_constant() {
        let mesh = Mesh::uniform(Domain::UnitSquare, 4).unwrap();
        let rules = LocalRules::new(1).unwrap();
        let geom = CellGeometry::from_mesh(&mesh, 5);
        let s = local_stabilization(&geom, &rules, 0.0).unwrap();
        let mut v = DVector::zeros(rules.local_dim());
        v[0] = 1.0;
        let perimeter: f64 = (0..3).map(|i| geom.edge_length(i)).sum();
        assert!((s.form(&v) - perimeter / geom.diameter).abs() < 1e-12);
    }

    #[test]
    fn stabilization_matches_boundary_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eps = 0.1;
        for k in 1..=3 {
            let rules = LocalRules::new(k).unwrap();
            let geom = random_geometry(&mut rng);
            let s = local_stabilization(&geom, &rules, eps).unwrap();
            let n0 = poly_dim(k);
            let v = DVector::from_fn(rules.local_dim(), |_, _| rng.random_range(-1.0..1.0));
            let basis = geom.basis(k);
            let eb = EdgeBasis::new(k);
            let line = LineRule::gauss_legendre(12);
            let mut total = 0.0;
            for e in 0..3 {
                let [a, b] = geom.edges[e];
                // Q_b v0 by brute-force projection, then the mismatch integral
                let qb = project_qb(|p| basis.combine(v.rows(0, n0).as_slice(), p), a, b, k, 20);
                total += line.integrate_segment(a, b, |s, _| {
                    let psi = eb.eval(s);
                    let d: f64 = (0..k).map(|m| (qb[m] - v[n0 + e * k + m]) * psi[m]).sum();
                    d * d
                });
            }
            let expected = geom.diameter.powf(-1.0 + eps) * total;
            assert!(
                (s.form(&v) - expected).abs() <= 1e-12 * expected.max(1.0),
                "k={k}"
            );
            let eig = s.matrix().symmetric_eigenvalues();
            assert!(eig.min() > -1e-12 * eig.max());
        }
    }

    #[test]
    fn eps_range_is_validated() {
        let rules = LocalRules::new(1).unwrap();
        let geom = CellGeometry::from_triangle(Triangle::new([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]));
        assert!(local_stabilization(&geom, &rules, 1.0).is_err());
        assert!(local_stabilization(&geom, &rules, -0.1).is_err());
        assert!(LocalRules::new(0).is_err());
    }

    #[test]
    fn q0_reproduces_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let geom = random_geometry(&mut rng);
        let f = |p: Point| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1] - p[1] * p[1];
        let c = project_q0(f, &geom, 2, 6).unwrap();
        let basis = geom.basis(2);
        for (xi, eta) in [(0.1, 0.2), (0.3, 0.3), (0.6, 0.1)] {
            let p = geom.triangle.map(xi, eta);
            assert!((basis.combine(c.as_slice(), p) - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn q0_best_linear_fit_matches_normal_equations() {
        let geom = CellGeometry::from_triangle(Triangle::new([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]));
        let c = project_q0(|p| p[0] * p[0], &geom, 1, 6).unwrap();
        // normal equations in the plain basis {1, x, y} with exact moments
        // int x^a y^b = a! b! / (a + b + 2)!
        let mom = |a: i32, b: i32| {
            let f = |n: i32| (1..=n).map(f64::from).product::<f64>();
            f(a) * f(b) / f(a + b + 2)
        };
        let g = DMatrix::from_row_slice(
            3,
            3,
            &[
                mom(0, 0),
                mom(1, 0),
                mom(0, 1),
                mom(1, 0),
                mom(2, 0),
                mom(1, 1),
                mom(0, 1),
                mom(1, 1),
                mom(0, 2),
            ],
        );
        let r = DVector::from_row_slice(&[mom(2, 0), mom(3, 0), mom(2, 1)]);
        let plain = g.lu().solve(&r).unwrap();
        let basis = geom.basis(1);
        for (x, y) in [(0.2, 0.1), (0.5, 0.3), (0.0, 0.9)] {
            let ours = basis.combine(c.as_slice(), [x, y]);
            let oracle = plain[0] + plain[1] * x + plain[2] * y;
            assert!((ours - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn qb_and_qbar_simple_cases() {
        let c = project_qb(|_| 2.5, [0.0, 0.0], [0.3, 0.4], 3, 4);
        assert!((c[0] - 2.5).abs() < 1e-14 && c[1].abs() < 1e-14 && c[2].abs() < 1e-14);

        let geom = CellGeometry::from_triangle(Triangle::new([0.1, 0.2], [0.9, 0.3], [0.4, 0.8]));
        let q = project_qbar(|p| [p[1], p[0]], &geom, 1, 4).unwrap();
        let area = geom.triangle.area();
        let mean_y =
            crate::basis::integrate(|p| p[1], &crate::basis::Region::Cell(geom.triangle), 2) / area;
        let mean_x =
            crate::basis::integrate(|p| p[0], &crate::basis::Region::Cell(geom.triangle), 2) / area;
        assert!((q[0] - mean_y).abs() < 1e-14 && (q[1] - mean_x).abs() < 1e-14);
    }

    #[test]
    fn commutative_property_for_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = 3;
        let rules = LocalRules::new(k).unwrap();
        for _ in 0..4 {
            let geom = random_geometry(&mut rng);
            let g = local_weak_gradient(&geom, &rules).unwrap();
            let phi = |p: Point| p[0] * p[0] * p[1];
            let grad_phi = |p: Point| [2.0 * p[0] * p[1], p[0] * p[0]];
            let lhs = g.apply(&local_qh(phi, &geom, k));
            let rhs = project_qbar(grad_phi, &geom, k, 10).unwrap();
            assert!((&lhs - &rhs).amax() <= 1e-11 * rhs.amax().max(1.0));
        }
    }

    #[test]
    fn weak_function_global_roundtrip() {
        let mesh = Mesh::uniform(Domain::UnitSquare, 3).unwrap();
        let k = 2;
        let f = project_qh(|p| p[0] * p[1], &mesh, k, 6).unwrap();
        let g = f.to_global();
        assert_eq!(WeakFunction::from_global(&mesh, k, &g).unwrap(), f);
        assert!(WeakFunction::from_global(&mesh, k, &g[1..]).is_err());
    }
}

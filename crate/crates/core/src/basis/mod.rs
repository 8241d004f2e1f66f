//! Polynomial spaces on cells and edges.
//!
//! Cells use scaled monomials centred at the centroid,
//! `((x - x_T)/h_T)^a ((y - y_T)/h_T)^b` with `a + b <= k`, ordered by total
//! degree and then by the power of `y`. Because of that ordering the first
//! `dim(k-1)` functions span `P_{k-1}`. Edges use Legendre polynomials in the
//! arc-length parameter mapped to `[-1, 1]`, running from the lower to the
//! higher global vertex id.

pub mod quadrature;

use nalgebra::DMatrix;

use crate::error::{invalid, Result, WgError};
use crate::mesh::{distance, Point, Triangle};
pub use quadrature::{LineRule, TriangleRule};

/// Dimension of `P_k` in two variables.
pub fn poly_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponent pairs `(a, b)` of the cell basis, in storage order.
pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    (0..=k)
        .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
        .collect()
}

/// Scaled monomial basis of `P_k(T)`.
#[derive(Clone, Debug)]
pub struct CellBasis {
    degree: usize,
    center: Point,
    scale: f64,
    exps: Vec<(usize, usize)>,
}

impl CellBasis {
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        Self {
            degree,
            center,
            scale,
            exps: exponents(degree),
        }
    }

    pub fn for_triangle(tri: &Triangle, degree: usize) -> Self {
        Self::new(degree, tri.centroid(), tri.diameter())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exps
    }

    fn powers(&self, p: Point) -> ([f64; 16], [f64; 16]) {
        let xi = (p[0] - self.center[0]) / self.scale;
        let eta = (p[1] - self.center[1]) / self.scale;
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        (px, py)
    }

    /// Values of all basis functions at `p`.
    pub fn eval_into(&self, p: Point, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exps) {
            *o = px[a] * py[b];
        }
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out);
        out
    }

    /// Partial derivatives of all basis functions at `p`.
    pub fn grad_into(&self, p: Point, dx: &mut [f64], dy: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        for (i, &(a, b)) in self.exps.iter().enumerate() {
            dx[i] = if a > 0 {
                a as f64 * inv * px[a - 1] * py[b]
            } else {
                0.0
            };
            dy[i] = if b > 0 {
                b as f64 * inv * px[a] * py[b - 1]
            } else {
                0.0
            };
        }
    }

    pub fn grad(&self, p: Point) -> (Vec<f64>, Vec<f64>) {
        let mut dx = vec![0.0; self.dim()];
        let mut dy = vec![0.0; self.dim()];
        self.grad_into(p, &mut dx, &mut dy);
        (dx, dy)
    }

    /// Evaluates the polynomial with the given coefficients at `p`.
    pub fn combine(&self, coeffs: &[f64], p: Point) -> f64 {
        let (px, py) = self.powers(p);
        coeffs
            .iter()
            .zip(&self.exps)
            .map(|(c, &(a, b))| c * px[a] * py[b])
            .sum()
    }
}

/// Legendre basis `P_0..P_{dim-1}` of `P_{k-1}(e)` on an edge.
#[derive(Clone, Copy, Debug)]
pub struct EdgeBasis {
    dim: usize,
}

impl EdgeBasis {
    /// Basis of `P_{k-1}(e)`, dimension `k`.
    pub fn new(k: usize) -> Self {
        Self { dim: k }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `P_m(s)` for `m < dim`, `s` in `[-1, 1]`.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        if self.dim == 0 {
            return;
        }
        out[0] = 1.0;
        if self.dim > 1 {
            out[1] = s;
        }
        for m in 2..self.dim {
            let mf = m as f64;
            out[m] = ((2.0 * mf - 1.0) * s * out[m - 1] - (mf - 1.0) * out[m - 2]) / mf;
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(s, &mut out);
        out
    }

    /// `int_e P_m^2 = |e| / (2m + 1)`.
    pub fn norm_sq(&self, m: usize, length: f64) -> f64 {
        length / (2 * m + 1) as f64
    }
}

fn check_cell(tri: &Triangle) -> Result<()> {
    let area = tri.area();
    let d = tri.diameter();
    if area.is_nan() || area <= 1e-14 * d * d {
        return Err(WgError::Degenerate(format!("triangle with area {area:e}")));
    }
    Ok(())
}

/// Mass matrix `(phi_i, phi_j)_T` of the scaled monomial basis of `P_k(T)`.
pub fn cell_gram(tri: &Triangle, k: usize) -> Result<DMatrix<f64>> {
    check_cell(tri)?;
    let basis = CellBasis::for_triangle(tri, k);
    let rule = TriangleRule::with_degree(2 * k + 2);
    Ok(gram_with_rule(&basis, tri, &rule))
}

pub(crate) fn gram_with_rule(
    basis: &CellBasis,
    tri: &Triangle,
    rule: &TriangleRule,
) -> DMatrix<f64> {
    let n = basis.dim();
    let mut g = DMatrix::zeros(n, n);
    let mut phi = vec![0.0; n];
    for (p, w) in rule.mapped(tri) {
        basis.eval_into(p, &mut phi);
        for j in 0..n {
            let wj = w * phi[j];
            for i in j..n {
                g[(i, j)] += wj * phi[i];
            }
        }
    }
    for j in 0..n {
        for i in j + 1..n {
            g[(j, i)] = g[(i, j)];
        }
    }
    g
}

/// Mass matrix of the Legendre basis of `P_{k-1}(e)` on the segment `a-b`.
pub fn edge_gram(a: Point, b: Point, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(invalid("k", "edge space needs k >= 1"));
    }
    let len = distance(a, b);
    if len.is_nan() || len <= 0.0 {
        return Err(WgError::Degenerate("zero-length edge".into()));
    }
    let basis = EdgeBasis::new(k);
    Ok(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            basis.norm_sq(i, len)
        } else {
            0.0
        }
    }))
}

/// Integration region for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub enum Region {
    Cell(Triangle),
    Edge(Point, Point),
}

/// Integrates `f` over a cell or edge with a rule exact to `degree`.
pub fn integrate(f: impl Fn(Point) -> f64, region: &Region, degree: usize) -> f64 {
    match region {
        Region::Cell(tri) => TriangleRule::with_degree(degree).integrate(tri, f),
        Region::Edge(a, b) => LineRule::with_degree(degree).integrate_segment(*a, *b, |_, p| f(p)),
    }
}

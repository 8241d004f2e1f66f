//! Gauss-Legendre rules on `[-1,1]` and collapsed (Duffy) product rules on
//! the reference triangle `(0,0),(1,0),(0,1)`.

use std::f64::consts::PI;

use crate::mesh::{Point, Triangle};

/// A quadrature rule on the interval `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct LineRule {
    points: Vec<f64>,
    weights: Vec<f64>,
    degree: usize,
}

impl LineRule {
    /// `npts`-point Gauss-Legendre rule, exact up to degree `2 npts - 1`.
    pub fn gauss_legendre(npts: usize) -> Self {
        assert!(npts >= 1);
        let mut points = vec![0.0; npts];
        let mut weights = vec![0.0; npts];
        let nf = npts as f64;
        for i in 0..npts.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(npts, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(npts, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = -x;
            points[npts - 1 - i] = x;
            weights[i] = w;
            weights[npts - 1 - i] = w;
        }
        if npts % 2 == 1 {
            points[npts / 2] = 0.0;
        }
        Self {
            points,
            weights,
            degree: 2 * npts - 1,
        }
    }

    /// Smallest Gauss-Legendre rule exact for polynomials of `degree`.
    pub fn with_degree(degree: usize) -> Self {
        Self::gauss_legendre(degree / 2 + 1)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` along the segment `a -> b`. The closure receives the
    /// parameter `s in [-1,1]` and the physical point.
    pub fn integrate_segment(
        &self,
        a: Point,
        b: Point,
        mut f: impl FnMut(f64, Point) -> f64,
    ) -> f64 {
        let half = 0.5 * crate::mesh::distance(a, b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| {
                let t = 0.5 * (s + 1.0);
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                w * half * f(s, p)
            })
            .sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for m in 2..=n {
        let mf = m as f64;
        let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on the reference triangle; weights sum to `1/2`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    points: Vec<Point>,
    weights: Vec<f64>,
    degree: usize,
}

impl TriangleRule {
    /// Collapsed Gauss product rule exact for all polynomials of total
    /// degree `<= degree`.
    ///
    /// Uses `x = u`, `y = v (1 - u)` on the unit square, whose Jacobian
    /// `1 - u` raises the `u`-degree by one.
    pub fn with_degree(degree: usize) -> Self {
        let m = (degree + 3) / 2;
        let line = LineRule::gauss_legendre(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (&su, &wu) in line.points.iter().zip(&line.weights) {
            let u = 0.5 * (su + 1.0);
            for (&sv, &wv) in line.points.iter().zip(&line.weights) {
                let v = 0.5 * (sv + 1.0);
                points.push([u, v * (1.0 - u)]);
                weights.push(0.25 * wu * wv * (1.0 - u));
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical points and weights on `tri`.
    pub fn mapped(&self, tri: &Triangle) -> impl Iterator<Item = (Point, f64)> + '_ {
        let jac = 2.0 * tri.area();
        let tri = *tri;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(p, &w)| (tri.map(p[0], p[1]), w * jac))
    }

    /// `int_T f`.
    pub fn integrate(&self, tri: &Triangle, mut f: impl FnMut(Point) -> f64) -> f64 {
        self.mapped(tri).map(|(p, w)| w * f(p)).sum()
    }
}

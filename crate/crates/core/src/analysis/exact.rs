//! Closed-form references on the unit square.

use std::f64::consts::PI;
use std::ops::Range;

use crate::mesh::{Domain, Point};

/// One Dirichlet mode `2 sin(m pi x) sin(n pi y)` with `lambda = (m^2 + n^2) pi^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub m: usize,
    pub n: usize,
    pub lambda: f64,
}

impl Mode {
    fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            lambda: ((m * m + n * n) as f64) * PI * PI,
        }
    }

    fn index(&self) -> usize {
        self.m * self.m + self.n * self.n
    }

    pub fn eval(&self, p: Point) -> f64 {
        let (a, b) = (self.m as f64 * PI, self.n as f64 * PI);
        2.0 * (a * p[0]).sin() * (b * p[1]).sin()
    }

    pub fn grad(&self, p: Point) -> [f64; 2] {
        let (a, b) = (self.m as f64 * PI, self.n as f64 * PI);
        [
            2.0 * a * (a * p[0]).cos() * (b * p[1]).sin(),
            2.0 * b * (a * p[0]).sin() * (b * p[1]).cos(),
        ]
    }
}

/// Exact Laplace eigenpairs, sorted ascending and grouped into clusters of
/// equal eigenvalues. The L-shaped domain carries no closed form.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    domain: Domain,
    modes: Vec<Mode>,
    clusters: Vec<Range<usize>>,
}

impl ExactSolution {
    /// At least `count` eigenpairs on the unit square; the last cluster is
    /// completed so no eigenspace is cut.
    pub fn unit_square(count: usize) -> Self {
        let bound = count + 1;
        let mut all: Vec<Mode> = (1..=bound)
            .flat_map(|m| (1..=bound).map(move |n| Mode::new(m, n)))
            .collect();
        all.sort_by_key(|md| (md.index(), md.m));
        let mut take = count.min(all.len());
        while take > 0 && take < all.len() && all[take].index() == all[take - 1].index() {
            take += 1;
        }
        all.truncate(take);
        let mut clusters = Vec::new();
        let mut start = 0;
        for i in 1..=all.len() {
            if i == all.len() || all[i].index() != all[start].index() {
                clusters.push(start..i);
                start = i;
            }
        }
        Self {
            domain: Domain::UnitSquare,
            modes: all,
            clusters,
        }
    }

    pub fn for_domain(domain: Domain, count: usize) -> Self {
        match domain {
            Domain::UnitSquare => Self::unit_square(count),
            Domain::LShape => Self {
                domain,
                modes: Vec::new(),
                clusters: Vec::new(),
            },
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn has_reference(&self) -> bool {
        !self.modes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &Mode {
        &self.modes[j]
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    pub fn clusters(&self) -> &[Range<usize>] {
        &self.clusters
    }

    /// Cluster containing the zero-based index `j`.
    pub fn cluster_of(&self, j: usize) -> Range<usize> {
        self.clusters
            .iter()
            .find(|c| c.contains(&j))
            .cloned()
            .unwrap_or(j..j + 1)
    }
}

/// `u = sin(pi x) sin(pi y)` with `-Δu = f`; it vanishes on the boundary of
/// both domains.
pub struct ManufacturedPoisson;

impl ManufacturedPoisson {
    pub fn u(p: Point) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin()
    }

    pub fn grad(p: Point) -> [f64; 2] {
        [
            PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
            PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
        ]
    }

    pub fn source(p: Point) -> f64 {
        2.0 * PI * PI * Self::u(p)
    }
}

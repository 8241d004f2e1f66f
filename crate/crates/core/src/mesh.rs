//! Uniform triangulations of the unit square and the L-shaped domain.
//!
//! Every grid square of side `1/n` is split along its lower-left to
//! upper-right diagonal into two congruent right triangles. Cells are stored
//! counterclockwise; local edge `i` of a cell joins its local vertices `i` and
//! `(i + 1) % 3`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{invalid, Result};

pub type Point = [f64; 2];

/// The computational domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `(0,1)^2`
    UnitSquare,
    /// `(-1,1)^2` minus the closed upper-right quadrant `[0,1]x[0,1]`.
    LShape,
}

impl Domain {
    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }

    pub fn perimeter(self) -> f64 {
        match self {
            Domain::UnitSquare => 4.0,
            Domain::LShape => 8.0,
        }
    }

    /// Whether `p` lies in the closed domain.
    pub fn contains(self, p: Point) -> bool {
        let [x, y] = p;
        match self {
            Domain::UnitSquare => (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y),
            Domain::LShape => {
                (-1.0..=1.0).contains(&x) && (-1.0..=1.0).contains(&y) && !(x > 0.0 && y > 0.0)
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::UnitSquare => f.write_str("square"),
            Domain::LShape => f.write_str("lshape"),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" | "unit-square" | "unitsquare" => Ok(Domain::UnitSquare),
            "lshape" | "l-shape" => Ok(Domain::LShape),
            other => Err(format!(
                "unknown domain `{other}` (expected square or lshape)"
            )),
        }
    }
}

/// A mesh edge. `vertices` is sorted ascending, which also fixes the
/// parameterization direction of the edge basis.
#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub cells: [usize; 2],
    pub num_cells: usize,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.num_cells == 1
    }

    pub fn adjacent_cells(&self) -> &[usize] {
        &self.cells[..self.num_cells]
    }
}

/// A straight-sided triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub vertices: [Point; 3],
}

impl Triangle {
    pub fn new(a: Point, b: Point, c: Point) -> Self {
        Self {
            vertices: [a, b, c],
        }
    }

    /// Signed area, positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let [a, b, c] = self.vertices;
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Longest edge length.
    pub fn diameter(&self) -> f64 {
        (0..3)
            .map(|i| distance(self.vertices[i], self.vertices[(i + 1) % 3]))
            .fold(0.0, f64::max)
    }

    /// Maps reference coordinates on `(0,0),(1,0),(0,1)` to physical space.
    pub fn map(&self, xi: f64, eta: f64) -> Point {
        let [a, b, c] = self.vertices;
        [
            a[0] + xi * (b[0] - a[0]) + eta * (c[0] - a[0]),
            a[1] + xi * (b[1] - a[1]) + eta * (c[1] - a[1]),
        ]
    }

    /// Outward unit normal of local edge `i` (from vertex `i` to `i+1`),
    /// assuming counterclockwise orientation.
    pub fn outward_normal(&self, i: usize) -> Point {
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % 3];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        [dy / len, -dx / len]
    }
}

pub fn distance(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// A conforming triangulation with edge topology.
#[derive(Clone, Debug)]
pub struct Mesh {
    domain: Domain,
    subdivisions: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    cell_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    boundary: Vec<bool>,
    interior_index: Vec<Option<usize>>,
    interior_edges: Vec<usize>,
    diameters: Vec<f64>,
    h: f64,
}

impl Mesh {
    /// Builds the uniform diagonal-split mesh with `n` grid steps per unit length.
    pub fn uniform(domain: Domain, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "subdivision count must be at least 1"));
        }
        let step = 1.0 / n as f64;
        let (origin, grid) = match domain {
            Domain::UnitSquare => (0.0, n),
            Domain::LShape => (-1.0, 2 * n),
        };
        let keep_square = |i: usize, j: usize| match domain {
            Domain::UnitSquare => true,
            Domain::LShape => !(i >= n && j >= n),
        };

        let mut vertex_id = vec![usize::MAX; (grid + 1) * (grid + 1)];
        let mut vertices = Vec::new();
        let mut vertex = |i: usize, j: usize, vertices: &mut Vec<Point>| -> usize {
            let slot = &mut vertex_id[j * (grid + 1) + i];
            if *slot == usize::MAX {
                *slot = vertices.len();
                vertices.push([origin + i as f64 * step, origin + j as f64 * step]);
            }
            *slot
        };

        // Number vertices row by row so ids are monotone in (y, x).
        for j in 0..=grid {
            for i in 0..=grid {
                let touches = [(i, j), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1))]
                    .iter()
                    .chain(std::iter::once(&(i.wrapping_sub(1), j.wrapping_sub(1))))
                    .any(|&(si, sj)| si < grid && sj < grid && keep_square(si, sj));
                if touches {
                    vertex(i, j, &mut vertices);
                }
            }
        }

        let mut cells = Vec::new();
        for j in 0..grid {
            for i in 0..grid {
                if !keep_square(i, j) {
                    continue;
                }
                let p00 = vertex(i, j, &mut vertices);
                let p10 = vertex(i + 1, j, &mut vertices);
                let p11 = vertex(i + 1, j + 1, &mut vertices);
                let p01 = vertex(i, j + 1, &mut vertices);
                cells.push([p00, p10, p11]);
                cells.push([p00, p11, p01]);
            }
        }

        Ok(Self::from_cells(domain, n, vertices, cells))
    }

    fn from_cells(domain: Domain, n: usize, vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Self {
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            let mut local = [0; 3];
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: key,
                        cells: [c, usize::MAX],
                        num_cells: 0,
                    });
                    edges.len() - 1
                });
                let edge = &mut edges[id];
                edge.cells[edge.num_cells] = c;
                edge.num_cells += 1;
                local[i] = id;
            }
            cell_edges.push(local);
        }

        let boundary: Vec<bool> = edges.iter().map(Edge::is_boundary).collect();
        let mut interior_index = vec![None; edges.len()];
        let mut interior_edges = Vec::new();
        for (e, &b) in boundary.iter().enumerate() {
            if !b {
                interior_index[e] = Some(interior_edges.len());
                interior_edges.push(e);
            }
        }

        let diameters: Vec<f64> = cells
            .iter()
            .map(|t| Triangle::new(vertices[t[0]], vertices[t[1]], vertices[t[2]]).diameter())
            .collect();
        let h = diameters.iter().copied().fold(0.0, f64::max);

        Self {
            domain,
            subdivisions: n,
            vertices,
            cells,
            cell_edges,
            edges,
            boundary,
            interior_index,
            interior_edges,
            diameters,
            h,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Grid steps per unit length.
    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    /// Grid step `1/n`, the `h` used to label refinement levels.
    pub fn grid_step(&self) -> f64 {
        1.0 / self.subdivisions as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.interior_edges.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.len() - self.interior_edges.len()
    }

    /// Global edge ids of the three local edges of `cell`.
    pub fn cell_edges(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    pub fn triangle(&self, cell: usize) -> Triangle {
        let t = self.cells[cell];
        Triangle::new(
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        )
    }

    /// Endpoints of `edge` in parameterization order (lower vertex id first).
    pub fn edge_endpoints(&self, edge: usize) -> [Point; 2] {
        let [a, b] = self.edges[edge].vertices;
        [self.vertices[a], self.vertices[b]]
    }

    pub fn edge_length(&self, edge: usize) -> f64 {
        let [a, b] = self.edge_endpoints(edge);
        distance(a, b)
    }

    /// Cell diameter `h_T`.
    pub fn diameter(&self, cell: usize) -> f64 {
        self.diameters[cell]
    }

    /// Mesh size `h = max h_T`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.boundary[edge]
    }

    /// Position of `edge` among interior edges, `None` on the boundary.
    pub fn interior_index(&self, edge: usize) -> Option<usize> {
        self.interior_index[edge]
    }

    /// Global ids of interior edges in interior-index order.
    pub fn interior_edges(&self) -> &[usize] {
        &self.interior_edges
    }
}

/// Per-edge boundary flags: an edge lies on the boundary iff it has a single
/// adjacent cell.
pub fn classify_edges(mesh: &Mesh) -> Vec<bool> {
    mesh.edges().iter().map(Edge::is_boundary).collect()
}

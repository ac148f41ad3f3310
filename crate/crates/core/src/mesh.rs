//! Uniform triangulations of the square `[-1/2, 1/2]^2`.
//!
//! An `n x n` grid of squares is split either into four triangles through
//! each centroid (`4 n^2` cells) or into two along a diagonal (`2 n^2`
//! cells). Grid vertices are numbered lexicographically (x fastest), followed
//! by the square centroids of a crossed mesh.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::MeshError;

/// Side of the square a boundary facet lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// A cell edge lying on the outer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub cell: usize,
    /// Local edge index; edge `k` is opposite local vertex `k`.
    pub local_edge: usize,
    pub side: Side,
}

/// Local edge `k` joins these two local vertices (edge `k` is opposite vertex `k`).
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// How each grid square is split into triangles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshPattern {
    /// Four triangles meeting at the centroid.
    #[default]
    Crossed,
    /// Two triangles split by the diagonal from lower left to upper right.
    Right,
    /// Two triangles split by the diagonal from lower right to upper left.
    Left,
}

impl MeshPattern {
    pub fn cells_per_square(self) -> usize {
        match self {
            MeshPattern::Crossed => 4,
            MeshPattern::Right | MeshPattern::Left => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    pattern: MeshPattern,
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    boundary_facets: Vec<BoundaryFacet>,
    /// Unique edges as (lower vertex, higher vertex).
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds the crossed mesh with `n` grid divisions per side.
    pub fn unit_square_crossed(n: usize) -> Result<Self, MeshError> {
        Self::unit_square(n, MeshPattern::Crossed)
    }

    pub fn unit_square(n: usize, pattern: MeshPattern) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroDivisions);
        }
        let h = 1.0 / n as f64;
        let grid = |i: usize, j: usize| j * (n + 1) + i;
        let centroid = |i: usize, j: usize| (n + 1) * (n + 1) + j * n + i;

        let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + n * n);
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([-0.5 + i as f64 * h, -0.5 + j as f64 * h]);
            }
        }
        if pattern == MeshPattern::Crossed {
            for j in 0..n {
                for i in 0..n {
                    vertices.push([-0.5 + (i as f64 + 0.5) * h, -0.5 + (j as f64 + 0.5) * h]);
                }
            }
        }

        let mut cells = Vec::with_capacity(pattern.cells_per_square() * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
                match pattern {
                    MeshPattern::Crossed => {
                        let c = centroid(i, j);
                        cells.extend([[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]);
                    }
                    MeshPattern::Right => cells.extend([[v00, v10, v11], [v00, v11, v01]]),
                    MeshPattern::Left => cells.extend([[v00, v10, v01], [v10, v11, v01]]),
                }
            }
        }

        let side_of = |a: [f64; 2], b: [f64; 2]| {
            let on = |v: f64, t: f64| (v - t).abs() < 1e-12;
            if on(a[0], -0.5) && on(b[0], -0.5) {
                Some(Side::Left)
            } else if on(a[0], 0.5) && on(b[0], 0.5) {
                Some(Side::Right)
            } else if on(a[1], -0.5) && on(b[1], -0.5) {
                Some(Side::Bottom)
            } else if on(a[1], 0.5) && on(b[1], 0.5) {
                Some(Side::Top)
            } else {
                None
            }
        };
        let mut boundary_facets = Vec::with_capacity(4 * n);
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::with_capacity(3 * cells.len() / 2 + n);
        let mut edges = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (ci, cell) in cells.iter().enumerate() {
            let mut ce = [0; 3];
            for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (va, vb) = (cell[*a], cell[*b]);
                if let Some(side) = side_of(vertices[va], vertices[vb]) {
                    boundary_facets.push(BoundaryFacet { cell: ci, local_edge: k, side });
                }
                let key = [va.min(vb), va.max(vb)];
                ce[k] = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
            }
            cell_edges.push(ce);
        }

        Ok(Self { n, pattern, vertices, cells, boundary_facets, edges, cell_edges })
    }

    pub fn pattern(&self) -> MeshPattern {
        self.pattern
    }

    pub fn divisions(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge indices of a cell, ordered by local edge.
    pub fn cell_edges(&self, cell: usize) -> [usize; 3] {
        self.cell_edges[cell]
    }

    pub fn cell_vertices(&self, cell: usize) -> [[f64; 2]; 3] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    /// Longest edge length over all cells.
    pub fn mesh_size(&self) -> f64 {
        self.edges
            .iter()
            .map(|[a, b]| {
                let (p, q) = (self.vertices[*a], self.vertices[*b]);
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Signed area of a cell (positive for counter-clockwise orientation).
    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Cell containing the point, or `None` outside the domain.
    ///
    /// Points on shared edges resolve to one of the adjacent cells.
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let n = self.n as f64;
        let tol = 1e-12;
        let (sx, sy) = ((x[0] + 0.5) * n, (x[1] + 0.5) * n);
        if sx < -tol || sy < -tol || sx > n + tol || sy > n + tol {
            return None;
        }
        let i = (sx.floor().max(0.0) as usize).min(self.n - 1);
        let j = (sy.floor().max(0.0) as usize).min(self.n - 1);
        let (dx, dy) = (sx - i as f64 - 0.5, sy - j as f64 - 0.5);
        let square = j * self.n + i;
        match self.pattern {
            MeshPattern::Right => return Some(2 * square + usize::from(dy > dx)),
            MeshPattern::Left => return Some(2 * square + usize::from(dx + dy > 0.0)),
            MeshPattern::Crossed => {}
        }
        // Quarter of the square relative to its centroid, matching the
        // bottom/right/top/left creation order.
        let quarter = if dy <= -dx.abs() {
            0
        } else if dx >= dy.abs() {
            1
        } else if dy >= dx.abs() {
            2
        } else {
            3
        };
        Some(4 * square + quarter)
    }

    /// Writes vertices and cells in a plain text format.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(w, "cells {}", self.cells.len())?;
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(w, "boundary {}", self.boundary_facets.len())?;
        for f in &self.boundary_facets {
            writeln!(w, "{} {} {:?}", f.cell, f.local_edge, f.side)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_crossed_pattern() {
        for (n, cells) in [(20, 1600), (40, 6400), (60, 14400), (80, 25600)] {
            let m = Mesh::unit_square_crossed(n).unwrap();
            assert_eq!(m.num_cells(), cells);
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1) + n * n);
            assert_eq!(m.boundary_facets().len(), 4 * n);
            // Euler: V - E + F = 1 for a disk.
            assert_eq!(m.num_vertices() + m.num_cells(), m.edges().len() + 1);
        }
    }

    #[test]
    fn cells_are_counter_clockwise_and_tile_the_domain() {
        let m = Mesh::unit_square_crossed(7).unwrap();
        let mut total = 0.0;
        for c in 0..m.num_cells() {
            let a = m.cell_area(c);
            assert!(a > 0.0);
            total += a;
        }
        assert!((total - 1.0).abs() < 1e-14);
        assert!((m.mesh_size() - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_facets_lie_on_their_side() {
        let m = Mesh::unit_square_crossed(5).unwrap();
        for f in m.boundary_facets() {
            let verts = m.cell_vertices(f.cell);
            for &lv in &LOCAL_EDGES[f.local_edge] {
                let [x, y] = verts[lv];
                let on = match f.side {
                    Side::Left => x == -0.5,
                    Side::Right => x == 0.5,
                    Side::Bottom => y == -0.5,
                    Side::Top => y == 0.5,
                };
                assert!(on, "{f:?}");
            }
        }
    }

    #[test]
    fn locate_finds_containing_cell() {
        let m = Mesh::unit_square_crossed(6).unwrap();
        for c in 0..m.num_cells() {
            let [a, b, d] = m.cell_vertices(c);
            let x = [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0];
            assert_eq!(m.locate(x), Some(c));
        }
        assert_eq!(m.locate([0.6, 0.0]), None);
        assert!(m.locate([0.5, 0.5]).is_some());
    }

    #[test]
    fn diagonal_patterns() {
        for pattern in [MeshPattern::Right, MeshPattern::Left] {
            let m = Mesh::unit_square(5, pattern).unwrap();
            assert_eq!(m.num_cells(), 50);
            assert_eq!(m.num_vertices(), 36);
            assert_eq!(m.boundary_facets().len(), 20);
            assert_eq!(m.num_vertices() + m.num_cells(), m.edges().len() + 1);
            let area: f64 = (0..m.num_cells()).map(|c| m.cell_area(c)).inspect(|a| assert!(*a > 0.0)).sum();
            assert!((area - 1.0).abs() < 1e-14);
            for c in 0..m.num_cells() {
                let [a, b, d] = m.cell_vertices(c);
                assert_eq!(m.locate([(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]), Some(c));
            }
        }
    }

    #[test]
    fn zero_divisions_rejected() {
        assert!(Mesh::unit_square_crossed(0).is_err());
    }
}
